#ifndef LASMIMO_TOOLS_CLI_HPP
#define LASMIMO_TOOLS_CLI_HPP

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lasmimo::cli {

enum ExitCode : int { kOk = 0, kAssertionFailed = 1, kUsage = 2 };

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment.
std::optional<std::string> system_env(const std::string& name);

/// Entry point of the las_sim tool. `args` excludes the program name.
/// Settings resolve as defaults < --config file < LASSIM_* environment <
/// flags.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = system_env);

/// Git blob hash ("blob <size>\0" + content) as lowercase hex.
std::string git_blob_sha1(const std::string& content);

/// Shortest "%.17g" rendering; non-finite values print as inf, -inf, nan.
std::string format_double(double v);

}  // namespace lasmimo::cli

#endif  // LASMIMO_TOOLS_CLI_HPP
