#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using lasmimo::cli::run_cli;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

struct Sandbox {
  fs::path root;
  std::map<std::string, std::string> env;
  Sandbox() {
    root = fs::temp_directory_path() /
           ("lasmimo_cli_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(root);
  }
  ~Sandbox() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  Run run(std::vector<std::string> args) const {
    std::ostringstream out, err;
    const auto lookup = [this](const std::string& k) -> std::optional<std::string> {
      auto it = env.find(k);
      if (it == env.end()) return std::nullopt;
      return it->second;
    };
    const int code = run_cli(args, out, err, lookup);
    return {code, out.str(), err.str()};
  }
  std::string dir(const std::string& name) const { return (root / name).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("number formatting and hashing") {
  using lasmimo::cli::format_double;
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  // `printf 'hello\n' | git hash-object --stdin`
  CHECK(lasmimo::cli::git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(lasmimo::cli::git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("usage errors") {
  Sandbox sb;
  CHECK(sb.run({}).code == 2);
  CHECK(sb.run({"plot"}).code == 2);
  CHECK(sb.run({"ber", "--config", sb.dir("missing.cfg")}).code == 2);
  CHECK(sb.run({"verify", "--suite", "lemma7"}).code == 2);
  CHECK(sb.run({"verify"}).code == 2);
  CHECK(sb.run({"ber", "--qam", "8"}).code == 2);
  CHECK(sb.run({"ber", "--init", "lms"}).code == 2);
  CHECK(sb.run({"ber", "--snr-grid", "4,2"}).code == 2);
  CHECK(sb.run({"ber", "--ntx", "four"}).code == 2);
  CHECK(sb.run({"ber", "--trials", "3"}).code == 2);
  CHECK(sb.run({"zpdf", "--trials", "0"}).code == 2);
  CHECK(sb.run({"verify", "--suite", "lemma2", "--ntx", "11"}).code == 2);
  CHECK(sb.run({"verify", "--suite", "theorem2", "--qam", "16"}).code == 2);
  std::ofstream(sb.root / "bad.cfg") << "ntx 4\n";
  CHECK(sb.run({"ber", "--config", (sb.root / "bad.cfg").string()}).code == 2);
  std::ofstream(sb.root / "odd.cfg") << "colour=blue\n";
  CHECK(sb.run({"ber", "--config", (sb.root / "odd.cfg").string()}).code == 2);
  CHECK(sb.run({"--help"}).code == 0);
}

TEST_CASE("ber smoke run, outputs and reproducibility") {
  Sandbox sb;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = sb.run({"ber", "--ntx", "4", "--snr-grid", "0,6", "--max-trials", "10",
                         "--out-dir", sb.dir("a")});
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));
  REQUIRE(r.code == 0);
  const std::string csv = slurp(sb.root / "a" / "ber.csv");
  CHECK(csv.starts_with("snr_db,ber,bit_errors,bits,trials"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  const auto j = nlohmann::json::parse(slurp(sb.root / "a" / "ber.json"));
  REQUIRE(j["points"].size() == 2);
  for (const auto& p : j["points"]) {
    CHECK(p["trials"] == 10);
    CHECK(p["under_resolved"] == (p["bit_errors"].get<int>() < 100));
    CHECK(p["ber"].get<double>() == p["bit_errors"].get<double>() / p["bits"].get<double>());
  }

  const auto m = nlohmann::json::parse(slurp(sb.root / "a" / "ber.manifest.json"));
  CHECK(m["command"] == "ber");
  CHECK(m["seed"] == 1);
  CHECK(m["config"]["ntx"] == 4);
  CHECK(m["config"]["snr_grid"] == nlohmann::json::array({0, 6}));
  CHECK(m["outputs"][0]["sha1"] == lasmimo::cli::git_blob_sha1(csv));
  CHECK(m.contains("started_utc"));
  CHECK(m.contains("finished_utc"));

  REQUIRE(sb.run({"ber", "--ntx", "4", "--snr-grid", "0,6", "--max-trials", "10", "--workers",
                  "3", "--out-dir", sb.dir("b")}).code == 0);
  CHECK(slurp(sb.root / "b" / "ber.csv") == csv);
  CHECK(slurp(sb.root / "b" / "ber.json") == slurp(sb.root / "a" / "ber.json"));

  REQUIRE(sb.run({"ber", "--config", (sb.root / "a" / "ber.manifest.json").string(), "--workers",
                  "2", "--out-dir", sb.dir("c")}).code == 0);
  CHECK(slurp(sb.root / "c" / "ber.csv") == csv);
  // A manifest from another command is refused.
  CHECK(sb.run({"zpdf", "--config", (sb.root / "a" / "ber.manifest.json").string()}).code == 2);
}

TEST_CASE("precedence: defaults < file < environment < flags") {
  Sandbox sb;
  std::ofstream(sb.root / "run.cfg") << "# smoke\nntx = 3\nsnr-grid = 0:5:10\nmax_trials=4\nseed=9\n";
  sb.env["LASSIM_SEED"] = "11";
  sb.env["LASSIM_TRIALS"] = "50";  // not a ber setting; ignored
  REQUIRE(sb.run({"ber", "--config", (sb.root / "run.cfg").string(), "--max-trials", "2",
                  "--out-dir", sb.dir("p")}).code == 0);
  const auto m = nlohmann::json::parse(slurp(sb.root / "p" / "ber.manifest.json"));
  CHECK(m["config"]["ntx"] == 3);
  CHECK(m["config"]["snr_grid"] == nlohmann::json::array({0, 5, 10}));
  CHECK(m["config"]["seed"] == 11);
  CHECK(m["config"]["max_trials"] == 2);
  CHECK(m["config"]["min_errors"] == 100);
  CHECK_FALSE(m["config"].contains("trials"));

  nlohmann::json cfg{{"ntx_list", {4}}, {"trials", 20}, {"bins", 50}};
  std::ofstream(sb.root / "z.json") << cfg.dump();
  sb.env["LASSIM_CONFIG"] = (sb.root / "z.json").string();
  REQUIRE(sb.run({"zpdf", "--out-dir", sb.dir("z")}).code == 0);
  const auto zm = nlohmann::json::parse(slurp(sb.root / "z" / "zpdf.manifest.json"));
  CHECK(zm["config"]["bins"] == 50);
  CHECK(zm["config"]["trials"] == 50);  // environment beats the file
}

TEST_CASE("zpdf histograms") {
  Sandbox sb;
  REQUIRE(sb.run({"zpdf", "--ntx-list", "4,16", "--trials", "400", "--out-dir", sb.dir("z")}).code == 0);
  const auto j = nlohmann::json::parse(slurp(sb.root / "z" / "zpdf.json"));
  REQUIRE(j["histograms"].size() == 2);
  for (const auto& h : j["histograms"]) {
    double integral = 0.0;
    const double width = (h["hi"].get<double>() - h["lo"].get<double>()) / h["bins"].get<double>();
    for (const auto& d : h["density"]) integral += d.get<double>() * width;
    integral += (h["underflow"].get<double>() + h["overflow"].get<double>()) / 400.0;
    CHECK(std::abs(integral - 1.0) < 1e-9);
    CHECK(fs::exists(sb.root / "z" / ("zpdf_ntx" + std::to_string(h["n_tx"].get<int>()) + ".csv")));
  }
  CHECK(j["histograms"][1]["stddev"].get<double>() < j["histograms"][0]["stddev"].get<double>());
}

TEST_CASE("snr-target table") {
  Sandbox sb;
  REQUIRE(sb.run({"snr-target", "--ntx", "4", "--target-ber", "2e-2", "--out-dir", sb.dir("t")}).code == 0);
  const auto j = nlohmann::json::parse(slurp(sb.root / "t" / "snr_target.json"));
  REQUIRE(j["points"].size() == 1);
  const auto& p = j["points"][0];
  CHECK(p["in_range"] == true);
  CHECK(p["ber_lo"].get<double>() > 2e-2);
  CHECK(p["achieved_ber"].get<double>() <= 2e-2);
  CHECK(p["errors_hi"].get<int>() >= 100);

  REQUIRE(sb.run({"snr-target", "--ntx", "4", "--target-ber", "0.5", "--out-dir", sb.dir("u")}).code == 0);
  const auto u = nlohmann::json::parse(slurp(sb.root / "u" / "snr_target.json"));
  CHECK(u["points"][0]["in_range"] == false);
  CHECK(u["points"][0]["snr_required_db"] == "-inf");
}

TEST_CASE("verify suites") {
  Sandbox sb;
  auto r = sb.run({"verify", "--suite", "lemma2", "--snr", "inf", "--trials", "30", "--out-dir", sb.dir("v")});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  r = sb.run({"verify", "--suite", "lemma2", "--trials", "1000", "--out-dir", sb.dir("v")});
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(sb.root / "v" / "verify_lemma2.json"));
  CHECK(j["results"][0]["violations"] == 0);
  CHECK(j["passed"] == true);

  r = sb.run({"verify", "--suite", "fixedpoint", "--ntx-list", "4,8", "--trials", "100",
              "--out-dir", sb.dir("f")});
  CHECK(r.code == 0);
  // A noiseless theorem2 run agrees everywhere and so passes.
  r = sb.run({"verify", "--suite", "theorem2", "--ntx-list", "2,3", "--snr", "inf", "--trials",
              "50", "--out-dir", sb.dir("t")});
  CHECK(r.code == 0);
}
