#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "lasmimo/asymptotics.hpp"
#include "lasmimo/harness.hpp"

namespace lasmimo::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using Layer = std::map<std::string, std::string>;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kKeys{
    "name", "seed",       "workers",   "out_dir",    "qam",          "init",
    "ntx",  "ntx_list",   "snr_grid",  "snr",        "target_ber",   "trials",
    "min_errors", "max_trials", "bins", "suite", "tolerance_db", "bracket_step_db"};

const std::vector<std::string> kCommands{"ber", "snr-target", "zpdf", "verify"};
const std::vector<std::string> kSuites{"lemma2", "theorem2", "fixedpoint"};

std::string flag_of(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '-', '_');
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return std::tolower(c); });
  return k;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool uses_list(const std::string& cmd, const std::string& suite) {
  return cmd == "snr-target" || cmd == "zpdf" || (cmd == "verify" && suite != "lemma2");
}

// Keys a command reads; anything else coming from a file or the environment
// is ignored.
std::set<std::string> relevant_keys(const std::string& cmd, const std::string& suite) {
  std::set<std::string> k{"name", "seed", "workers", "out_dir"};
  if (cmd == "ber") k.insert({"qam", "init", "ntx", "snr_grid", "min_errors", "max_trials"});
  if (cmd == "snr-target") {
    k.insert({"qam", "init", "ntx_list", "snr_grid", "target_ber", "min_errors", "max_trials",
              "tolerance_db", "bracket_step_db"});
  }
  if (cmd == "zpdf") k.insert({"ntx_list", "trials", "bins"});
  if (cmd == "verify") {
    k.insert({"suite", "snr", "trials"});
    if (suite == "lemma2") k.insert("ntx");
    if (suite == "theorem2") k.insert({"init", "ntx_list"});
    if (suite == "fixedpoint") k.insert({"qam", "init", "ntx_list"});
  }
  return k;
}

Layer defaults_for(const std::string& cmd, const std::string& suite) {
  Layer d{{"seed", "1"}, {"workers", "1"}, {"out_dir", "."}, {"qam", "4"}, {"init", "mmse"},
          {"min_errors", "100"}, {"max_trials", "1000000"}};
  d["name"] = cmd == "verify" ? "verify_" + suite : cmd == "snr-target" ? "snr_target" : cmd;
  if (cmd == "ber") {
    d["ntx"] = "16";
    d["snr_grid"] = "0,2,4,6,8,10,12";
  } else if (cmd == "snr-target") {
    d["ntx_list"] = "4,8,16,32,64";
    d["snr_grid"] = "0,40";
    d["tolerance_db"] = "0.2";
    d["bracket_step_db"] = "1";
  } else if (cmd == "zpdf") {
    d["ntx_list"] = "4,16,64";
    d["trials"] = "2000";
    d["bins"] = "200";
  } else if (suite == "lemma2") {
    d["ntx"] = "2";
    d["snr"] = "5";
    d["trials"] = "1000";
  } else if (suite == "theorem2") {
    d["ntx_list"] = "2,4,6,8";
    d["snr"] = "4";
    d["trials"] = "1000";
  } else if (suite == "fixedpoint") {
    d["ntx_list"] = "4,16,64";
    d["snr"] = "8";
    d["trials"] = "1000";
  }
  return d;
}

// --- value parsing -------------------------------------------------------

double parse_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "inf" || s == "+inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || std::isnan(v)) {
    throw UsageError(key + ": expected a number, got '" + raw + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& raw, std::int64_t lo) {
  const std::string s = trim(raw);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw UsageError(key + ": expected an integer, got '" + raw + "'");
  }
  if (v < lo) throw UsageError(key + ": must be >= " + std::to_string(lo));
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  char* end = nullptr;
  errno = 0;
  if (!s.empty() && s[0] == '-') throw UsageError(key + ": must be non-negative");
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw UsageError(key + ": expected an unsigned integer, got '" + raw + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

// Comma list, or start:step:stop inclusive.
std::vector<double> parse_double_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  if (raw.find(':') != std::string::npos) {
    const auto p = split(raw, ':');
    if (p.size() != 3) throw UsageError(key + ": ranges are start:step:stop");
    const double a = parse_double(key, p[0]), step = parse_double(key, p[1]),
                 b = parse_double(key, p[2]);
    if (!(step > 0) || !std::isfinite(a) || !std::isfinite(b) || b < a) {
      throw UsageError(key + ": bad range '" + raw + "'");
    }
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    return out;
  }
  for (const auto& p : split(raw, ',')) out.push_back(parse_double(key, p));
  if (out.empty()) throw UsageError(key + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& raw) {
  std::vector<int> out;
  for (const auto& p : split(raw, ',')) out.push_back(static_cast<int>(parse_int(key, p, 1)));
  if (out.empty()) throw UsageError(key + ": empty list");
  return out;
}

// --- config sources ------------------------------------------------------

std::string json_scalar_to_string(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_double(v.get<double>());
  throw UsageError("unsupported config value " + v.dump());
}

Layer layer_from_json(const Json& doc, const std::string& cmd) {
  if (!doc.is_object()) throw UsageError("JSON config must be an object");
  const Json* cfg = &doc;
  // A run manifest carries its settings under "config".
  if (doc.contains("config") && doc["config"].is_object()) {
    if (doc.contains("command") && doc["command"] != cmd) {
      throw UsageError("manifest was written by '" + doc["command"].get<std::string>() +
                       "', not '" + cmd + "'");
    }
    cfg = &doc["config"];
  }
  Layer l;
  for (const auto& [k, v] : cfg->items()) {
    if (v.is_null()) continue;
    if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) joined += (joined.empty() ? "" : ",") + json_scalar_to_string(e);
      l[normalize_key(k)] = joined;
    } else {
      l[normalize_key(k)] = json_scalar_to_string(v);
    }
  }
  return l;
}

Layer layer_from_text(const std::string& text) {
  Layer l;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    l[normalize_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
  }
  return l;
}

Layer load_config(const std::string& path, const std::string& cmd) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Layer l;
  if (trim(text).starts_with('{')) {
    Json doc;
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw UsageError("config file '" + path + "': " + e.what());
    }
    l = layer_from_json(doc, cmd);
  } else {
    l = layer_from_text(text);
  }
  for (const auto& [k, v] : l) {
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) {
      throw UsageError("config file '" + path + "': unknown key '" + k + "'");
    }
  }
  return l;
}

Layer layer_from_env(const EnvLookup& env) {
  Layer l;
  for (const auto& k : kKeys) {
    std::string var = "LASSIM_" + k;
    std::transform(var.begin(), var.end(), var.begin(), [](unsigned char c) { return std::toupper(c); });
    if (auto v = env(var)) l[k] = *v;
  }
  return l;
}

// --- resolved settings ---------------------------------------------------

struct Settings {
  std::string command;
  Layer raw;  // relevant keys only, after precedence
  std::string name;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir;
  int qam = 4;
  Initializer init = Initializer::kMMSE;
  int ntx = 0;
  std::vector<int> ntx_list;
  std::vector<double> snr_grid;
  double snr = 0.0;
  std::optional<double> target_ber;
  std::uint64_t trials = 0;
  std::uint64_t min_errors = 100;
  std::uint64_t max_trials = 1;
  int bins = 200;
  std::string suite;
  double tolerance_db = 0.2;
  double bracket_step_db = 1.0;
};

Settings resolve(const std::string& cmd, const Layer& flags, const EnvLookup& env) {
  std::optional<std::string> config_path;
  if (flags.contains("config")) {
    config_path = flags.at("config");
  } else if (auto v = env("LASSIM_CONFIG")) {
    config_path = *v;
  }
  const Layer file = config_path ? load_config(*config_path, cmd) : Layer{};
  Layer flag_values = flags;
  flag_values.erase("config");
  const Layer envl = layer_from_env(env);
  const std::vector<const Layer*> layers{&file, &envl, &flag_values};

  std::string suite;
  if (cmd == "verify") {
    for (const Layer* l : layers) {
      if (l->contains("suite")) suite = l->at("suite");
    }
    if (suite.empty()) throw UsageError("verify needs --suite {lemma2, theorem2, fixedpoint}");
    if (std::find(kSuites.begin(), kSuites.end(), suite) == kSuites.end()) {
      throw UsageError("unknown suite '" + suite + "'");
    }
  }

  const bool list_cmd = uses_list(cmd, suite);
  const auto keys = relevant_keys(cmd, suite);
  Layer merged = defaults_for(cmd, suite);
  for (const Layer* l : layers) {
    if (list_cmd && l->contains("ntx") && l->contains("ntx_list") && l == &flag_values) {
      throw UsageError("give either --ntx or --ntx-list");
    }
    for (const auto& [k, v] : *l) {
      if (list_cmd && k == "ntx" && !l->contains("ntx_list")) {
        merged["ntx_list"] = v;  // a single size is a one-element list
      } else if (keys.contains(k)) {
        merged[k] = v;
      }
    }
  }
  // Only the caller's own flags are checked for relevance; CLI11 already
  // rejects flags a subcommand does not declare.
  for (const auto& [k, v] : flag_values) {
    if (!keys.contains(k) && !(list_cmd && k == "ntx")) {
      throw UsageError(flag_of(k) + " does not apply to this command");
    }
  }

  Settings s;
  s.command = cmd;
  s.suite = suite;
  for (const auto& [k, v] : merged) {
    if (keys.contains(k)) s.raw[k] = v;
  }
  const Layer& r = s.raw;
  s.name = r.at("name");
  if (s.name.empty() || s.name.find('/') != std::string::npos) {
    throw UsageError("name must be a non-empty file stem");
  }
  s.seed = parse_u64("seed", r.at("seed"));
  s.workers = static_cast<int>(parse_int("workers", r.at("workers"), 1));
  s.out_dir = r.at("out_dir");
  if (r.contains("qam")) {
    s.qam = static_cast<int>(parse_int("qam", r.at("qam"), 1));
    if (s.qam != 4 && s.qam != 16) throw UsageError("qam must be 4 or 16");
  }
  if (r.contains("init")) {
    auto init = parse_initializer(r.at("init"));
    if (!init) throw UsageError("init must be one of mf, zf, mmse");
    s.init = *init;
  }
  if (r.contains("ntx")) s.ntx = static_cast<int>(parse_int("ntx", r.at("ntx"), 1));
  if (r.contains("ntx_list")) s.ntx_list = parse_int_list("ntx_list", r.at("ntx_list"));
  if (r.contains("snr_grid")) s.snr_grid = parse_double_list("snr_grid", r.at("snr_grid"));
  if (r.contains("snr")) s.snr = parse_double("snr", r.at("snr"));
  if (cmd == "snr-target") {
    s.target_ber = r.contains("target_ber") ? parse_double("target_ber", r.at("target_ber"))
                                            : (s.qam == 4 ? 1e-3 : 1e-4);
    s.raw["target_ber"] = format_double(*s.target_ber);
  }
  if (r.contains("trials")) s.trials = parse_u64("trials", r.at("trials"));
  if (r.contains("min_errors")) s.min_errors = parse_u64("min_errors", r.at("min_errors"));
  if (r.contains("max_trials")) s.max_trials = parse_u64("max_trials", r.at("max_trials"));
  if (r.contains("bins")) s.bins = static_cast<int>(parse_int("bins", r.at("bins"), 1));
  if (r.contains("tolerance_db")) s.tolerance_db = parse_double("tolerance_db", r.at("tolerance_db"));
  if (r.contains("bracket_step_db")) {
    s.bracket_step_db = parse_double("bracket_step_db", r.at("bracket_step_db"));
  }
  return s;
}

ExperimentConfig experiment_config(const Settings& s) {
  ExperimentConfig cfg;
  cfg.n_tx = s.ntx > 0 ? s.ntx : 1;
  cfg.qam_order = s.qam;
  cfg.snr_grid_db = s.snr_grid;
  cfg.initializer = s.init;
  cfg.target_ber = s.target_ber;
  cfg.min_bit_errors = s.min_errors;
  cfg.max_trials = s.max_trials;
  cfg.master_seed = s.seed;
  cfg.workers = s.workers;
  cfg.bisection_tolerance_db = s.tolerance_db;
  cfg.bracket_step_db = s.bracket_step_db;
  try {
    cfg.validate();
  } catch (const DimensionError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

// --- output --------------------------------------------------------------

void emit_json(const Json& j, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(2 * depth), ' ');
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (const auto& [k, v] : j.items()) {
      if (!first) out += ",\n";
      first = false;
      out += pad + Json(k).dump() + ": ";
      emit_json(v, out, depth + 1);
    }
    out += "\n" + close + "}";
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    const bool flat = std::none_of(j.begin(), j.end(),
                                   [](const Json& e) { return e.is_structured(); });
    if (flat) {
      out += "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ", ";
        emit_json(j[i], out, depth + 1);
      }
      out += "]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",\n";
      out += pad;
      emit_json(j[i], out, depth + 1);
    }
    out += "\n" + close + "]";
  } else if (j.is_number_float()) {
    const double v = j.get<double>();
    out += std::isfinite(v) ? format_double(v) : "\"" + format_double(v) + "\"";
  } else {
    out += j.dump();
  }
}

std::string to_json_text(const Json& j) {
  std::string s;
  emit_json(j, s, 0);
  return s + "\n";
}

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) {
    row_ = std::vector<std::string>(header);
    end_row();
  }
  Csv& operator<<(double v) { return cell(format_double(v)); }
  Csv& operator<<(std::uint64_t v) { return cell(std::to_string(v)); }
  Csv& operator<<(int v) { return cell(std::to_string(v)); }
  Csv& operator<<(bool v) { return cell(v ? "true" : "false"); }
  Csv& operator<<(const std::string& v) { return cell(v); }
  void end_row() {
    for (std::size_t i = 0; i < row_.size(); ++i) text_ += (i ? "," : "") + row_[i];
    text_ += "\n";
    row_.clear();
  }
  const std::string& text() const { return text_; }

 private:
  Csv& cell(std::string v) {
    row_.push_back(std::move(v));
    return *this;
  }
  std::vector<std::string> row_;
  std::string text_;
};

struct OutputFile {
  std::string file;
  std::string content;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json config_json(const Settings& s) {
  Json c = Json::object();
  for (const auto& [k, v] : s.raw) {
    if (k == "ntx_list") {
      c[k] = parse_int_list(k, v);
    } else if (k == "snr_grid") {
      c[k] = parse_double_list(k, v);
    } else if (k == "name" || k == "out_dir" || k == "init" || k == "suite") {
      c[k] = v;
    } else if (k == "snr" || k == "target_ber" || k == "tolerance_db" || k == "bracket_step_db") {
      c[k] = parse_double(k, v);
    } else {
      c[k] = parse_u64(k, v);
    }
  }
  return c;
}

void write_outputs(const Settings& s, const std::vector<OutputFile>& files,
                   const std::string& started, std::ostream& out) {
  std::error_code ec;
  fs::create_directories(s.out_dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + s.out_dir + "': " + ec.message());
  Json listing = Json::array();
  std::string digest_input;
  for (const auto& f : files) {
    const fs::path p = fs::path(s.out_dir) / f.file;
    std::ofstream o(p, std::ios::binary | std::ios::trunc);
    o << f.content;
    if (!o) throw UsageError("cannot write '" + p.string() + "'");
    const std::string h = git_blob_sha1(f.content);
    listing.push_back({{"file", f.file}, {"bytes", f.content.size()}, {"sha1", h}});
    digest_input += h + "  " + f.file + "\n";
    out << "wrote " << p.string() << "\n";
  }
  Json m;
  m["tool"] = "las_sim";
  m["version"] = LASMIMO_VERSION;
  m["command"] = s.command;
  m["config"] = config_json(s);
  m["seed"] = s.seed;
  m["started_utc"] = started;
  m["finished_utc"] = utc_now();
  m["outputs"] = listing;
  m["content_hash"] = git_blob_sha1(digest_input);
  const fs::path mp = fs::path(s.out_dir) / (s.name + ".manifest.json");
  std::ofstream o(mp, std::ios::binary | std::ios::trunc);
  o << to_json_text(m);
  if (!o) throw UsageError("cannot write '" + mp.string() + "'");
  out << "wrote " << mp.string() << "\n";
}

// --- commands ------------------------------------------------------------

struct CommandResult {
  std::vector<OutputFile> files;
  bool passed = true;
};

CommandResult cmd_ber(const Settings& s, std::ostream& out) {
  const ExperimentConfig cfg = experiment_config(s);
  const auto pts = ber_sweep(cfg);
  Csv csv{"snr_db", "ber", "bit_errors", "bits", "trials", "las_iterations", "under_resolved"};
  Json rows = Json::array();
  for (const auto& p : pts) {
    csv << p.snr_db << p.ber << p.bit_errors << p.bits_simulated << p.trials << p.las_iterations
        << p.under_resolved;
    csv.end_row();
    rows.push_back({{"snr_db", p.snr_db}, {"ber", p.ber}, {"bit_errors", p.bit_errors},
                    {"bits", p.bits_simulated}, {"trials", p.trials},
                    {"las_iterations", p.las_iterations}, {"under_resolved", p.under_resolved}});
    out << "snr " << format_double(p.snr_db) << " dB  ber " << format_double(p.ber) << "  ("
        << p.bit_errors << " errors, " << p.trials << " trials"
        << (p.under_resolved ? ", under-resolved" : "") << ")\n";
  }
  Json doc{{"command", "ber"}, {"n_tx", s.ntx}, {"qam", s.qam}, {"init", to_string(s.init)},
           {"points", rows}};
  return {{{s.name + ".csv", csv.text()}, {s.name + ".json", to_json_text(doc)}}, true};
}

CommandResult cmd_snr_target(const Settings& s, std::ostream& out) {
  const ExperimentConfig cfg = experiment_config(s);
  Csv csv{"n_tx", "in_range", "snr_required_db", "lo_db", "hi_db", "achieved_ber", "ber_lo",
          "errors_lo", "errors_hi", "reference_siso_db", "gap_db", "evaluations", "resolved"};
  Json rows = Json::array();
  for (int n : s.ntx_list) {
    const auto p = snr_for_target_ber(cfg, n);
    csv << p.n_tx << p.in_range << p.snr_required_db << p.lo_db << p.hi_db << p.achieved_ber
        << p.ber_lo << p.errors_lo << p.errors_hi << p.reference_siso_db << p.gap_db()
        << p.evaluations << p.resolved;
    csv.end_row();
    rows.push_back({{"n_tx", p.n_tx}, {"in_range", p.in_range},
                    {"snr_required_db", p.snr_required_db}, {"lo_db", p.lo_db},
                    {"hi_db", p.hi_db}, {"achieved_ber", p.achieved_ber}, {"ber_lo", p.ber_lo},
                    {"errors_lo", p.errors_lo}, {"errors_hi", p.errors_hi},
                    {"reference_siso_db", p.reference_siso_db}, {"gap_db", p.gap_db()},
                    {"evaluations", p.evaluations}, {"resolved", p.resolved}});
    out << "N_t " << n << "  required " << format_double(p.snr_required_db) << " dB  siso "
        << format_double(p.reference_siso_db) << " dB  gap " << format_double(p.gap_db())
        << " dB\n";
  }
  Json doc{{"command", "snr-target"}, {"qam", s.qam}, {"target_ber", *s.target_ber},
           {"points", rows}};
  return {{{s.name + ".csv", csv.text()}, {s.name + ".json", to_json_text(doc)}}, true};
}

CommandResult cmd_zpdf(const Settings& s, std::ostream& out) {
  ZPdfConfig cfg;
  cfg.n_tx_list = s.ntx_list;
  cfg.trials = s.trials;
  cfg.bins = s.bins;
  cfg.seed = s.seed;
  cfg.workers = s.workers;
  if (s.trials == 0) throw UsageError("trials must be positive");
  const auto results = z_pdf_experiment(cfg);
  CommandResult r;
  Csv summary{"n_tx", "n", "trials", "mean", "stddev", "frac_near_zero", "underflow", "overflow"};
  Json rows = Json::array();
  for (const auto& z : results) {
    const auto& h = z.histogram;
    const auto dens = h.density();
    Csv hist{"bin_lo", "bin_hi", "count", "density"};
    Json jd = Json::array();
    for (int b = 0; b < h.bins(); ++b) {
      const double lo = h.lo + b * h.width();
      hist << lo << lo + h.width() << h.counts[static_cast<std::size_t>(b)]
           << dens[static_cast<std::size_t>(b)];
      hist.end_row();
      jd.push_back(dens[static_cast<std::size_t>(b)]);
    }
    r.files.push_back({s.name + "_ntx" + std::to_string(z.n_tx) + ".csv", hist.text()});
    summary << z.n_tx << z.n << h.total() << z.mean << z.stddev << z.frac_near_zero << h.underflow
            << h.overflow;
    summary.end_row();
    rows.push_back({{"n_tx", z.n_tx}, {"n", z.n}, {"mean", z.mean}, {"stddev", z.stddev},
                    {"frac_near_zero", z.frac_near_zero}, {"lo", h.lo}, {"hi", h.hi},
                    {"bins", h.bins()}, {"underflow", h.underflow}, {"overflow", h.overflow},
                    {"counts", h.counts}, {"density", jd}});
    out << "N_t " << z.n_tx << "  std " << format_double(z.stddev) << "  |z|<0.05 "
        << format_double(z.frac_near_zero) << "\n";
  }
  r.files.insert(r.files.begin(), {s.name + ".csv", summary.text()});
  Json doc{{"command", "zpdf"}, {"trials", s.trials}, {"histograms", rows}};
  r.files.insert(r.files.begin() + 1, {s.name + ".json", to_json_text(doc)});
  return r;
}

CommandResult cmd_verify(const Settings& s, std::ostream& out) {
  if (s.trials == 0) throw UsageError("trials must be positive");
  Json doc{{"command", "verify"}, {"suite", s.suite}, {"snr_db", s.snr}};
  CommandResult r;
  std::string csv_text;
  try {
    if (s.suite == "lemma2") {
      const auto u = region_uniqueness_experiment(s.ntx, s.snr, s.trials, s.seed, s.workers);
      r.passed = u.violations == 0;
      Csv csv{"n_tx", "snr_db", "draws", "violations", "min_member_margin"};
      csv << s.ntx << s.snr << u.draws << u.violations << u.min_member_margin;
      csv.end_row();
      csv_text = csv.text();
      doc["results"] = Json::array({{{"n_tx", s.ntx}, {"draws", u.draws},
                                     {"violations", u.violations},
                                     {"min_member_margin", u.min_member_margin}}});
      out << "lemma2 N_t " << s.ntx << ": " << u.violations << " violations in " << u.draws
          << " draws\n";
    } else if (s.suite == "theorem2") {
      Csv csv{"n_tx", "snr_db", "trials", "vector_matches", "fraction", "bit_match_rate"};
      Json rows = Json::array();
      std::vector<double> p;
      std::vector<std::uint64_t> n;
      for (int ntx : s.ntx_list) {
        const auto a = las_vs_ml_agreement(ntx, s.snr, s.trials, s.seed, 4, s.init, s.workers);
        p.push_back(a.fraction());
        n.push_back(a.trials);
        csv << ntx << s.snr << a.trials << a.vector_matches << a.fraction() << a.bit_match_rate();
        csv.end_row();
        rows.push_back({{"n_tx", ntx}, {"trials", a.trials}, {"vector_matches", a.vector_matches},
                        {"fraction", a.fraction()}, {"bit_match_rate", a.bit_match_rate()}});
        out << "theorem2 N_t " << ntx << ": agreement " << format_double(a.fraction()) << "\n";
      }
      const auto trend = nondecreasing_trend(p, n, 1, 2.0);
      r.passed = trend.holds;
      csv_text = csv.text();
      doc["results"] = rows;
      doc["inversions"] = trend.inversions;
      doc["inversions_within_noise"] = trend.within_noise;
    } else {
      Csv csv{"n_tx", "qam", "snr_db", "runs", "ln_violations", "trajectory_violations",
              "clipped_runs", "clip_events", "iterations", "min_margin"};
      Json rows = Json::array();
      for (int ntx : s.ntx_list) {
        const auto f = fixed_point_suite(ntx, s.qam, s.snr, s.trials, s.seed, s.init, s.workers);
        r.passed = r.passed && f.passed();
        csv << ntx << s.qam << s.snr << f.runs << f.ln_violations << f.trajectory_violations
            << f.clipped_runs << f.clip_events << f.iterations << f.min_margin;
        csv.end_row();
        rows.push_back({{"n_tx", ntx}, {"runs", f.runs}, {"ln_violations", f.ln_violations},
                        {"trajectory_violations", f.trajectory_violations},
                        {"clipped_runs", f.clipped_runs}, {"clip_events", f.clip_events},
                        {"iterations", f.iterations}, {"min_margin", f.min_margin}});
        out << "fixedpoint N_t " << ntx << ": " << f.ln_violations + f.trajectory_violations
            << " violations in " << f.runs << " runs, " << f.clipped_runs << " with clipping\n";
      }
      csv_text = csv.text();
      doc["results"] = rows;
    }
  } catch (const DimensionError& e) {
    throw UsageError(e.what());
  }
  doc["passed"] = r.passed;
  out << (r.passed ? "PASS" : "FAIL") << " " << s.suite << "\n";
  r.files = {{s.name + ".csv", csv_text}, {s.name + ".json", to_json_text(doc)}};
  return r;
}

void add_options(CLI::App* sub, const std::set<std::string>& keys, Layer& store,
                 std::map<std::string, std::vector<std::string>>& lists) {
  static const std::map<std::string, std::string> help{
      {"name", "stem of the output files"},
      {"seed", "master seed"},
      {"workers", "worker threads"},
      {"out_dir", "output directory"},
      {"qam", "constellation order, 4 or 16"},
      {"init", "initial vector: mf, zf or mmse"},
      {"ntx", "transmit antennas (N_t = N_r)"},
      {"ntx_list", "comma-separated antenna counts"},
      {"snr_grid", "SNR points in dB: a,b,c or start:step:stop"},
      {"snr", "SNR in dB (inf for no noise)"},
      {"target_ber", "target bit error rate"},
      {"trials", "trials per point"},
      {"min_errors", "bit errors needed per point"},
      {"max_trials", "trial cap per point"},
      {"bins", "histogram bins over [-1, 1]"},
      {"suite", "lemma2, theorem2 or fixedpoint"},
      {"tolerance_db", "final bracket width in dB"},
      {"bracket_step_db", "upward step while bracketing"}};
  sub->add_option("--config", store["config"], "key=value or JSON config, or a run manifest");
  for (const auto& k : keys) {
    if (k == "ntx_list" || k == "snr_grid") {
      sub->add_option(flag_of(k), lists[k], help.at(k))->allow_extra_args(false);
    } else {
      sub->add_option(flag_of(k), store[k], help.at(k));
    }
  }
}

}  // namespace

std::optional<std::string> system_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env) {
  CLI::App app{"LAS detector simulations for large V-BLAST systems", "las_sim"};
  app.set_version_flag("--version", std::string(LASMIMO_VERSION));
  app.require_subcommand(1);

  std::map<std::string, Layer> stores;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> lists;
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> descriptions{
      {"ber", "BER against SNR"},
      {"snr-target", "SNR needed for a target BER, per antenna count"},
      {"zpdf", "histograms of the normalised cross-correlation statistic"},
      {"verify", "run a verification suite"}};
  for (const auto& c : kCommands) {
    CLI::App* sub = app.add_subcommand(c, descriptions.at(c));
    std::set<std::string> keys;
    if (c == "verify") {
      for (const auto& suite : kSuites) keys.merge(relevant_keys(c, suite));
    } else {
      keys = relevant_keys(c, "");
    }
    if (uses_list(c, "")) keys.insert("ntx");
    add_options(sub, keys, stores[c], lists[c]);
    subs[c] = sub;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  std::string cmd;
  for (const auto& [c, sub] : subs) {
    if (sub->parsed()) cmd = c;
  }
  CLI::App* sub = subs.at(cmd);
  Layer flags;
  for (const auto& [k, v] : stores[cmd]) {
    if (sub->count(flag_of(k)) > 0) flags[k] = v;
  }
  for (const auto& [k, v] : lists[cmd]) {
    if (sub->count(flag_of(k)) == 0) continue;
    std::string joined;
    for (const auto& part : v) joined += (joined.empty() ? "" : ",") + part;
    flags[k] = joined;
  }

  try {
    const Settings s = resolve(cmd, flags, env);
    const std::string started = utc_now();
    CommandResult r;
    if (cmd == "ber") {
      r = cmd_ber(s, out);
    } else if (cmd == "snr-target") {
      r = cmd_snr_target(s, out);
    } else if (cmd == "zpdf") {
      r = cmd_zpdf(s, out);
    } else {
      r = cmd_verify(s, out);
    }
    write_outputs(s, r.files, started, out);
    return r.passed ? kOk : kAssertionFailed;
  } catch (const UsageError& e) {
    err << "las_sim: " << e.what() << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    err << "las_sim: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "las_sim: " << e.what() << "\n";
    return kAssertionFailed;
  }
}

}  // namespace lasmimo::cli
