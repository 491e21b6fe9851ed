#pragma once

// Command-line front end. `run` parses arguments (optionally layered over a
// JSON config file), validates, dispatches the subcommand and maps errors to
// exit codes: 0 success, 1 usage, 2 numeric/domain, 3 resource budget.
//
// Outputs: the primary stream goes to --out (stdout for "-"); the secondary
// one goes to a sibling file named after --out, or to the error stream when
// the primary is stdout.
//
//   simulate   checkpoint CSV `n,S,Sigma,M`             + <out>.config.json
//   ensemble   report JSON (embeds the config)           + <out>.csv
//   moments    CSV `n,E_S,E_Sigma,E_Xi2,ratio`           + <out>.config.json
//   clt        CSV `replica,Z,W_scaled`                  + <out>.summary.json
//   genealogy  JSONL `{"level","root","size","growth"}`  + <out>.summary.json
//   regime     JSON

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uerw/analysis.hpp"
#include "uerw/errors.hpp"
#include "uerw/genealogy.hpp"
#include "uerw/index_set.hpp"
#include "uerw/kernel.hpp"
#include "uerw/moments.hpp"
#include "uerw/walker.hpp"

namespace uerw::cli {

inline constexpr const char* kVersion = "uerw 1.0.0";

using Json = nlohmann::ordered_json;

struct RunConfig {
  std::string command;
  double p = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t steps = 1000;
  std::uint64_t replicas = 100;
  std::uint64_t seed = 1;
  double checkpoint_ratio = 1.2;
  std::optional<std::uint64_t> n_eval;
  std::optional<std::uint64_t> n_ref;
  double delta = 1e-6;
  std::string index_set = "all";
  std::string out = "-";
  unsigned threads = 1;
  std::uint64_t window = 0;  // 0 means steps/2
  std::uint64_t max_level = 2;
  bool raw_links = false;
  bool eta_uncorrected = false;
  std::uint64_t n_min = 1000;
  std::uint64_t memory_budget_mb = 4096;
  std::optional<std::string> config_file;
  std::vector<std::string> overrides;

  bool operator==(const RunConfig& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return command == o.command && same(p, o.p) && same(beta, o.beta) && steps == o.steps &&
           replicas == o.replicas && seed == o.seed && checkpoint_ratio == o.checkpoint_ratio &&
           n_eval == o.n_eval && n_ref == o.n_ref && delta == o.delta && index_set == o.index_set &&
           out == o.out && threads == o.threads && window == o.window && max_level == o.max_level &&
           raw_links == o.raw_links && eta_uncorrected == o.eta_uncorrected && n_min == o.n_min &&
           memory_budget_mb == o.memory_budget_mb && config_file == o.config_file && overrides == o.overrides;
  }

  std::uint64_t memory_budget() const { return memory_budget_mb << 20; }
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"simulate", "ensemble", "moments", "clt", "genealogy", "regime"};
  return names;
}

inline std::string subcommand_help(const std::string& name) {
  static const std::map<std::string, std::string> help = {
      {"simulate", "one trajectory as checkpoint CSV"},
      {"ensemble", "replica ensemble: survival, exponent and CLT report"},
      {"moments", "exact E[S_n], E[Sigma_n] and E[Xi_n^2] recursions"},
      {"clt", "standardized fluctuations of S_n around C*M*n^theta"},
      {"genealogy", "ancestry forest levels and clusters as JSONL"},
      {"regime", "theta, regime and limit constants for (p, beta)"},
  };
  return help.at(name);
}

// ------------------------------------------------------------- serialization

inline Json to_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["p"] = c.p;
  j["beta"] = c.beta;
  j["steps"] = c.steps;
  j["replicas"] = c.replicas;
  j["seed"] = c.seed;
  j["checkpoint-ratio"] = c.checkpoint_ratio;
  j["n-eval"] = c.n_eval ? Json(*c.n_eval) : Json(nullptr);
  j["n-ref"] = c.n_ref ? Json(*c.n_ref) : Json(nullptr);
  j["delta"] = c.delta;
  j["index-set"] = c.index_set;
  j["out"] = c.out;
  j["threads"] = c.threads;
  j["window"] = c.window;
  j["max-level"] = c.max_level;
  j["raw-links"] = c.raw_links;
  j["eta-uncorrected"] = c.eta_uncorrected;
  j["n-min"] = c.n_min;
  j["memory-budget-mb"] = c.memory_budget_mb;
  j["config-file"] = c.config_file ? Json(*c.config_file) : Json(nullptr);
  j["overrides"] = c.overrides;
  j["version"] = kVersion;
  return j;
}

namespace detail {

template <class T>
void read_key(const Json& j, const char* key, T& field) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

template <class T>
void read_key(const Json& j, const char* key, std::optional<T>& field) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    field.reset();
    return;
  }
  T value{};
  read_key(j, key, value);
  field = value;
}

inline std::vector<std::uint64_t> read_index_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open index file '" + path + "'");
  std::vector<std::uint64_t> values;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || token.front() == '-') {
      throw UsageError("index file '" + path + "': '" + token + "' is not a positive integer");
    }
    if (!values.empty() && v <= values.back()) {
      throw UsageError("index file '" + path + "' must list strictly increasing integers");
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace detail

inline RunConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  static const std::vector<std::string> known = {
      "command", "p",         "beta",      "steps",     "replicas",  "seed",          "checkpoint-ratio",
      "n-eval",  "n-ref",     "delta",     "index-set", "out",       "threads",       "window",
      "max-level", "raw-links", "eta-uncorrected", "n-min", "memory-budget-mb", "config-file", "overrides",
      "version"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  RunConfig c;
  detail::read_key(j, "command", c.command);
  detail::read_key(j, "p", c.p);
  detail::read_key(j, "beta", c.beta);
  detail::read_key(j, "steps", c.steps);
  detail::read_key(j, "replicas", c.replicas);
  detail::read_key(j, "seed", c.seed);
  detail::read_key(j, "checkpoint-ratio", c.checkpoint_ratio);
  detail::read_key(j, "n-eval", c.n_eval);
  detail::read_key(j, "n-ref", c.n_ref);
  detail::read_key(j, "delta", c.delta);
  detail::read_key(j, "index-set", c.index_set);
  detail::read_key(j, "out", c.out);
  detail::read_key(j, "threads", c.threads);
  detail::read_key(j, "window", c.window);
  detail::read_key(j, "max-level", c.max_level);
  detail::read_key(j, "raw-links", c.raw_links);
  detail::read_key(j, "eta-uncorrected", c.eta_uncorrected);
  detail::read_key(j, "n-min", c.n_min);
  detail::read_key(j, "memory-budget-mb", c.memory_budget_mb);
  detail::read_key(j, "config-file", c.config_file);
  detail::read_key(j, "overrides", c.overrides);
  return c;
}

/// Index-set spec: `all`, `arith:a,d`, `file:<path>`, `complement-file:<path>`.
/// Explicit member lists are valid up to `horizon`.
inline IndexSet parse_index_set(const std::string& spec, std::uint64_t horizon) {
  if (spec == "all") return IndexSet::all();
  if (spec.rfind("arith:", 0) == 0) {
    const std::string body = spec.substr(6);
    const auto comma = body.find(',');
    unsigned long long a = 0, d = 0;
    std::size_t ua = 0, ud = 0;
    try {
      if (comma == std::string::npos) throw std::invalid_argument("comma");
      a = std::stoull(body.substr(0, comma), &ua);
      d = std::stoull(body.substr(comma + 1), &ud);
    } catch (const std::exception&) {
      throw UsageError("index set '" + spec + "': expected arith:<first>,<step>");
    }
    if (ua != comma || ud != body.size() - comma - 1 || a < 1 || d < 1) {
      throw UsageError("index set '" + spec + "': first and step must be positive integers");
    }
    return IndexSet::arithmetic(a, d);
  }
  if (spec.rfind("file:", 0) == 0) {
    auto members = detail::read_index_file(spec.substr(5));
    if (!members.empty() && members.front() == 0) throw UsageError("index file entries must be >= 1");
    std::erase_if(members, [horizon](std::uint64_t k) { return k > horizon; });
    return IndexSet::from_members(std::move(members), horizon);
  }
  if (spec.rfind("complement-file:", 0) == 0) {
    auto excluded = detail::read_index_file(spec.substr(16));
    if (!excluded.empty() && excluded.front() == 0) throw UsageError("index file entries must be >= 1");
    return IndexSet::complement_of(std::move(excluded));
  }
  throw UsageError("index set '" + spec + "': expected all, arith:a,d, file:<path> or complement-file:<path>");
}

inline void validate(const RunConfig& c) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), c.command) == names.end()) {
    throw UsageError("unknown subcommand '" + c.command + "'");
  }
  if (!(c.p > 0.0 && c.p < 1.0)) throw UsageError("--p: p must lie in (0,1)");
  if (!(c.beta > -1.0) || !std::isfinite(c.beta)) throw UsageError("--beta: beta > -1 required");
  if (c.steps < 1) throw UsageError("--steps must be >= 1");
  if (c.replicas < 1) throw UsageError("--replicas must be >= 1");
  if (!(c.checkpoint_ratio > 1.0) || !std::isfinite(c.checkpoint_ratio)) {
    throw UsageError("--checkpoint-ratio must exceed 1");
  }
  if (!(c.delta >= 0.0 && c.delta <= 1.0)) throw UsageError("--delta must lie in [0,1]");
  if (c.threads < 1) throw UsageError("--threads must be >= 1");
  if (c.n_eval && *c.n_eval < 1) throw UsageError("--n-eval must be >= 1");
  if (c.n_ref && *c.n_ref < 1) throw UsageError("--n-ref must be >= 1");
  if (c.n_eval && c.n_ref && *c.n_ref < *c.n_eval) throw UsageError("--n-ref must be >= --n-eval");
  if (c.memory_budget_mb < 1) throw UsageError("--memory-budget-mb must be >= 1");
  if (c.out.empty()) throw UsageError("--out must not be empty");
  if (c.index_set != "all" && c.index_set.rfind("arith:", 0) != 0 && c.index_set.rfind("file:", 0) != 0 &&
      c.index_set.rfind("complement-file:", 0) != 0) {
    throw UsageError("--index-set: expected all, arith:a,d, file:<path> or complement-file:<path>");
  }
}

// --------------------------------------------------------------- parsing

/// Thrown for --help / --version; carries the text to print.
struct InfoRequest {
  std::string text;
};

/// Parses `args` (without the program name).
inline RunConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"Simulation and analysis of the unidirectional elephant random walk", "uerw"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  struct Raw {
    double p = 0, beta = 0, checkpoint_ratio = 0, delta = 0;
    std::uint64_t steps = 0, replicas = 0, seed = 0, n_eval = 0, n_ref = 0, window = 0, max_level = 0, n_min = 0,
                  memory_budget_mb = 0;
    unsigned threads = 0;
    std::string index_set, out, config;
    bool raw_links = false, eta_uncorrected = false;
  } raw;

  struct Bound {
    std::string key;
    CLI::Option* option;
  };
  std::vector<std::pair<CLI::App*, std::vector<Bound>>> bound;

  for (const auto& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name, subcommand_help(name));
    std::vector<Bound> opts;
    auto add = [&](const std::string& key, auto& target, const std::string& help) {
      opts.push_back({key, sub->add_option("--" + key, target, help)});
    };
    auto flag = [&](const std::string& key, bool& target, const std::string& help) {
      opts.push_back({key, sub->add_flag("--" + key, target, help)});
    };
    add("p", raw.p, "copy probability in (0,1)");
    add("beta", raw.beta, "memory exponent, > -1");
    if (name != "regime") {
      add("steps", raw.steps, "horizon n_max");
      add("seed", raw.seed, "master seed (64-bit)");
      add("checkpoint-ratio", raw.checkpoint_ratio, "geometric checkpoint ratio");
      add("memory-budget-mb", raw.memory_budget_mb, "per-run memory budget in MiB");
    }
    if (name == "ensemble" || name == "clt") {
      add("replicas", raw.replicas, "number of replicas");
      add("threads", raw.threads, "worker threads");
      add("delta", raw.delta, "extinction tail-probability threshold");
      add("n-eval", raw.n_eval, "CLT evaluation time");
      add("n-ref", raw.n_ref, "time whose M estimates M_inf");
      flag("eta-uncorrected", raw.eta_uncorrected, "standardize with the full-limit eta");
    }
    if (name == "ensemble") add("n-min", raw.n_min, "smallest n in the exponent regression");
    if (name == "moments") add("index-set", raw.index_set, "all | arith:a,d | file:<path> | complement-file:<path>");
    if (name == "genealogy") {
      add("window", raw.window, "surviving-cluster window (default steps/2)");
      add("max-level", raw.max_level, "deepest level emitted");
      flag("raw-links", raw.raw_links, "link every step to its drawn index");
    }
    add("out", raw.out, "output path or - for stdout");
    add("config", raw.config, "JSON config file; flags override it");
    bound.emplace_back(sub, std::move(opts));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw InfoRequest{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw InfoRequest{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::CallForVersion&) {
    throw InfoRequest{std::string(kVersion) + "\n"};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  for (auto& [sub, opts] : bound) {
    if (!sub->parsed()) continue;
    RunConfig c;
    std::string config_path;
    for (const auto& b : opts) {
      if (b.key == "config" && b.option->count() > 0) config_path = raw.config;
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot open config file '" + config_path + "'");
      Json j;
      try {
        j = Json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("config file '" + config_path + "': " + e.what());
      }
      c = config_from_json(j);
      if (!c.command.empty() && c.command != sub->get_name()) {
        throw UsageError("config file is for '" + c.command + "', not '" + sub->get_name() + "'");
      }
      c.config_file = config_path;
      c.overrides.clear();
    }
    c.command = sub->get_name();
    for (const auto& b : opts) {
      if (b.option->count() == 0 || b.key == "config") continue;
      c.overrides.push_back(b.key);
      if (b.key == "p") c.p = raw.p;
      else if (b.key == "beta") c.beta = raw.beta;
      else if (b.key == "steps") c.steps = raw.steps;
      else if (b.key == "replicas") c.replicas = raw.replicas;
      else if (b.key == "seed") c.seed = raw.seed;
      else if (b.key == "checkpoint-ratio") c.checkpoint_ratio = raw.checkpoint_ratio;
      else if (b.key == "n-eval") c.n_eval = raw.n_eval;
      else if (b.key == "n-ref") c.n_ref = raw.n_ref;
      else if (b.key == "delta") c.delta = raw.delta;
      else if (b.key == "index-set") c.index_set = raw.index_set;
      else if (b.key == "out") c.out = raw.out;
      else if (b.key == "threads") c.threads = raw.threads;
      else if (b.key == "window") c.window = raw.window;
      else if (b.key == "max-level") c.max_level = raw.max_level;
      else if (b.key == "raw-links") c.raw_links = raw.raw_links;
      else if (b.key == "eta-uncorrected") c.eta_uncorrected = raw.eta_uncorrected;
      else if (b.key == "n-min") c.n_min = raw.n_min;
      else if (b.key == "memory-budget-mb") c.memory_budget_mb = raw.memory_budget_mb;
    }
    validate(c);
    return c;
  }
  throw UsageError("a subcommand is required");
}

// ----------------------------------------------------------------- output

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Primary stream plus a sibling sink for secondary output.
class Sinks {
 public:
  Sinks(const RunConfig& c, std::ostream& out, std::ostream& err) : config_(c), out_(out), err_(err) {
    if (c.out != "-") {
      file_.open(c.out, std::ios::binary);
      if (!file_) throw UsageError("cannot open output file '" + c.out + "'");
    }
  }

  std::ostream& primary() { return config_.out == "-" ? out_ : file_; }

  void secondary(const std::string& suffix, const std::string& text) {
    if (config_.out == "-") {
      err_ << text;
      return;
    }
    std::ofstream f(config_.out + suffix, std::ios::binary);
    if (!f) throw UsageError("cannot open output file '" + config_.out + suffix + "'");
    f << text;
  }

  void finish() {
    primary().flush();
    if (!primary()) throw ResourceError("failed writing output");
  }

 private:
  const RunConfig& config_;
  std::ostream& out_;
  std::ostream& err_;
  std::ofstream file_;
};

/// Resolved config as embedded in outputs. The thread budget does not affect
/// results, so it is left out to keep outputs byte-identical across budgets.
inline Json provenance_json(const RunConfig& c) {
  Json j = to_json(c);
  j.erase("threads");
  auto& ov = j["overrides"];
  for (auto it = ov.begin(); it != ov.end();) it = (*it == "threads") ? ov.erase(it) : it + 1;
  return j;
}

inline Json interval_json(const Interval& i) { return Json{{"point", i.point}, {"lower", i.lower}, {"upper", i.upper}}; }

inline Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

inline Json regime_json(const ModelParams& params) {
  Json j;
  j["p"] = params.p();
  j["beta"] = params.beta();
  j["regime"] = std::string(regime_name(params.regime()));
  j["theta"] = params.theta();
  j["critical_beta"] = params.critical_beta();
  if (params.theta() > 0.0) {
    j["C"] = big_C(params);
    j["eta_coefficient"] = eta_coefficient(params);
  } else {
    j["C"] = nullptr;
    j["eta_coefficient"] = nullptr;
  }
  return j;
}

inline Json report_json(const EnsembleReport& rep) {
  Json j;
  j["regime"] = regime_json(rep.params);
  j["replicas"] = rep.replicas;
  j["seed"] = rep.seed;
  j["n_max"] = rep.n_max;
  j["delta"] = rep.delta;
  j["counts"] = {{"surviving", rep.surviving}, {"extinct", rep.extinct}, {"undecided", rep.undecided}};
  j["survival_fraction"] = rep.survival ? detail::interval_json(*rep.survival) : Json(nullptr);
  if (rep.exponent) {
    j["exponent"] = {{"theta_hat", detail::interval_json(rep.exponent->theta)},
                     {"replicas", rep.exponent->replicas},
                     {"points_per_replica", rep.exponent->points_per_replica}};
  } else {
    j["exponent"] = nullptr;
  }
  if (rep.clt) {
    j["clt"] = {{"n_eval", rep.clt->n_eval},
                {"n_ref", rep.clt->n_ref},
                {"sample_size", rep.clt->z.size()},
                {"excluded_zero_eta", rep.clt->excluded_zero_eta},
                {"excluded_class", rep.clt->excluded_class},
                {"ks", detail::nullable(rep.clt->ks)}};
  } else {
    j["clt"] = nullptr;
  }
  Json cps = Json::array();
  for (const auto& st : rep.checkpoints) {
    cps.push_back({{"n", st.n},
                   {"mean_S", st.mean_s},
                   {"mean_Sigma", st.mean_sigma},
                   {"mean_M", st.mean_m},
                   {"se_M", st.se_m},
                   {"S_q10", st.s_q10},
                   {"S_q50", st.s_q50},
                   {"S_q90", st.s_q90}});
  }
  j["checkpoints"] = std::move(cps);
  return j;
}

// --------------------------------------------------------------- commands

namespace detail {

inline int cmd_regime(const RunConfig& c, Sinks& sinks) {
  const ModelParams params(c.p, c.beta);
  Json j = regime_json(params);
  j["config"] = provenance_json(c);
  sinks.primary() << j.dump(2) << "\n";
  return 0;
}

inline int cmd_simulate(const RunConfig& c, Sinks& sinks) {
  const ModelParams params(c.p, c.beta);
  const auto grid = CheckpointGrid::geometric(c.steps, c.checkpoint_ratio);
  const Trajectory traj = simulate(params, c.steps, c.seed, grid, false, 0, c.memory_budget());
  std::ostream& os = sinks.primary();
  os << "n,S,Sigma,M\n";
  for (const auto& cp : traj.checkpoints()) {
    os << cp.n << ',' << cp.s << ',' << fmt(cp.sigma) << ',' << fmt(cp.m) << '\n';
  }
  sinks.secondary(".config.json", provenance_json(c).dump(2) + "\n");
  return 0;
}

inline EnsembleOptions ensemble_options(const RunConfig& c) {
  EnsembleOptions o;
  o.checkpoint_ratio = c.checkpoint_ratio;
  o.delta = c.delta;
  o.threads = c.threads;
  o.n_min = c.n_min;
  o.n_eval = c.n_eval;
  o.n_ref = c.n_ref;
  o.truncation_correction = !c.eta_uncorrected;
  o.memory_budget = c.memory_budget();
  return o;
}

inline int cmd_ensemble(const RunConfig& c, Sinks& sinks) {
  const ModelParams params(c.p, c.beta);
  const EnsembleOptions o = ensemble_options(c);
  if (c.n_eval && *c.n_eval > c.steps) throw UsageError("--n-eval exceeds --steps");
  if (c.n_ref && *c.n_ref > c.steps) throw UsageError("--n-ref exceeds --steps");
  const EnsembleReport rep = run_ensemble(params, c.steps, c.replicas, c.seed, o);
  Json j = report_json(rep);
  j["config"] = provenance_json(c);
  sinks.primary() << j.dump(2) << "\n";
  std::ostringstream csv;
  csv << "n,mean_S,mean_Sigma,mean_M,se_M,S_q10,S_q50,S_q90\n";
  for (const auto& st : rep.checkpoints) {
    csv << st.n << ',' << fmt(st.mean_s) << ',' << fmt(st.mean_sigma) << ',' << fmt(st.mean_m) << ','
        << fmt(st.se_m) << ',' << fmt(st.s_q10) << ',' << fmt(st.s_q50) << ',' << fmt(st.s_q90) << '\n';
  }
  sinks.secondary(".csv", csv.str());
  return 0;
}

inline int cmd_moments(const RunConfig& c, Sinks& sinks) {
  const ModelParams params(c.p, c.beta);
  const IndexSet set = parse_index_set(c.index_set, c.steps);
  const auto grid = CheckpointGrid::geometric(c.steps, c.checkpoint_ratio);
  const MomentSeries series = exact_moments(params, set, c.steps, grid);
  std::ostream& os = sinks.primary();
  os << "n,E_S,E_Sigma,E_Xi2,ratio\n";
  for (const auto& pt : series.points) {
    os << pt.n << ',' << fmt(pt.e_s) << ',' << fmt(pt.e_xi) << ',' << fmt(pt.e_xi2) << ',' << fmt(pt.ratio) << '\n';
  }
  sinks.secondary(".config.json", provenance_json(c).dump(2) + "\n");
  return 0;
}

inline int cmd_clt(const RunConfig& c, Sinks& sinks) {
  const ModelParams params(c.p, c.beta);
  if (!(params.theta() > 0.0)) throw DomainError("clt requires theta > 0 (beta < p/(1-p))");
  const std::uint64_t n_eval = c.n_eval.value_or(std::max<std::uint64_t>(1, c.steps / 4));
  const std::uint64_t n_ref = c.n_ref.value_or(4 * n_eval);
  if (n_ref < n_eval) throw UsageError("--n-ref must be >= --n-eval");
  EnsembleOptions o = ensemble_options(c);
  o.n_eval = n_eval;
  o.n_ref = n_ref;
  const std::uint64_t horizon = std::max(c.steps, n_ref);
  const Ensemble ens = run_replicas(params, horizon, c.replicas, c.seed, o);
  const CltSample sample = clt_sample(ens, n_eval, n_ref, CltOptions{!c.eta_uncorrected});
  std::ostream& os = sinks.primary();
  os << "replica,Z,W_scaled\n";
  for (std::size_t i = 0; i < sample.z.size(); ++i) {
    os << sample.replica_ids[i] << ',' << fmt(sample.z[i]) << ',' << fmt(sample.unstandardized[i]) << '\n';
  }
  Json summary;
  summary["n_eval"] = n_eval;
  summary["n_ref"] = n_ref;
  summary["horizon"] = horizon;
  summary["sample_size"] = sample.z.size();
  summary["excluded_zero_eta"] = sample.excluded_zero_eta;
  summary["excluded_class"] = sample.excluded_class;
  summary["ks"] = nullable(sample.ks);
  summary["regime"] = regime_json(params);
  summary["config"] = provenance_json(c);
  sinks.secondary(".summary.json", summary.dump(2) + "\n");
  return 0;
}

inline int cmd_genealogy(const RunConfig& c, Sinks& sinks) {
  const ModelParams params(c.p, c.beta);
  if (c.steps < 2) throw UsageError("genealogy needs --steps >= 2");
  const auto grid = CheckpointGrid::geometric(c.steps, c.checkpoint_ratio);
  const Trajectory traj = simulate(params, c.steps, c.seed, grid, true, 0, c.memory_budget());
  const AncestryForest forest = build_forest(traj, c.raw_links ? LinkMode::kRawDraw : LinkMode::kEffective);
  const std::uint64_t window = c.window == 0 ? c.steps / 2 : c.window;
  if (window >= c.steps) throw UsageError("--window must be < --steps");
  std::ostream& os = sinks.primary();
  Json levels = Json::array();
  const std::size_t deepest = std::min<std::uint64_t>(c.max_level, forest.level_count() - 1);
  for (std::size_t m = 0; m <= deepest; ++m) {
    const auto& gen = forest.generation(m);
    for (std::size_t j = 1; j <= gen.size(); ++j) {
      const auto growth = cluster_growth_profile(forest, m, j, grid.points());
      Json rec;
      rec["level"] = m;
      rec["root"] = gen[j - 1];
      rec["size"] = cluster(forest, m, j, forest.horizon()).size();
      rec["growth"] = growth;
      os << rec.dump() << '\n';
    }
    levels.push_back({{"level", m},
                      {"count", gen.size()},
                      {"surviving_clusters", surviving_cluster_count(forest, m, c.steps, window)}});
  }
  Json summary;
  summary["horizon"] = c.steps;
  summary["S"] = traj.s();
  summary["link_mode"] = c.raw_links ? "raw" : "effective";
  summary["level_count"] = forest.level_count();
  summary["window"] = window;
  summary["decomposition_check"] = decomposition_check(forest, c.steps);
  summary["levels"] = std::move(levels);
  summary["config"] = provenance_json(c);
  sinks.secondary(".summary.json", summary.dump(2) + "\n");
  return 0;
}

}  // namespace detail

/// Runs a validated config.
inline int dispatch(const RunConfig& c, std::ostream& out, std::ostream& err) {
  validate(c);
  detail::Sinks sinks(c, out, err);
  int code = 0;
  if (c.command == "regime") code = detail::cmd_regime(c, sinks);
  else if (c.command == "simulate") code = detail::cmd_simulate(c, sinks);
  else if (c.command == "ensemble") code = detail::cmd_ensemble(c, sinks);
  else if (c.command == "moments") code = detail::cmd_moments(c, sinks);
  else if (c.command == "clt") code = detail::cmd_clt(c, sinks);
  else if (c.command == "genealogy") code = detail::cmd_genealogy(c, sinks);
  sinks.finish();
  return code;
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const ResourceError*>(&e) || dynamic_cast<const std::bad_alloc*>(&e)) return 3;
  return 2;
}

/// Parses and runs; never throws.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig c = parse_config(args);
    return dispatch(c, out, err);
  } catch (const InfoRequest& info) {
    out << info.text;
    return 0;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "uerw: " << e.what() << "\n";
    return code;
  }
}

}  // namespace uerw::cli
