#pragma once

// Experiment harness behind the `graphfpe` command line tool: config parsing and
// validation, command orchestration, and byte-stable JSON/CSV output.
//
// Requires nlohmann/json and OpenSSL (SHA-256 of the canonical config).

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "graphfpe/graphfpe.hpp"

namespace graphfpe::harness {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Process exit codes.
enum ExitCode : int { kOk = 0, kConfigError = 2, kNoConvergence = 3, kPrecondition = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Output formatting
// ---------------------------------------------------------------------------

/// Fixed 17-significant-digit rendering; non-finite values become null in JSON.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline void write_json(std::ostringstream& out, const json& value, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  switch (value.type()) {
    case json::value_t::object: {
      if (value.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out << ",\n";
        first = false;
        out << pad << json(it.key()).dump() << ": ";
        write_json(out, it.value(), indent + 2);
      }
      out << "\n" << close << "}";
      return;
    }
    case json::value_t::array: {
      if (value.empty()) {
        out << "[]";
        return;
      }
      const bool flat = std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_primitive(); });
      if (flat) {
        out << "[";
        for (std::size_t k = 0; k < value.size(); ++k) {
          if (k) out << ", ";
          write_json(out, value[k], indent);
        }
        out << "]";
        return;
      }
      out << "[\n";
      for (std::size_t k = 0; k < value.size(); ++k) {
        if (k) out << ",\n";
        out << pad;
        write_json(out, value[k], indent + 2);
      }
      out << "\n" << close << "]";
      return;
    }
    case json::value_t::number_float: {
      const double x = value.get<double>();
      out << (std::isfinite(x) ? format_double(x) : "null");
      return;
    }
    default:
      out << value.dump();
  }
}

}  // namespace detail

/// Pretty JSON with sorted keys and fixed float formatting.
inline std::string to_json_text(const json& value) {
  std::ostringstream out;
  detail::write_json(out, value, 0);
  out << "\n";
  return out.str();
}

inline std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < length; ++k) {
    out.push_back(kHex[digest[k] >> 4]);
    out.push_back(kHex[digest[k] & 0xF]);
  }
  return out;
}

/// Digest of the canonical (sorted-key, compact) config text.
inline std::string config_digest(const json& config) { return sha256_hex(config.dump()); }

inline json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Config validation
// ---------------------------------------------------------------------------

namespace detail {

inline void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError("unknown key \"" + where + (where.empty() ? "" : ".") + it.key() + "\"");
}

inline double number(const json& obj, const std::string& key, const std::string& where, std::optional<double> fallback) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing key \"" + where + "." + key + "\"");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("key \"" + where + "." + key + "\" must be a number");
  return v.get<double>();
}

inline long integer(const json& obj, const std::string& key, const std::string& where, std::optional<long> fallback) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing key \"" + where + "." + key + "\"");
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError("key \"" + where + "." + key + "\" must be an integer");
  return v.get<long>();
}

inline bool boolean(const json& obj, const std::string& key, const std::string& where, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError("key \"" + where + "." + key + "\" must be a boolean");
  return v.get<bool>();
}

inline Vector vector_of(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError("key \"" + where + "\" must be an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) throw ConfigError("key \"" + where + "\" must be an array of numbers");
    out(static_cast<Eigen::Index>(k)) = v[k].get<double>();
  }
  return out;
}

inline json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace detail

/// Graph file schema: {"n": int, "edges": [[i, j, w], ...]} with 1-based ids.
struct GraphSpec {
  Graph graph;
  std::vector<bool> flipped;  // edge k given as (j, i) with j > i in the file
};

inline GraphSpec parse_graph(const json& spec) {
  detail::only_keys(spec, "graph", {"n", "edges"});
  const long n = detail::integer(spec, "n", "graph", std::nullopt);
  if (!spec.contains("edges") || !spec.at("edges").is_array()) throw ConfigError("key \"graph.edges\" must be an array");
  std::vector<Edge> edges;
  std::vector<bool> flipped;
  for (const json& e : spec.at("edges")) {
    if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer() || !e[2].is_number())
      throw ConfigError("key \"graph.edges\" entries must be [i, j, weight] with integer ids");
    const int i = e[0].get<int>() - 1, j = e[1].get<int>() - 1;
    edges.push_back({i, j, e[2].get<double>()});
    flipped.push_back(i > j);
  }
  try {
    return {Graph(static_cast<int>(n), edges), std::move(flipped)};
  } catch (const Error& err) {
    throw ConfigError(std::string("graph: ") + err.what());
  }
}

/// Model file schema: {"beta": real, "V": [...], "W": [[...], ...]}; V and W default to zero.
inline EnergyModel parse_model(const json& spec, int n) {
  detail::only_keys(spec, "model", {"beta", "V", "W"});
  const double beta = detail::number(spec, "beta", "model", std::nullopt);
  Vector v = spec.contains("V") ? detail::vector_of(spec.at("V"), "model.V") : Vector::Zero(n);
  Matrix w = Matrix::Zero(n, n);
  if (spec.contains("W")) {
    const json& rows = spec.at("W");
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(n))
      throw ConfigError("key \"model.W\" must be an n x n array");
    for (int i = 0; i < n; ++i) {
      const Vector row = detail::vector_of(rows[static_cast<std::size_t>(i)], "model.W");
      if (row.size() != n) throw ConfigError("key \"model.W\" must be an n x n array");
      w.row(i) = row.transpose();
    }
  }
  if (v.size() != n) throw ConfigError("key \"model.V\" must have length n");
  try {
    const bool symmetric = max_abs(w - w.transpose()) <= 1e-12 * std::max(1.0, max_abs(w));
    return symmetric ? EnergyModel(w, v, beta) : EnergyModel::nonsymmetric(w, v, beta);
  } catch (const Error& err) {
    throw ConfigError(std::string("model: ") + err.what());
  }
}

inline Density parse_density(const json& v, const std::string& where, int n) {
  const Vector x = detail::vector_of(v, where);
  if (x.size() != n) throw ConfigError("key \"" + where + "\" must have length n");
  try {
    return Density(x);
  } catch (const Error& err) {
    throw ConfigError("key \"" + where + "\": " + err.what());
  }
}

/// Validated experiment configuration.
struct ExperimentConfig {
  json raw;  // as parsed, with file references resolved
  GraphSpec graph;
  std::optional<EnergyModel> model;
  std::optional<Density> initial;
  GibbsOptions gibbs;
  std::vector<Density> gibbs_starts;
  bool multistart = false;
  json simulate = json::object();
  json rates = json::object();
  json lsi = json::object();
  json w2 = json::object();
  json decompose = json::object();
};

inline ExperimentConfig parse_config(const json& input, const fs::path& base_dir) {
  detail::only_keys(input, "", {"graph", "model", "initial", "gibbs", "simulate", "rates", "lsi", "w2", "decompose"});
  if (!input.contains("graph")) throw ConfigError("missing key \"graph\"");
  json graph = input.at("graph");
  if (graph.is_string()) graph = detail::load_json_file(base_dir / graph.get<std::string>());
  ExperimentConfig cfg{input, parse_graph(graph)};
  cfg.raw["graph"] = graph;
  const int n = cfg.graph.graph.node_count();

  if (input.contains("model")) {
    json model = input.at("model");
    if (model.is_string()) model = detail::load_json_file(base_dir / model.get<std::string>());
    cfg.raw["model"] = model;
    cfg.model = parse_model(model, n);
  }
  if (input.contains("initial")) cfg.initial = parse_density(input.at("initial"), "initial", n);

  if (input.contains("gibbs")) {
    const json& g = input.at("gibbs");
    detail::only_keys(g, "gibbs", {"tol", "max_iter", "damping", "starts", "multistart"});
    cfg.gibbs.tol = detail::number(g, "tol", "gibbs", 1e-12);
    cfg.gibbs.max_iter = static_cast<int>(detail::integer(g, "max_iter", "gibbs", 100000));
    cfg.gibbs.damping = detail::number(g, "damping", "gibbs", 0.5);
    if (!(cfg.gibbs.tol > 0.0)) throw ConfigError("key \"gibbs.tol\" must be positive");
    if (!(cfg.gibbs.damping > 0.0 && cfg.gibbs.damping <= 1.0)) throw ConfigError("key \"gibbs.damping\" must lie in (0, 1]");
    if (g.contains("starts")) {
      if (!g.at("starts").is_array()) throw ConfigError("key \"gibbs.starts\" must be an array of densities");
      for (const json& s : g.at("starts")) cfg.gibbs_starts.push_back(parse_density(s, "gibbs.starts", n));
    }
    cfg.multistart = detail::boolean(g, "multistart", "gibbs", !cfg.gibbs_starts.empty());
  }
  if (input.contains("simulate")) {
    cfg.simulate = input.at("simulate");
    detail::only_keys(cfg.simulate, "simulate",
                      {"t_end", "rel_tol", "abs_tol", "max_step", "record_every", "positivity_guard"});
  }
  if (input.contains("rates")) {
    cfg.rates = input.at("rates");
    detail::only_keys(cfg.rates, "rates", {"theorem4", "equilibria", "trajectory"});
  }
  if (input.contains("lsi")) {
    cfg.lsi = input.at("lsi");
    detail::only_keys(cfg.lsi, "lsi", {"count", "seed", "min_mass"});
  }
  if (input.contains("w2")) {
    cfg.w2 = input.at("w2");
    detail::only_keys(cfg.w2, "w2", {"rho0", "rho1", "K", "max_iters", "grad_tol", "step_init", "dump_path", "triples", "tol"});
  }
  if (input.contains("decompose")) {
    cfg.decompose = input.at("decompose");
    detail::only_keys(cfg.decompose, "decompose", {"rho", "field", "potential"});
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct RunOptions {
  fs::path out_dir = ".";
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool equilibrium = false;  // rates: per-equilibrium local rates, no global constant
  bool timing = false;       // simulate: add wall time to the summary
};

namespace detail {

inline json header(const ExperimentConfig& cfg, const std::string& command) {
  return json{{"command", command}, {"config_digest", config_digest(cfg.raw)}, {"version", kVersion}};
}

inline const EnergyModel& require_model(const ExperimentConfig& cfg) {
  if (!cfg.model) throw ConfigError("missing key \"model\"");
  return *cfg.model;
}

inline const Density& require_initial(const ExperimentConfig& cfg) {
  if (!cfg.initial) throw ConfigError("missing key \"initial\"");
  return *cfg.initial;
}

inline json gibbs_json(const EnergyModel& model, const GibbsResult& r) {
  return json{{"density", to_json(r.density.values())}, {"K", r.normalizer}, {"iterations", r.iterations},
              {"residual", r.residual}, {"converged", r.converged}, {"energy", energy(model, r.density)}};
}

inline std::vector<Density> starts_for(const ExperimentConfig& cfg) {
  return cfg.gibbs_starts.empty() ? default_starts(cfg.graph.graph.node_count()) : cfg.gibbs_starts;
}

/// Local rates at one equilibrium; rates that do not apply are null.
inline json local_rates_json(const EnergyModel& model, const Graph& g, const GibbsResult& eq) {
  json out = gibbs_json(model, eq);
  out["lambda_asymptotic"] = nullptr;
  out["lambda_fisher"] = nullptr;
  if (model.symmetric()) {
    // Tangent-restricted rate; meaningful even when Hess F is indefinite off the tangent space.
    const double local = hessian_quadratic_rate(model, g, eq.density);
    out["lambda_local"] = local;
    out["stable"] = local > 0.0;
    try {
      out["lambda_asymptotic"] = asymptotic_rate(model, g, eq.density);
    } catch (const Error& e) {
      out["lambda_asymptotic_error"] = std::string(to_string(e.code()));
    }
  }
  try {
    out["lambda_fisher"] = fisher_rate(model, g, eq.density);
  } catch (const Error& e) {
    out["lambda_fisher_error"] = std::string(to_string(e.code()));
  }
  return out;
}

inline std::string csv_header(int n) {
  std::string h = "t";
  for (int i = 1; i <= n; ++i) h += ",rho_" + std::to_string(i);
  return h + ",energy,dissipation\n";
}

inline std::string trajectory_csv(const Trajectory& traj) {
  const int n = traj.densities.empty() ? 0 : static_cast<int>(traj.densities.front().size());
  std::string out = csv_header(n);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out += format_double(traj.times[k]);
    for (int i = 0; i < n; ++i) out += "," + format_double(traj.densities[k][i]);
    out += "," + format_double(traj.energy[k]) + "," + format_double(traj.dissipation[k]) + "\n";
  }
  return out;
}

struct CsvSeries {
  std::vector<double> times;
  std::vector<double> energy;
};

inline CsvSeries read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  if (cols.size() < 4 || cols.front() != "t" || cols[cols.size() - 2] != "energy")
    throw ConfigError("trajectory " + path.string() + " has an unexpected header");
  CsvSeries out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) vals.push_back(std::stod(c));
    if (vals.size() != cols.size()) throw ConfigError("trajectory " + path.string() + " has a ragged row");
    out.times.push_back(vals.front());
    out.energy.push_back(vals[vals.size() - 2]);
  }
  return out;
}

}  // namespace detail

inline int cmd_gibbs(const ExperimentConfig& cfg, const RunOptions& opts) {
  const EnergyModel& model = detail::require_model(cfg);
  const int n = cfg.graph.graph.node_count();
  json out = detail::header(cfg, "gibbs");
  int code = kOk;
  const Density init = cfg.gibbs_starts.empty() ? Density::uniform(n) : cfg.gibbs_starts.front();
  try {
    const GibbsResult r = gibbs_fixed_point(model, init, cfg.gibbs);
    out.update(detail::gibbs_json(model, r));
  } catch (const IncompleteError<GibbsResult>& e) {
    spdlog::warn("Gibbs iteration did not converge: {}", e.what());
    out.update(detail::gibbs_json(model, e.partial()));
    code = kNoConvergence;
  }
  if (cfg.multistart) {
    const EquilibriumSet set = find_all_equilibria(model, detail::starts_for(cfg), cfg.gibbs);
    json eqs = json::array();
    for (const GibbsResult& r : set.equilibria) eqs.push_back(detail::gibbs_json(model, r));
    out["equilibria"] = eqs;
    out["failed_starts"] = set.failed_starts;
  }
  write_text(opts.out_dir / "gibbs.json", to_json_text(out));
  return code;
}

inline int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opts) {
  const EnergyModel& model = detail::require_model(cfg);
  const Density& rho0 = detail::require_initial(cfg);
  const Graph& g = cfg.graph.graph;
  const json& s = cfg.simulate;
  const double t_end = detail::number(s, "t_end", "simulate", std::nullopt);
  IntegrateOptions io;
  io.rel_tol = detail::number(s, "rel_tol", "simulate", io.rel_tol);
  io.abs_tol = detail::number(s, "abs_tol", "simulate", io.abs_tol);
  io.max_step = detail::number(s, "max_step", "simulate", 1e300);
  io.record_every = static_cast<int>(detail::integer(s, "record_every", "simulate", 1));
  io.positivity_guard = detail::boolean(s, "positivity_guard", "simulate", true);
  if (!(t_end > 0.0)) throw ConfigError("key \"simulate.t_end\" must be positive");
  if (io.record_every < 0) throw ConfigError("key \"simulate.record_every\" must be nonnegative");

  json summary = detail::header(cfg, "simulate");
  const auto started = std::chrono::steady_clock::now();
  Trajectory traj;
  int code = kOk;
  try {
    traj = integrate(model, g, rho0, t_end, io);
    summary["completed"] = true;
  } catch (const IncompleteError<Trajectory>& e) {
    spdlog::error("integration stopped: {}", e.what());
    traj = e.partial();
    summary["completed"] = false;
    summary["error"] = e.what();
    code = kNoConvergence;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const Density& last = traj.final_density();
  summary["final_time"] = traj.times.back();
  summary["final_density"] = to_json(last.values());
  summary["final_energy"] = traj.energy.back();
  summary["relative_fisher"] = relative_fisher(model, g, last);
  summary["relative_entropy"] = nullptr;
  if (model.symmetric()) {
    try {
      const GibbsResult eq = gibbs_fixed_point(model, Density::uniform(g.node_count()), cfg.gibbs);
      summary["rho_inf"] = to_json(eq.density.values());
      summary["relative_entropy"] = relative_entropy(model, last, eq.density);
    } catch (const Error& e) {
      spdlog::warn("no Gibbs reference for the summary: {}", e.what());
    }
  }
  summary["positivity_floor"] = traj.floor;
  summary["records"] = traj.size();
  summary["steps"] = json{{"accepted", traj.stats.accepted},
                          {"rejected_error", traj.stats.rejected_error},
                          {"rejected_positivity", traj.stats.rejected_positivity},
                          {"rejected_energy", traj.stats.rejected_energy},
                          {"rhs_evaluations", traj.stats.rhs_evaluations}};
  if (opts.timing) summary["wall_time_s"] = wall;
  write_text(opts.out_dir / "trajectory.csv", detail::trajectory_csv(traj));
  write_text(opts.out_dir / "summary.json", to_json_text(summary));
  return code;
}

inline int cmd_rates(const ExperimentConfig& cfg, const RunOptions& opts, const fs::path& base_dir) {
  const EnergyModel& model = detail::require_model(cfg);
  const Graph& g = cfg.graph.graph;
  const int n = g.node_count();
  const bool theorem4 = !opts.equilibrium && detail::boolean(cfg.rates, "theorem4", "rates", true);
  json out = detail::header(cfg, "rates");
  out["graph_digest"] = sha256_hex(cfg.raw.at("graph").dump());
  out["model_digest"] = sha256_hex(cfg.raw.at("model").dump());
  int code = kOk;

  if (model.symmetric()) {
    const ConvexityCertificate cert = convexity_certificate(model);
    out["certified_convex"] = cert.certified_convex;
    out["lambda_min_bound"] = cert.lambda_min_bound;
  } else {
    out["certified_convex"] = false;
    out["symmetric_W"] = false;
  }

  if (theorem4) {
    try {
      const RateReport rep = rate_constants(model, g, detail::require_initial(cfg), RateOptions{cfg.gibbs});
      out["theorem4"] = json{{"m", rep.m},
                             {"lambda_sec_hat", rep.lambda_sec_hat},
                             {"lambda_max_hat", rep.lambda_max_hat},
                             {"lambda_min_hess", rep.lambda_min_hess},
                             {"hess_norm1", rep.hess_norm1},
                             {"hess_norm1_domain", "invariant region {rho_i >= m}: ||W||_1 + beta/m"},
                             {"delta_F", rep.delta_F},
                             {"C1", rep.C1},
                             {"C2", rep.C2},
                             {"C3", rep.C3},
                             {"r", rep.r},
                             {"C", rep.C},
                             {"x_star", rep.x_star},
                             {"maxmin_rate", rep.maxmin_rate},
                             {"max_degree", rep.max_degree},
                             {"max_weight", rep.max_weight}};
      out["rho_inf"] = to_json(rep.rho_inf.values());
      out["lambda_asymptotic"] = asymptotic_rate(model, g, rep.rho_inf);
      out["lambda_fisher"] = fisher_rate(model, g, rep.rho_inf);

      if (cfg.rates.contains("trajectory")) {
        if (!cfg.rates.at("trajectory").is_string()) throw ConfigError("key \"rates.trajectory\" must be a path");
        const auto series = detail::read_trajectory_csv(base_dir / cfg.rates.at("trajectory").get<std::string>());
        const DecayCheck check = verify_decay_bound(series.times, series.energy, rep.C, rep.delta_F, rep.energy_inf);
        std::vector<double> gaps;
        for (double e : series.energy) gaps.push_back(e - rep.energy_inf);
        const auto slope = tail_log_slope(series.times, gaps);
        out["comparison"] = json{{"bound_holds", check.holds},
                                 {"max_violation", check.max_violation},
                                 {"observed_tail_slope", slope ? json(*slope) : json(nullptr)},
                                 {"predicted_tail_slope", -2.0 * out["lambda_asymptotic"].get<double>()}};
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoConvergence) throw;
      spdlog::error("global rate unavailable: {}", e.what());
      out["theorem4"] = nullptr;
      out["theorem4_error"] = e.what();
      code = kPrecondition;
    }
  }

  // Local rates at supplied equilibria, or at every equilibrium found by multi-start.
  std::vector<Density> eq_starts;
  if (cfg.rates.contains("equilibria")) {
    if (!cfg.rates.at("equilibria").is_array()) throw ConfigError("key \"rates.equilibria\" must be an array");
    for (const json& e : cfg.rates.at("equilibria")) eq_starts.push_back(parse_density(e, "rates.equilibria", n));
  } else if (opts.equilibrium) {
    eq_starts = detail::starts_for(cfg);
  }
  if (!eq_starts.empty()) {
    const EquilibriumSet set = find_all_equilibria(model, eq_starts, cfg.gibbs);
    json eqs = json::array();
    for (const GibbsResult& r : set.equilibria) eqs.push_back(detail::local_rates_json(model, g, r));
    out["equilibria"] = eqs;
    out["failed_starts"] = set.failed_starts;
  }
  write_text(opts.out_dir / "rates.json", to_json_text(out));
  return code;
}

inline int cmd_lsi(const ExperimentConfig& cfg, const RunOptions& opts) {
  const EnergyModel& model = detail::require_model(cfg);
  const Graph& g = cfg.graph.graph;
  LsiSampler sampler;
  sampler.count = detail::integer(cfg.lsi, "count", "lsi", 10000);
  sampler.seed = static_cast<std::uint64_t>(detail::integer(cfg.lsi, "seed", "lsi", 1));
  sampler.min_mass = detail::number(cfg.lsi, "min_mass", "lsi", 1e-4);
  if (opts.seed) sampler.seed = *opts.seed;
  sampler.jobs = opts.jobs;
  if (sampler.count <= 0) throw ConfigError("key \"lsi.count\" must be positive");

  const ConvexityCertificate cert = convexity_certificate(model);
  if (!cert.certified_convex) throw Error(ErrorCode::NotCertifiedConvex, "log-Sobolev estimate needs a certified-convex model");
  const GibbsResult eq = gibbs_fixed_point(model, Density::uniform(g.node_count()), cfg.gibbs);
  const LsiEstimate est = estimate_lsi_constant(model, g, eq.density, sampler);
  json out = detail::header(cfg, "lsi");
  out.update(json{{"lambda_hat", est.lambda_hat},
                  {"sample_min", est.sample_min},
                  {"local_limit", est.local_limit},
                  {"worst_density", to_json(est.worst_density.values())},
                  {"retained", est.retained},
                  {"rejected_min_mass", est.rejected_min_mass},
                  {"excluded_small_entropy", est.excluded_small_entropy},
                  {"count", sampler.count},
                  {"seed", sampler.seed},
                  {"min_mass", sampler.min_mass},
                  {"rho_inf", to_json(eq.density.values())}});
  write_text(opts.out_dir / "lsi.json", to_json_text(out));
  return kOk;
}

inline int cmd_w2(const ExperimentConfig& cfg, const RunOptions& opts) {
  const Graph& g = cfg.graph.graph;
  const int n = g.node_count();
  const json& w = cfg.w2;
  W2Options wo;
  wo.K = static_cast<int>(detail::integer(w, "K", "w2", wo.K));
  wo.max_iters = static_cast<int>(detail::integer(w, "max_iters", "w2", wo.max_iters));
  wo.grad_tol = detail::number(w, "grad_tol", "w2", wo.grad_tol);
  wo.step_init = detail::number(w, "step_init", "w2", wo.step_init);
  if (wo.K < 1) throw ConfigError("key \"w2.K\" must be at least 1");
  const double tol = detail::number(w, "tol", "w2", 1e-3);

  json out = detail::header(cfg, "w2");
  int code = kOk;
  if (w.contains("rho0") || w.contains("rho1")) {
    if (!w.contains("rho0") || !w.contains("rho1")) throw ConfigError("keys \"w2.rho0\" and \"w2.rho1\" go together");
    const Density a = parse_density(w.at("rho0"), "w2.rho0", n);
    const Density b = parse_density(w.at("rho1"), "w2.rho1", n);
    const W2Result r = w2_distance(g, a, b, wo);
    out.update(json{{"distance", r.distance}, {"action", r.path.action}, {"converged", r.converged},
                    {"iterations", r.iterations}, {"grad_norm", r.grad_norm}, {"K", wo.K}});
    if (!r.converged) code = kNoConvergence;
    if (detail::boolean(w, "dump_path", "w2", false)) {
      std::string csv = "k,t";
      for (int i = 1; i <= n; ++i) csv += ",rho_" + std::to_string(i);
      csv += "\n";
      for (int k = 0; k <= r.path.segments(); ++k) {
        csv += std::to_string(k) + "," + format_double(static_cast<double>(k) / wo.K);
        for (int i = 0; i < n; ++i) csv += "," + format_double(r.path.densities[static_cast<std::size_t>(k)][i]);
        csv += "\n";
      }
      write_text(opts.out_dir / "w2_path.csv", csv);
    }
  }
  if (w.contains("triples")) {
    if (!w.at("triples").is_array()) throw ConfigError("key \"w2.triples\" must be an array of [a, b, c]");
    std::vector<DensityTriple> triples;
    for (const json& t : w.at("triples")) {
      if (!t.is_array() || t.size() != 3) throw ConfigError("key \"w2.triples\" entries must be [a, b, c]");
      triples.push_back({parse_density(t[0], "w2.triples", n), parse_density(t[1], "w2.triples", n),
                         parse_density(t[2], "w2.triples", n)});
    }
    const W2MetricReport rep = w2_metric_checks(g, triples, wo, tol, opts.jobs);
    json checks = json::array();
    for (const W2TripleCheck& c : rep.triples)
      checks.push_back(json{{"d_ab", c.d_ab}, {"d_ba", c.d_ba}, {"d_bc", c.d_bc}, {"d_ac", c.d_ac},
                            {"symmetric", c.symmetric}, {"triangle", c.triangle}, {"converged", c.converged}});
    out["metric_checks"] = checks;
    out["metric_checks_pass"] = rep.all_pass;
  }
  if (!w.contains("rho0") && !w.contains("triples")) throw ConfigError("w2 needs \"w2.rho0\"/\"w2.rho1\" or \"w2.triples\"");
  write_text(opts.out_dir / "w2.json", to_json_text(out));
  return code;
}

inline int cmd_decompose(const ExperimentConfig& cfg, const RunOptions& opts) {
  const Graph& g = cfg.graph.graph;
  const int n = g.node_count();
  const json& d = cfg.decompose;
  if (!d.contains("rho")) throw ConfigError("missing key \"decompose.rho\"");
  const Density rho = parse_density(d.at("rho"), "decompose.rho", n);
  const Eigen::Index m = static_cast<Eigen::Index>(g.edge_count());
  Vector field;
  if (d.contains("field") == d.contains("potential"))
    throw ConfigError("decompose needs exactly one of \"decompose.field\" and \"decompose.potential\"");
  if (d.contains("field")) {
    field = detail::vector_of(d.at("field"), "decompose.field");
    if (field.size() != m) throw ConfigError("key \"decompose.field\" needs one value per edge");
    for (Eigen::Index e = 0; e < m; ++e)
      if (cfg.graph.flipped[static_cast<std::size_t>(e)]) field(e) = -field(e);
  } else {
    const Vector phi = detail::vector_of(d.at("potential"), "decompose.potential");
    if (phi.size() != n) throw ConfigError("key \"decompose.potential\" must have length n");
    field = graph_gradient(g, Potential(phi)).values();
  }
  const VectorField v(g, field);
  const HodgeDecomposition h = hodge_decompose(g, rho, v);
  const VectorField grad = graph_gradient(g, h.potential);
  const double total = inner_product(v, v, rho);
  const double gg = inner_product(grad, grad, rho);
  const double uu = inner_product(h.remainder, h.remainder, rho);

  // Report per-edge values in the file's orientation.
  Vector remainder = h.remainder.values();
  for (Eigen::Index e = 0; e < m; ++e)
    if (cfg.graph.flipped[static_cast<std::size_t>(e)]) remainder(e) = -remainder(e);

  json out = detail::header(cfg, "decompose");
  out.update(json{{"potential", to_json(h.potential.values())},
                  {"remainder", to_json(remainder)},
                  {"remainder_max_abs", remainder.size() ? remainder.lpNorm<Eigen::Infinity>() : 0.0},
                  {"divergence_residual", divergence(g, rho, h.remainder).values().lpNorm<Eigen::Infinity>()},
                  {"pythagoras", json{{"total", total}, {"gradient", gg}, {"remainder", uu},
                                      {"relative_error", std::abs(total - gg - uu) / std::max(total, 1e-300)}}}});
  write_text(opts.out_dir / "hodge.json", to_json_text(out));
  return kOk;
}

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::StepSizeUnderflow:
      return kNoConvergence;
    case ErrorCode::NotCertifiedConvex:
    case ErrorCode::NonSymmetricW:
    case ErrorCode::NonPositiveHessian:
    case ErrorCode::NonPositiveSymmetrizedJacobian:
    case ErrorCode::BoundaryDensity:
    case ErrorCode::NoValidSamples:
      return kPrecondition;
    default:
      return kConfigError;
  }
}

/// Loads, validates and runs one command; returns the process exit code.
inline int run(const std::string& command, const fs::path& config_path, const RunOptions& opts) {
  static const std::set<std::string> kCommands{"gibbs", "simulate", "rates", "lsi", "w2", "decompose"};
  try {
    if (!kCommands.count(command)) throw ConfigError("unknown command \"" + command + "\"");
    const json input = detail::load_json_file(config_path);
    const fs::path base = config_path.parent_path();
    const ExperimentConfig cfg = parse_config(input, base);
    fs::create_directories(opts.out_dir);
    spdlog::info("{}: config {} digest {}", command, config_path.string(), config_digest(cfg.raw));
    if (command == "gibbs") return cmd_gibbs(cfg, opts);
    if (command == "simulate") return cmd_simulate(cfg, opts);
    if (command == "rates") return cmd_rates(cfg, opts, base);
    if (command == "lsi") return cmd_lsi(cfg, opts);
    if (command == "w2") return cmd_w2(cfg, opts);
    return cmd_decompose(cfg, opts);
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfigError;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    spdlog::error("config error: {}", e.what());
    return kConfigError;
  }
}

}  // namespace graphfpe::harness
