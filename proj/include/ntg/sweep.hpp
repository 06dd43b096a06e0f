#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ntg/abm.hpp"
#include "ntg/csv.hpp"
#include "ntg/markov.hpp"
#include "ntg/version.hpp"

namespace ntg {

enum class OutputKind { stationary, gradient, summary, abm };

inline std::string output_kind_name(OutputKind k) {
  switch (k) {
    case OutputKind::stationary: return "stationary";
    case OutputKind::gradient: return "gradient";
    case OutputKind::summary: return "summary";
    case OutputKind::abm: return "abm";
  }
  return "?";
}

inline OutputKind output_kind_from(const std::string& name) {
  for (OutputKind k : {OutputKind::stationary, OutputKind::gradient, OutputKind::summary,
                       OutputKind::abm})
    if (output_kind_name(k) == name) return k;
  throw validation_error("unknown output kind: " + name);
}

inline std::string payoff_mode_name(PayoffMode m) {
  return m == PayoffMode::expected ? "expected" : "sampled";
}

inline PayoffMode payoff_mode_from(const std::string& name) {
  if (name == "expected") return PayoffMode::expected;
  if (name == "sampled") return PayoffMode::sampled;
  throw validation_error("payoff_mode: must be \"expected\" or \"sampled\", got \"" + name +
                         "\"");
}

// One swept parameter and its values.
struct Axis {
  std::string param;
  std::vector<double> values;
};

// ABM settings carried by simulate/sweep invocations (GameParams supplied per point).
struct SimOptions {
  std::uint64_t steps = 1'000'000;
  std::uint64_t burn_in = 100'000;
  std::uint64_t seed = 1;
  PayoffMode payoff_mode = PayoffMode::expected;
  int groups_per_evaluation = 1;

  SimConfig with(const GameParams& p) const {
    return SimConfig{p, steps, burn_in, seed, payoff_mode, groups_per_evaluation};
  }
};

namespace detail {

inline const std::vector<std::string>& param_names() {
  static const std::vector<std::string> names{"Z",     "N", "M",    "tv", "RT",
                                              "RU",    "sigma",     "w",  "beta",
                                              "mu",    "rounds_override"};
  return names;
}

inline void set_param(GameParams& p, const std::string& name, double value) {
  auto as_int = [&](const char* field) {
    const double r = std::round(value);
    if (std::abs(value - r) > 1e-9 || r < -2e9 || r > 2e9)
      throw validation_error(std::string(field) + ": must be an integer, got " +
                             format_double(value));
    return static_cast<int>(r);
  };
  if (name == "Z") p.Z = as_int("Z");
  else if (name == "N") p.N = as_int("N");
  else if (name == "M") p.M = as_int("M");
  else if (name == "tv") p.tv = value;
  else if (name == "RT") p.RT = value;
  else if (name == "RU") p.RU = value;
  else if (name == "sigma") p.sigma = value;
  else if (name == "w") p.w = value;
  else if (name == "beta") p.beta = value;
  else if (name == "mu") p.mu = value;
  else if (name == "rounds_override") p.rounds_override = value;
  else throw validation_error("unknown parameter name: " + name);
}

}  // namespace detail

// Canonical file-name segment: sorted key=value pairs joined by underscores,
// floats in shortest round-trip form. Identical parameters always map to the
// same artifact names.
inline std::string canonical_segment(const GameParams& p) {
  std::ostringstream out;
  out << "M=" << p.M << "_N=" << p.N << "_RT=" << format_double(p.RT)
      << "_RU=" << format_double(p.RU) << "_Z=" << p.Z << "_beta=" << format_double(p.beta)
      << "_mu=" << format_double(p.mu);
  if (p.rounds_override) out << "_rounds_override=" << format_double(*p.rounds_override);
  out << "_sigma=" << format_double(p.sigma) << "_tv=" << format_double(p.tv)
      << "_w=" << format_double(p.w);
  return out.str();
}

// A full sweep description: base parameters, crossed axes, zipped axes
// (advanced in lockstep, equal lengths), requested artifacts and solver/ABM
// settings. When mu_default is set and no axis touches mu, every resolved
// point gets mu = 1/Z.
struct SweepSpec {
  GameParams base;
  std::vector<Axis> axes;
  std::vector<Axis> zip_axes;
  std::set<OutputKind> outputs{OutputKind::summary};
  std::filesystem::path out_dir = ".";
  int jobs = 1;
  SolverOptions solver;
  SimOptions sim;
  bool mu_default = false;

  // Cartesian product of the crossed axes for every zip row; zip row
  // outermost, listed axes in order with the last one fastest.
  std::vector<GameParams> resolve_points() const {
    for (const Axis& a : zip_axes)
      if (!zip_axes.empty() && a.values.size() != zip_axes.front().values.size())
        throw validation_error("zip_axes: all value lists must have the same length");
    for (const Axis& a : axes)
      if (a.values.empty()) throw validation_error("axis " + a.param + ": empty value list");

    bool mu_swept = false;
    for (const auto* list : {&axes, &zip_axes})
      for (const Axis& a : *list)
        if (a.param == "mu") mu_swept = true;

    std::vector<GameParams> points;
    const std::size_t zip_rows = zip_axes.empty() ? 1 : zip_axes.front().values.size();
    for (std::size_t zi = 0; zi < zip_rows; ++zi) {
      GameParams zipped = base;
      for (const Axis& a : zip_axes) detail::set_param(zipped, a.param, a.values[zi]);
      std::vector<std::size_t> idx(axes.size(), 0);
      while (true) {
        GameParams point = zipped;
        for (std::size_t ax = 0; ax < axes.size(); ++ax)
          detail::set_param(point, axes[ax].param, axes[ax].values[idx[ax]]);
        if (mu_default && !mu_swept) point.mu = 1.0 / point.Z;
        points.push_back(point);
        // odometer over the crossed axes, last axis fastest
        bool rolled_over = true;
        for (std::size_t ax = axes.size(); ax-- > 0;) {
          if (++idx[ax] < axes[ax].values.size()) {
            rolled_over = false;
            break;
          }
          idx[ax] = 0;
        }
        if (rolled_over) break;
      }
    }

    std::set<std::string> seen;
    for (const GameParams& p : points) {
      p.validate();
      if (!seen.insert(canonical_segment(p)).second)
        throw validation_error("duplicate parameter point: " + canonical_segment(p));
    }
    return points;
  }
};

// --- JSON configuration ----------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::string& where,
                                const std::vector<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw validation_error(where + ": unknown key \"" + key + "\"");
  }
}

inline double number_at(const nlohmann::json& obj, const std::string& key) {
  if (!obj.at(key).is_number())
    throw validation_error(key + ": expected a number");
  return obj.at(key).get<double>();
}

inline void parse_params_into(const nlohmann::json& obj, GameParams& p, bool& mu_given) {
  reject_unknown_keys(obj, "base", param_names());
  for (const std::string& name : param_names()) {
    if (!obj.contains(name)) continue;
    set_param(p, name, number_at(obj, name));
    if (name == "mu") mu_given = true;
  }
}

inline std::vector<Axis> parse_axes(const nlohmann::json& arr, const std::string& where) {
  if (!arr.is_array()) throw validation_error(where + ": expected an array");
  std::vector<Axis> axes;
  for (const auto& item : arr) {
    reject_unknown_keys(item, where, {"param", "values"});
    Axis axis;
    axis.param = item.at("param").get<std::string>();
    if (std::find(param_names().begin(), param_names().end(), axis.param) ==
        param_names().end())
      throw validation_error(where + ": unknown parameter name \"" + axis.param + "\"");
    for (const auto& v : item.at("values")) {
      if (!v.is_number()) throw validation_error(where + "/" + axis.param + ": non-numeric value");
      axis.values.push_back(v.get<double>());
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

inline SweepSpec parse_config_json_impl(const nlohmann::json& doc) {
  detail::reject_unknown_keys(doc, "config",
                              {"base", "axes", "zip_axes", "outputs", "out", "jobs", "tol",
                               "max_iters", "sim"});
  SweepSpec spec;
  spec.mu_default = true;
  if (doc.contains("base")) {
    bool mu_given = false;
    detail::parse_params_into(doc.at("base"), spec.base, mu_given);
    if (mu_given) spec.mu_default = false;
  }
  if (doc.contains("axes")) spec.axes = detail::parse_axes(doc.at("axes"), "axes");
  if (doc.contains("zip_axes"))
    spec.zip_axes = detail::parse_axes(doc.at("zip_axes"), "zip_axes");
  if (doc.contains("outputs")) {
    spec.outputs.clear();
    for (const auto& o : doc.at("outputs"))
      spec.outputs.insert(output_kind_from(o.get<std::string>()));
  }
  if (doc.contains("out")) spec.out_dir = doc.at("out").get<std::string>();
  if (doc.contains("jobs")) {
    spec.jobs = doc.at("jobs").get<int>();
    if (spec.jobs < 1) throw validation_error("jobs: must be >= 1");
  }
  if (doc.contains("tol")) spec.solver.tol = detail::number_at(doc, "tol");
  if (doc.contains("max_iters")) spec.solver.max_iters = doc.at("max_iters").get<std::uint64_t>();
  if (doc.contains("sim")) {
    const auto& sim = doc.at("sim");
    detail::reject_unknown_keys(
        sim, "sim", {"steps", "burn_in", "seed", "payoff_mode", "groups_per_evaluation"});
    if (sim.contains("steps")) spec.sim.steps = sim.at("steps").get<std::uint64_t>();
    if (sim.contains("burn_in")) spec.sim.burn_in = sim.at("burn_in").get<std::uint64_t>();
    if (sim.contains("seed")) spec.sim.seed = sim.at("seed").get<std::uint64_t>();
    if (sim.contains("payoff_mode"))
      spec.sim.payoff_mode = payoff_mode_from(sim.at("payoff_mode").get<std::string>());
    if (sim.contains("groups_per_evaluation"))
      spec.sim.groups_per_evaluation = sim.at("groups_per_evaluation").get<int>();
  }
  return spec;
}

}  // namespace detail

inline SweepSpec parse_config_json(const nlohmann::json& doc) {
  try {
    return detail::parse_config_json_impl(doc);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("config: ") + e.what());
  }
}

inline SweepSpec parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot read config file: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error("config file " + path.string() + ": " + e.what());
  }
  return parse_config_json(doc);
}

inline nlohmann::json params_to_json(const GameParams& p) {
  nlohmann::json obj{{"Z", p.Z},         {"N", p.N},       {"M", p.M},    {"tv", p.tv},
                     {"RT", p.RT},       {"RU", p.RU},     {"sigma", p.sigma},
                     {"w", p.w},         {"beta", p.beta}, {"mu", p.mu}};
  if (p.rounds_override) obj["rounds_override"] = *p.rounds_override;
  return obj;
}

inline nlohmann::json spec_to_json(const SweepSpec& spec) {
  nlohmann::json axes = nlohmann::json::array();
  for (const Axis& a : spec.axes) axes.push_back({{"param", a.param}, {"values", a.values}});
  nlohmann::json zip_axes = nlohmann::json::array();
  for (const Axis& a : spec.zip_axes)
    zip_axes.push_back({{"param", a.param}, {"values", a.values}});
  nlohmann::json outputs = nlohmann::json::array();
  for (OutputKind k : spec.outputs) outputs.push_back(output_kind_name(k));
  nlohmann::json doc{{"base", params_to_json(spec.base)},
                     {"axes", axes},
                     {"zip_axes", zip_axes},
                     {"outputs", outputs},
                     {"tol", spec.solver.tol},
                     {"max_iters", spec.solver.max_iters}};
  if (spec.outputs.count(OutputKind::abm)) {
    doc["sim"] = {{"steps", spec.sim.steps},
                  {"burn_in", spec.sim.burn_in},
                  {"seed", spec.sim.seed},
                  {"payoff_mode", payoff_mode_name(spec.sim.payoff_mode)},
                  {"groups_per_evaluation", spec.sim.groups_per_evaluation}};
  }
  return doc;
}

// --- Execution ---------------------------------------------------------------

struct PointResult {
  std::optional<SummaryRow> summary;
  std::vector<std::string> files;
};

// Computes the requested artifacts for one parameter point and writes them
// under out_dir with canonical names.
inline PointResult run_point(const GameParams& params, const std::set<OutputKind>& outputs,
                             const SolverOptions& solver, const SimOptions& sim,
                             const std::filesystem::path& out_dir) {
  params.validate();
  const std::string segment = canonical_segment(params);
  PointResult result;

  const bool needs_solve =
      outputs.count(OutputKind::stationary) || outputs.count(OutputKind::summary);
  if (needs_solve) {
    const auto started = std::chrono::steady_clock::now();
    const TransitionChain chain = build_chain(params);
    StationaryResult st;
    try {
      st = stationary(chain, solver);
    } catch (const solver_error& e) {
      throw solver_error("point " + segment + ": " + e.what());
    }
    SummaryRow row{params, st.rho, st.fbar, st.residual, st.iterations, 0.0};
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                           .count();
    result.summary = row;
    if (outputs.count(OutputKind::stationary)) {
      const auto path = out_dir / ("stationary_" + segment + ".csv");
      auto out = open_output_file(path.string());
      write_stationary_csv(out, chain, st.distribution);
      result.files.push_back(path.string());
    }
  }
  if (outputs.count(OutputKind::gradient)) {
    const GradientField field = gradient_field(params);
    const auto path = out_dir / ("gradient_" + segment + ".csv");
    auto out = open_output_file(path.string());
    write_gradient_csv(out, field);
    result.files.push_back(path.string());
  }
  if (outputs.count(OutputKind::abm)) {
    const AbmResult abm = abm_run(sim.with(params));
    const auto path = out_dir / ("abm_" + segment + ".csv");
    auto out = open_output_file(path.string());
    write_histogram_csv(out, StateSpace(params.Z), abm.visits);
    result.files.push_back(path.string());
  }
  return result;
}

struct SweepFailure {
  std::size_t point_index;
  std::string segment;
  std::string message;
  bool is_validation = false;
};

struct SweepResult {
  std::vector<GameParams> points;
  std::vector<std::optional<SummaryRow>> rows;   // aligned with points
  std::vector<SweepFailure> failures;
  std::filesystem::path summary_csv;             // empty when summary was not requested
  std::filesystem::path manifest;
};

// Runs every resolved point (worker pool of spec.jobs threads), writes the
// per-point artifacts, one aggregated summary CSV in point order, and a
// manifest. Rerunning an identical spec rewrites identical bytes; the jobs
// count never changes any artifact.
inline SweepResult run_sweep(const SweepSpec& spec) {
  SweepResult result;
  result.points = spec.resolve_points();
  result.rows.resize(result.points.size());
  std::filesystem::create_directories(spec.out_dir);

  std::vector<SweepFailure> failures;
  std::mutex failures_mutex;
  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, std::min<int>(spec.jobs, static_cast<int>(result.points.size())));

  auto work = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= result.points.size()) return;
      try {
        result.rows[k] =
            run_point(result.points[k], spec.outputs, spec.solver, spec.sim, spec.out_dir)
                .summary;
      } catch (const std::exception& e) {
        const std::lock_guard<std::mutex> lock(failures_mutex);
        failures.push_back({k, canonical_segment(result.points[k]), e.what(),
                            dynamic_cast<const validation_error*>(&e) != nullptr});
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  std::sort(failures.begin(), failures.end(),
            [](const SweepFailure& a, const SweepFailure& b) {
              return a.point_index < b.point_index;
            });
  result.failures = std::move(failures);

  if (spec.outputs.count(OutputKind::summary)) {
    result.summary_csv = spec.out_dir / "summary.csv";
    auto out = open_output_file(result.summary_csv.string());
    out << kSummaryCsvHeader << '\n';
    for (const auto& row : result.rows)
      if (row) write_summary_row(out, *row);
  }

  nlohmann::json manifest = spec_to_json(spec);
  manifest["software"] = {{"name", "ntg"}, {"version", kVersion}};
  manifest["summary_csv_version"] = kSummaryCsvSchemaVersion;
  manifest["points"] = result.points.size();
  nlohmann::json failed = nlohmann::json::array();
  for (const SweepFailure& f : result.failures) failed.push_back(f.segment);
  manifest["failed_points"] = failed;
  result.manifest = spec.out_dir / "manifest.json";
  auto mout = open_output_file(result.manifest.string());
  mout << manifest.dump(2) << '\n';
  return result;
}

// --- Figure presets ----------------------------------------------------------

namespace detail {

inline std::vector<double> log_grid_union(double lo_exp, double hi_exp, int per_decade,
                                          std::vector<double> extra) {
  std::vector<double> values = std::move(extra);
  const int steps = static_cast<int>(std::lround((hi_exp - lo_exp) * per_decade));
  for (int k = 0; k <= steps; ++k)
    values.push_back(std::pow(10.0, lo_exp + static_cast<double>(k) / per_decade));
  std::sort(values.begin(), values.end());
  std::vector<double> unique;
  for (double v : values)
    if (unique.empty() || std::abs(v - unique.back()) > 1e-9 * std::max(std::abs(v), 1e-300))
      unique.push_back(v);
  return unique;
}

}  // namespace detail

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig2", "fig3", "fig4",  "fig5", "fig6",
                                              "fig7", "fig8", "fig9", "fig10", "fig11"};
  return names;
}

// Parameter grid of the named figure. All presets share the baseline
// Z=100, N=4, M=2, tv=1, RT=6, RU=8, sigma=0.1, w=0.8, beta=5, mu=1/Z and
// sweep one knob; fig11 moves N and M together (M = N/2).
inline SweepSpec preset(const std::string& name) {
  SweepSpec spec;
  spec.base = GameParams{};  // the baseline above
  const std::set<OutputKind> field_outputs{OutputKind::stationary, OutputKind::gradient,
                                           OutputKind::summary};
  if (name == "fig2") {
    spec.axes = {{"M", {0, 2, 4}}};
    spec.outputs = field_outputs;
  } else if (name == "fig3" || name == "fig4") {
    spec.axes = {{"M", {0, 1, 2, 3, 4}}};
  } else if (name == "fig5") {
    spec.axes = {{"RU", {6.66, 7.98, 9.96}}};
    spec.outputs = field_outputs;
  } else if (name == "fig6") {
    spec.axes = {{"tv", {3, 7, 11}}};
    spec.outputs = field_outputs;
  } else if (name == "fig7") {
    spec.axes = {{"sigma", {1, 3, 5}}};
    spec.outputs = field_outputs;
  } else if (name == "fig8") {
    spec.axes = {{"w", {2.0 / 3.0, 4.0 / 5.0, 6.0 / 7.0}}};
    spec.outputs = field_outputs;
  } else if (name == "fig9") {
    spec.axes = {{"beta", detail::log_grid_union(-4.0, 1.0, 5, {2.0, 6.0, 10.0})}};
  } else if (name == "fig10") {
    spec.axes = {{"mu", detail::log_grid_union(-5.0, 0.0, 5, {1e-5, 1e-4, 1e-3})}};
  } else if (name == "fig11") {
    spec.zip_axes = {{"N", {4, 6, 8, 10}}, {"M", {2, 3, 4, 5}}};
    spec.outputs = field_outputs;
  } else {
    throw validation_error("unknown preset: " + name);
  }
  return spec;
}

}  // namespace ntg
