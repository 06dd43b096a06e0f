#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ntg/sweep.hpp"

namespace ntg {

namespace detail {

// Flags shared by the subcommands; unset flags leave the config-file or
// built-in defaults in place.
struct CommonFlags {
  std::optional<int> Z, N, M;
  std::optional<double> tv, RT, RU, sigma, w, beta, mu, rounds_override;
  std::optional<double> tol;
  std::optional<std::uint64_t> max_iters;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--Z", Z, "population size");
    cmd->add_option("--N", N, "group size");
    cmd->add_option("--M", M, "investment threshold");
    cmd->add_option("--tv", tv, "invested amount per round");
    cmd->add_option("--RT", RT, "trustworthy multiply factor");
    cmd->add_option("--RU", RU, "untrustworthy multiply factor");
    cmd->add_option("--sigma", sigma, "observation cost");
    cmd->add_option("--w", w, "continuation probability per round");
    cmd->add_option("--beta", beta, "selection intensity");
    cmd->add_option("--mu", mu, "mutation probability (default 1/Z)");
    cmd->add_option("--rounds-override", rounds_override,
                    "replace the w-derived expected round count");
    cmd->add_option("--tol", tol, "solver tolerance (L1 change)");
    cmd->add_option("--max-iters", max_iters, "solver iteration cap");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--jobs", jobs, "parallel worker count for sweeps");
    cmd->add_option("--seed", seed, "simulation seed");
    cmd->add_option("--config", config, "JSON config file; flags override its values");
  }

  SweepSpec resolve() const {
    SweepSpec spec;
    if (config) {
      spec = parse_config_file(*config);
    } else {
      spec.mu_default = true;
    }
    if (Z) spec.base.Z = *Z;
    if (N) spec.base.N = *N;
    if (M) spec.base.M = *M;
    if (tv) spec.base.tv = *tv;
    if (RT) spec.base.RT = *RT;
    if (RU) spec.base.RU = *RU;
    if (sigma) spec.base.sigma = *sigma;
    if (w) spec.base.w = *w;
    if (beta) spec.base.beta = *beta;
    if (mu) {
      spec.base.mu = *mu;
      spec.mu_default = false;
    }
    if (rounds_override) spec.base.rounds_override = *rounds_override;
    if (tol) spec.solver.tol = *tol;
    if (max_iters) spec.solver.max_iters = *max_iters;
    if (out) spec.out_dir = *out;
    if (jobs) spec.jobs = *jobs;
    if (seed) spec.sim.seed = *seed;
    return spec;
  }

  // Single parameter point of the resolved spec (axes ignored).
  GameParams point() const {
    const SweepSpec spec = resolve();
    GameParams p = spec.base;
    if (spec.mu_default) p.mu = 1.0 / p.Z;
    p.validate();
    return p;
  }
};

inline void print_summary_line(std::ostream& os, const SummaryRow& row) {
  os << canonical_segment(row.params) << ": rho_CI=" << format_double(row.rho[0])
     << " rho_T=" << format_double(row.rho[1]) << " rho_U=" << format_double(row.rho[2])
     << " fbar_CI=" << format_double(row.fbar[0]) << " fbar_T=" << format_double(row.fbar[1])
     << " fbar_U=" << format_double(row.fbar[2]) << " residual=" << format_double(row.residual)
     << " iterations=" << row.iterations << '\n';
}

inline int report_sweep(const SweepResult& result) {
  for (const auto& row : result.rows)
    if (row) print_summary_line(std::cout, *row);
  if (!result.summary_csv.empty())
    std::cout << "summary: " << result.summary_csv.string() << '\n';
  std::cout << "manifest: " << result.manifest.string() << '\n';
  if (!result.failures.empty()) {
    std::cerr << result.failures.size() << " of " << result.points.size()
              << " points failed:" << '\n';
    for (const SweepFailure& f : result.failures)
      std::cerr << "  " << f.segment << ": " << f.message << '\n';
    return 3;
  }
  return 0;
}

}  // namespace detail

// Entry point of the `ntg` tool; returns the process exit code
// (0 success, 2 validation error, 3 solver failure).
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Stochastic evolutionary dynamics of the repeated N-player trust game"};
  app.require_subcommand(1);

  detail::CommonFlags stationary_flags, gradient_flags, summary_flags, sweep_flags,
      simulate_flags, preset_flags;

  CLI::App* cmd_stationary =
      app.add_subcommand("stationary", "solve one point and write the stationary CSV");
  stationary_flags.add_to(cmd_stationary);

  CLI::App* cmd_gradient =
      app.add_subcommand("gradient", "write the gradient-of-selection CSV for one point");
  gradient_flags.add_to(cmd_gradient);

  CLI::App* cmd_summary =
      app.add_subcommand("summary", "solve one point and write a one-row summary CSV");
  summary_flags.add_to(cmd_summary);

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run a parameter sweep from a config file");
  sweep_flags.add_to(cmd_sweep);

  CLI::App* cmd_simulate =
      app.add_subcommand("simulate", "run the agent-based simulation for one point");
  simulate_flags.add_to(cmd_simulate);
  std::optional<std::uint64_t> sim_steps, sim_burn_in;
  std::uint64_t record_every = 1'000;
  std::optional<std::string> payoff_mode;
  std::optional<int> groups_per_eval;
  std::optional<int> init_ci, init_t;
  cmd_simulate->add_option("--steps", sim_steps, "total revision events");
  cmd_simulate->add_option("--burn-in", sim_burn_in, "events discarded from averages");
  cmd_simulate->add_option("--payoff-mode", payoff_mode, "expected or sampled");
  cmd_simulate->add_option("--groups-per-eval", groups_per_eval,
                           "sampled mode: games per payoff estimate");
  cmd_simulate->add_option("--record-every", record_every, "time-series row interval");
  cmd_simulate->add_option("--init-ci", init_ci, "initial CI count (random population if unset)");
  cmd_simulate->add_option("--init-t", init_t, "initial T count");

  CLI::App* cmd_preset = app.add_subcommand("preset", "run a named figure preset");
  std::string preset_name;
  bool dry_run = false;
  cmd_preset->add_option("name", preset_name, "one of fig2 .. fig11")->required();
  cmd_preset->add_flag("--dry-run", dry_run, "print the resolved spec instead of running");
  preset_flags.add_to(cmd_preset);

  try {
    app.parse(argc, argv);

    if (*cmd_stationary) {
      const SweepSpec spec = stationary_flags.resolve();
      std::filesystem::create_directories(spec.out_dir);
      const PointResult r = run_point(stationary_flags.point(), {OutputKind::stationary},
                                      spec.solver, spec.sim, spec.out_dir);
      detail::print_summary_line(std::cout, *r.summary);
      for (const std::string& f : r.files) std::cout << f << '\n';
      return 0;
    }

    if (*cmd_gradient) {
      const SweepSpec spec = gradient_flags.resolve();
      std::filesystem::create_directories(spec.out_dir);
      const PointResult r = run_point(gradient_flags.point(), {OutputKind::gradient},
                                      spec.solver, spec.sim, spec.out_dir);
      for (const std::string& f : r.files) std::cout << f << '\n';
      return 0;
    }

    if (*cmd_summary) {
      const SweepSpec spec = summary_flags.resolve();
      std::filesystem::create_directories(spec.out_dir);
      const GameParams p = summary_flags.point();
      const PointResult r =
          run_point(p, {OutputKind::summary}, spec.solver, spec.sim, spec.out_dir);
      const auto path = spec.out_dir / ("summary_" + canonical_segment(p) + ".csv");
      auto out = open_output_file(path.string());
      out << kSummaryCsvHeader << '\n';
      write_summary_row(out, *r.summary);
      detail::print_summary_line(std::cout, *r.summary);
      std::cout << path.string() << '\n';
      return 0;
    }

    if (*cmd_sweep) {
      const SweepSpec spec = sweep_flags.resolve();
      std::cout << "points: " << spec.resolve_points().size() << '\n';
      return detail::report_sweep(run_sweep(spec));
    }

    if (*cmd_preset) {
      SweepSpec spec = preset(preset_name);
      // presets pin the game parameters; only run environment is adjustable
      if (preset_flags.out) spec.out_dir = *preset_flags.out;
      if (preset_flags.jobs) spec.jobs = *preset_flags.jobs;
      if (preset_flags.tol) spec.solver.tol = *preset_flags.tol;
      if (preset_flags.max_iters) spec.solver.max_iters = *preset_flags.max_iters;
      if (preset_flags.seed) spec.sim.seed = *preset_flags.seed;
      if (dry_run) {
        nlohmann::json doc = spec_to_json(spec);
        doc["points"] = spec.resolve_points().size();
        std::cout << doc.dump(2) << '\n';
        return 0;
      }
      std::cout << "points: " << spec.resolve_points().size() << '\n';
      return detail::report_sweep(run_sweep(spec));
    }

    if (*cmd_simulate) {
      const SweepSpec spec = simulate_flags.resolve();
      std::filesystem::create_directories(spec.out_dir);
      SimConfig cfg = spec.sim.with(simulate_flags.point());
      if (sim_steps) cfg.steps = *sim_steps;
      if (sim_burn_in) cfg.burn_in = *sim_burn_in;
      if (payoff_mode) cfg.payoff_mode = payoff_mode_from(*payoff_mode);
      if (groups_per_eval) cfg.groups_per_evaluation = *groups_per_eval;
      cfg.validate();
      if (record_every == 0) throw validation_error("record-every: must be >= 1");
      if (init_ci.has_value() != init_t.has_value())
        throw validation_error("init-ci and init-t must be given together");
      std::optional<PopulationState> initial;
      if (init_ci) initial = PopulationState{*init_ci, *init_t};

      const std::string segment =
          canonical_segment(cfg.params) + "_seed=" + std::to_string(cfg.seed);
      const auto series_path = spec.out_dir / ("abm_timeseries_" + segment + ".csv");
      auto series = open_output_file(series_path.string());
      series << kTimeSeriesCsvHeader << '\n';
      const int z = cfg.params.Z;
      const AbmResult r =
          abm_run(cfg, initial, [&](std::uint64_t event, const PopulationState& s) {
            if (event % record_every == 0 || event == cfg.steps)
              series << event << ',' << s.i_ci << ',' << s.i_t << ',' << s.i_u(z) << '\n';
          });
      const auto hist_path = spec.out_dir / ("abm_hist_" + segment + ".csv");
      auto hist = open_output_file(hist_path.string());
      write_histogram_csv(hist, StateSpace(z), r.visits);

      std::cout << "rho_CI=" << format_double(r.rho[0]) << " rho_T=" << format_double(r.rho[1])
                << " rho_U=" << format_double(r.rho[2]) << " events=" << r.events_counted
                << '\n';
      std::cout << series_path.string() << '\n' << hist_path.string() << '\n';
      return 0;
    }

    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const solver_error& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ntg
