#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "ntg/game.hpp"
#include "ntg/markov.hpp"

namespace ntg {

using Rng = std::mt19937_64;

// Deterministic stream splitting: replica r of base seed s gets its own
// reproducible generator, independent of all other replicas.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

namespace detail {

// Uniform double in [0, 1), 53 bits; avoids the implementation-defined
// std::uniform_real_distribution so trajectories are portable.
inline double u01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Unbiased uniform integer in [0, n), multiply-shift with rejection.
inline std::uint64_t bounded(Rng& rng, std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * n;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < n) {
    const std::uint64_t threshold = -n % n;
    while (lo < threshold) {
      m = static_cast<unsigned __int128>(rng()) * n;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace detail

enum class PayoffMode { expected, sampled };

struct SimConfig {
  GameParams params;
  std::uint64_t steps = 1'000'000;   // total revision events
  std::uint64_t burn_in = 100'000;   // discarded initial events
  std::uint64_t seed = 1;
  PayoffMode payoff_mode = PayoffMode::expected;
  int groups_per_evaluation = 1;     // sampled mode: games averaged per payoff estimate

  void validate() const {
    params.validate();
    if (burn_in >= steps) throw validation_error("sim: burn_in must be < steps");
    if (groups_per_evaluation < 1)
      throw validation_error("sim: groups_per_evaluation must be >= 1");
  }
};

// Strategy assignment of every agent plus the derived counts.
class Population {
 public:
  Population(int z, PopulationState init) {
    if (init.i_ci < 0 || init.i_t < 0 || init.i_ci + init.i_t > z)
      throw validation_error("population: initial counts must be nonnegative and sum to <= Z");
    agents_.reserve(z);
    for (int k = 0; k < z; ++k)
      agents_.push_back(k < init.i_ci            ? Strategy::CI
                        : k < init.i_ci + init.i_t ? Strategy::T
                                                   : Strategy::U);
    counts_ = {init.i_ci, init.i_t, z - init.i_ci - init.i_t};
  }

  static Population random(int z, Rng& rng) {
    Population pop(z, {z, 0});
    for (int k = 0; k < z; ++k)
      pop.set_strategy(k, static_cast<Strategy>(detail::bounded(rng, 3)));
    return pop;
  }

  int size() const { return static_cast<int>(agents_.size()); }
  Strategy strategy(int agent) const { return agents_[agent]; }
  int count(Strategy s) const { return counts_[static_cast<int>(s)]; }
  PopulationState state() const { return {counts_[0], counts_[1]}; }

  void set_strategy(int agent, Strategy s) {
    counts_[static_cast<int>(agents_[agent])] -= 1;
    counts_[static_cast<int>(s)] += 1;
    agents_[agent] = s;
  }

 private:
  std::vector<Strategy> agents_;
  std::array<int, 3> counts_{};
};

// Realized per-member payoffs from one play of the repeated game; members of
// the same strategy earn the same amount. `rounds` is the drawn game length.
struct RealizedPayoffs {
  double ci = 0, t = 0, u = 0;
  std::int64_t rounds = 1;

  double per(Strategy s) const { return s == Strategy::CI ? ci : s == Strategy::T ? t : u; }
};

// Plays one realized repeated game. The number of rounds beyond the first is
// geometric with continuation probability w (inverse-CDF draw); those rounds
// are invested only when the trustworthy count reaches the threshold M. With
// rounds_override set, the draw is replaced by the deterministic weight
// rounds_override - 1 and no randomness is consumed.
inline RealizedPayoffs play_group_game(const GroupComposition& g, const GameParams& p, Rng& rng) {
  validate_composition(g, p);
  RealizedPayoffs out;
  const int trustees = g.n_t + g.n_u;
  if (trustees == 0 || g.n_ci == 0) return out;  // no game happens, sigma is not charged

  double extra_weight;
  if (p.rounds_override) {
    extra_weight = *p.rounds_override - 1.0;
  } else {
    const double u = 1.0 - detail::u01(rng);  // (0, 1]
    const auto extra = static_cast<std::int64_t>(std::log(u) / std::log(p.w));
    extra_weight = static_cast<double>(extra);
    out.rounds = 1 + extra;
  }
  const double invested = 1.0 + extra_weight * heaviside(g.n_t - p.M);
  out.ci = (p.RT * g.n_t * p.tv / trustees - p.tv) * invested - p.sigma;
  out.t = (p.RT * g.n_ci * p.tv / trustees) * invested;
  out.u = (p.RU * g.n_ci * p.tv / trustees) * invested;
  return out;
}

// Composition of a random game group containing the focal agent: the other
// N-1 members are drawn without replacement from the remaining Z-1 agents.
inline GroupComposition sample_group_for(Strategy focal, const PopulationState& state,
                                         const GameParams& p, Rng& rng) {
  std::array<int, 3> remaining{state.i_ci, state.i_t, state.i_u(p.Z)};
  remaining[static_cast<int>(focal)] -= 1;
  GroupComposition g;
  g.count(focal) = 1;
  int left = p.Z - 1;
  for (int d = 0; d < p.N - 1; ++d) {
    auto pick = static_cast<int>(detail::bounded(rng, static_cast<std::uint64_t>(left)));
    const int s = pick < remaining[0]                  ? 0
                  : pick < remaining[0] + remaining[1] ? 1
                                                       : 2;
    remaining[s] -= 1;
    g.count(static_cast<Strategy>(s)) += 1;
    --left;
  }
  return g;
}

namespace detail {

inline double sampled_payoff(Strategy s, const PopulationState& st, const SimConfig& cfg,
                             Rng& rng) {
  double acc = 0.0;
  for (int g = 0; g < cfg.groups_per_evaluation; ++g) {
    const GroupComposition comp = sample_group_for(s, st, cfg.params, rng);
    acc += play_group_game(comp, cfg.params, rng).per(s);
  }
  return acc / cfg.groups_per_evaluation;
}

// One revision event. ExpectedPayoffFn supplies the expected-mode payoff so
// abm_run can memoize it per state; abm_step passes the direct evaluation.
template <typename ExpectedPayoffFn>
void abm_step_with(Population& pop, const SimConfig& cfg, Rng& rng,
                   ExpectedPayoffFn&& expected_payoff) {
  const int z = pop.size();
  const auto focal = static_cast<int>(bounded(rng, static_cast<std::uint64_t>(z)));
  const Strategy s_focal = pop.strategy(focal);

  if (u01(rng) < cfg.params.mu) {
    const auto shift = 1 + static_cast<int>(bounded(rng, 2));
    pop.set_strategy(focal, static_cast<Strategy>((static_cast<int>(s_focal) + shift) % 3));
    return;
  }

  auto model = static_cast<int>(bounded(rng, static_cast<std::uint64_t>(z - 1)));
  if (model >= focal) ++model;
  const Strategy s_model = pop.strategy(model);
  if (s_model == s_focal) return;  // imitation would change nothing

  const PopulationState st = pop.state();
  double f_focal, f_model;
  if (cfg.payoff_mode == PayoffMode::expected) {
    f_focal = expected_payoff(s_focal, st);
    f_model = expected_payoff(s_model, st);
  } else {
    f_focal = sampled_payoff(s_focal, st, cfg, rng);
    f_model = sampled_payoff(s_model, st, cfg, rng);
  }
  if (u01(rng) < fermi(f_model - f_focal, cfg.params.beta)) pop.set_strategy(focal, s_model);
}

}  // namespace detail

// One revision event: a uniformly chosen focal agent either explores (with
// probability mu) or imitates a uniformly chosen other agent with the Fermi
// probability on their payoff difference.
inline void abm_step(Population& pop, const SimConfig& cfg, Rng& rng) {
  detail::abm_step_with(pop, cfg, rng, [&cfg](Strategy s, const PopulationState& st) {
    return average_payoff(s, st, cfg.params);
  });
}

struct AbmResult {
  std::array<double, 3> rho{};         // time-averaged strategy fractions after burn-in
  std::vector<std::uint64_t> visits;   // post-burn-in state visit counts, StateSpace order
  std::uint64_t events_counted = 0;
};

// Called with (event index, state); event 0 reports the initial population.
using AbmObserver = std::function<void(std::uint64_t, const PopulationState&)>;

// Runs `steps` revision events from the given initial state (random population
// when absent), discarding `burn_in` events from the averages. Deterministic
// for a fixed config and seed.
inline AbmResult abm_run(const SimConfig& cfg, std::optional<PopulationState> initial = {},
                         const AbmObserver& observer = {}) {
  cfg.validate();
  const int z = cfg.params.Z;
  Rng rng = make_rng(cfg.seed);
  Population pop = initial ? Population(z, *initial) : Population::random(z, rng);

  const StateSpace space(z);
  AbmResult result;
  result.visits.assign(space.size(), 0);

  // expected-mode payoffs depend only on the state; memoize them
  constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::array<double, 3>> cache;
  if (cfg.payoff_mode == PayoffMode::expected)
    cache.assign(space.size(), {kUnset, kUnset, kUnset});
  auto cached_payoff = [&](Strategy s, const PopulationState& st) {
    double& slot = cache[space.index_of(st)][static_cast<int>(s)];
    if (std::isnan(slot)) slot = average_payoff(s, st, cfg.params);
    return slot;
  };

  if (observer) observer(0, pop.state());
  std::array<std::uint64_t, 3> occupancy{};
  for (std::uint64_t event = 1; event <= cfg.steps; ++event) {
    detail::abm_step_with(pop, cfg, rng, cached_payoff);
    if (event > cfg.burn_in) {
      const PopulationState st = pop.state();
      occupancy[0] += static_cast<std::uint64_t>(st.i_ci);
      occupancy[1] += static_cast<std::uint64_t>(st.i_t);
      occupancy[2] += static_cast<std::uint64_t>(st.i_u(z));
      result.visits[space.index_of(st)] += 1;
    }
    if (observer) observer(event, pop.state());
  }
  result.events_counted = cfg.steps - cfg.burn_in;
  const double norm = static_cast<double>(result.events_counted) * z;
  for (int s = 0; s < 3; ++s) result.rho[s] = static_cast<double>(occupancy[s]) / norm;
  return result;
}

}  // namespace ntg
