#pragma once

#include <array>
#include <string_view>

#include "ntg/combinatorics.hpp"
#include "ntg/errors.hpp"
#include "ntg/params.hpp"

namespace ntg {

// CI invests conditionally and pays the observation cost; T returns the
// received fund multiplied by RT each round; U keeps RU times the received
// fund and returns nothing.
enum class Strategy { CI = 0, T = 1, U = 2 };

inline constexpr std::array<Strategy, 3> kStrategies{Strategy::CI, Strategy::T, Strategy::U};

constexpr std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::CI: return "CI";
    case Strategy::T: return "T";
    case Strategy::U: return "U";
  }
  return "?";
}

inline int heaviside(int k) { return k >= 0 ? 1 : 0; }

// Composition of one sampled game group, focal agent included.
struct GroupComposition {
  int n_ci = 0;
  int n_t = 0;
  int n_u = 0;

  int size() const { return n_ci + n_t + n_u; }
  int count(Strategy s) const {
    return s == Strategy::CI ? n_ci : s == Strategy::T ? n_t : n_u;
  }
  int& count(Strategy s) {
    return s == Strategy::CI ? n_ci : s == Strategy::T ? n_t : n_u;
  }
  bool operator==(const GroupComposition&) const = default;
};

// Population state (i_ci, i_t); the untrustworthy count is implied, i_u = Z - i_ci - i_t.
struct PopulationState {
  int i_ci = 0;
  int i_t = 0;

  int i_u(int z) const { return z - i_ci - i_t; }
  int count(Strategy s, int z) const {
    return s == Strategy::CI ? i_ci : s == Strategy::T ? i_t : i_u(z);
  }
  bool operator==(const PopulationState&) const = default;
};

inline void validate_composition(const GroupComposition& g, const GameParams& p) {
  if (g.n_ci < 0 || g.n_t < 0 || g.n_u < 0 || g.size() != p.N)
    throw validation_error("group composition: counts must be nonnegative and sum to N");
}

inline void validate_state(const PopulationState& s, const GameParams& p) {
  if (s.i_ci < 0 || s.i_t < 0 || s.i_ci + s.i_t > p.Z)
    throw validation_error("population state: need i_CI >= 0, i_T >= 0, i_CI + i_T <= Z");
}

// Expected payoff of one agent of the given strategy from a single repeated
// game in a group with the given full composition (focal agent included).
//
// All invested rounds are worth the same to each member: per round, each of
// the n_t + n_u trustees receives n_ci*tv/(n_t + n_u); T returns RT*tv/(n_t + n_u)
// to every investor and keeps RT times its share, U keeps RU times its share.
// Round 1 is always invested; the expected r - 1 further rounds are invested
// only when the trustworthy count reaches the threshold M. CI pays the
// observation cost sigma once per game, except in the no-trustee group where
// no game happens at all.
inline double group_payoff(const GroupComposition& g, Strategy focal, const GameParams& p) {
  validate_composition(g, p);
  if (g.count(focal) < 1)
    throw validation_error("group_payoff: focal strategy absent from the group");
  const int trustees = g.n_t + g.n_u;
  const double continuation = (p.expected_rounds() - 1.0) * heaviside(g.n_t - p.M);
  switch (focal) {
    case Strategy::CI: {
      if (trustees == 0) return 0.0;
      const double base = p.RT * g.n_t * p.tv / trustees - p.tv;
      return base + base * continuation - p.sigma;
    }
    case Strategy::T: {
      const double base = p.RT * g.n_ci * p.tv / trustees;
      return base + base * continuation;
    }
    case Strategy::U: {
      const double base = p.RU * g.n_ci * p.tv / trustees;
      return base + base * continuation;
    }
  }
  return 0.0;
}

// Expected group_payoff for a focal agent of strategy s in the given
// population state: the other N-1 group members are drawn without replacement
// from the remaining Z-1 agents. Defined as 0 when no agent plays s; every use
// in the dynamics multiplies it by that count, so the convention is inert.
inline double average_payoff(Strategy s, const PopulationState& state, const GameParams& p) {
  p.validate();
  validate_state(state, p);
  if (state.count(s, p.Z) == 0) return 0.0;

  std::array<int, 3> pool{state.i_ci, state.i_t, state.i_u(p.Z)};
  pool[static_cast<int>(s)] -= 1;
  const int draws = p.N - 1;

  double acc = 0.0;
  for (int j_ci = 0; j_ci <= std::min(draws, pool[0]); ++j_ci) {
    for (int j_t = 0; j_t <= std::min(draws - j_ci, pool[1]); ++j_t) {
      const int j_u = draws - j_ci - j_t;
      if (j_u > pool[2]) continue;
      const double weight = hypergeom_pmf(j_ci, j_t, draws, pool[0], pool[1], p.Z - 1);
      if (weight == 0.0) continue;
      GroupComposition g{j_ci, j_t, j_u};
      g.count(s) += 1;
      acc += weight * group_payoff(g, s, p);
    }
  }
  return acc;
}

}  // namespace ntg
