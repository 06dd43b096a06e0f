#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ntg/game.hpp"

namespace ntg {

// Imitation probability of the pairwise comparison rule, 1/(1 + exp(-beta*delta)).
// Saturates cleanly for any magnitude of beta*delta.
inline double fermi(double delta, double beta) {
  const double x = beta * delta;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

// One-event probability that an agent of strategy a (count i_a, payoff f_a)
// becomes an agent of strategy b: social learning with probability 1 - mu,
// uniform exploration over the other two strategies with probability mu.
inline double move_probability(double i_a, double i_b, double f_a, double f_b,
                               const GameParams& p) {
  return (1.0 - p.mu) * (i_a / p.Z) * (i_b / (p.Z - 1.0)) * fermi(f_b - f_a, p.beta) +
         p.mu * i_a / (2.0 * p.Z);
}

// Average payoffs per strategy; skipped (left 0) when the multiplying count is
// zero or when mu = 1 makes imitation irrelevant.
inline std::array<double, 3> state_payoffs(const PopulationState& s, const GameParams& p) {
  std::array<double, 3> f{};
  if (p.mu < 1.0) {
    for (Strategy strat : kStrategies)
      if (s.count(strat, p.Z) > 0) f[static_cast<int>(strat)] = average_payoff(strat, s, p);
  }
  return f;
}

}  // namespace detail

// Probability that one revision event turns an agent of strategy a into one of
// strategy b, at the given population state.
inline double pair_transition(Strategy a, Strategy b, const PopulationState& state,
                              const GameParams& p) {
  if (a == b) throw validation_error("pair_transition: strategies must differ");
  p.validate();
  validate_state(state, p);
  const std::array<double, 3> f = detail::state_payoffs(state, p);
  return detail::move_probability(state.count(a, p.Z), state.count(b, p.Z),
                                  f[static_cast<int>(a)], f[static_cast<int>(b)], p);
}

// The six adjacent-move probabilities out of one state plus the self-loop.
// Moves that would leave the state simplex carry a vanishing count factor and
// are exactly 0.
struct OutTransitions {
  double u_to_ci = 0;  // (i_ci + 1, i_t)
  double ci_to_u = 0;  // (i_ci - 1, i_t)
  double u_to_t = 0;   // (i_ci, i_t + 1)
  double t_to_u = 0;   // (i_ci, i_t - 1)
  double ci_to_t = 0;  // (i_ci - 1, i_t + 1)
  double t_to_ci = 0;  // (i_ci + 1, i_t - 1)
  double self_loop = 1;

  double sum_moves() const {
    return u_to_ci + ci_to_u + u_to_t + t_to_u + ci_to_t + t_to_ci;
  }
};

inline OutTransitions state_out_transitions(const PopulationState& s, const GameParams& p) {
  p.validate();
  validate_state(s, p);
  const double n_ci = s.i_ci, n_t = s.i_t, n_u = s.i_u(p.Z);
  const std::array<double, 3> f = detail::state_payoffs(s, p);
  const double f_ci = f[0], f_t = f[1], f_u = f[2];
  OutTransitions t;
  t.u_to_ci = detail::move_probability(n_u, n_ci, f_u, f_ci, p);
  t.ci_to_u = detail::move_probability(n_ci, n_u, f_ci, f_u, p);
  t.u_to_t = detail::move_probability(n_u, n_t, f_u, f_t, p);
  t.t_to_u = detail::move_probability(n_t, n_u, f_t, f_u, p);
  t.ci_to_t = detail::move_probability(n_ci, n_t, f_ci, f_t, p);
  t.t_to_ci = detail::move_probability(n_t, n_ci, f_t, f_ci, p);
  t.self_loop = 1.0 - t.sum_moves();
  return t;
}

// All population states with i_ci + i_t <= Z, enumerated lexicographically by
// (i_ci, i_t). This order is part of the output-file contract: rows of every
// artifact follow it, so files are bit-comparable across runs.
class StateSpace {
 public:
  explicit StateSpace(int z) : z_(z) {
    if (z < 1) throw validation_error("state space: population size must be >= 1");
  }

  int population() const { return z_; }
  std::size_t size() const {
    return static_cast<std::size_t>(z_ + 1) * (z_ + 2) / 2;
  }

  std::size_t index_of(const PopulationState& s) const {
    // rows of constant i_ci, row i holds Z + 1 - i entries
    return static_cast<std::size_t>(s.i_ci) * (2 * z_ + 3 - s.i_ci) / 2 + s.i_t;
  }

  PopulationState state_at(std::size_t index) const {
    int i_ci = 0;
    std::size_t row = static_cast<std::size_t>(z_) + 1;
    while (index >= row) {
      index -= row;
      --row;
      ++i_ci;
    }
    return {i_ci, static_cast<int>(index)};
  }

  std::vector<PopulationState> all_states() const {
    std::vector<PopulationState> out;
    out.reserve(size());
    for (int i_ci = 0; i_ci <= z_; ++i_ci)
      for (int i_t = 0; i_t <= z_ - i_ci; ++i_t) out.push_back({i_ci, i_t});
    return out;
  }

 private:
  int z_;
};

// Sparse row-stochastic one-event transition matrix over the full state
// space: row k holds the probabilities of moving from states[k] to each of
// its at most 6 adjacent states plus the self-loop, sorted by column.
struct TransitionChain {
  GameParams params;
  StateSpace space;
  std::vector<PopulationState> states;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  std::vector<std::array<double, 3>> payoffs;  // average payoff per strategy at each state

  std::size_t size() const { return states.size(); }

  double entry(std::size_t from, std::size_t to) const {
    for (std::size_t k = row_ptr[from]; k < row_ptr[from + 1]; ++k)
      if (cols[k] == to) return vals[k];
    return 0.0;
  }
};

inline TransitionChain build_chain(const GameParams& p) {
  p.validate();
  TransitionChain chain{p, StateSpace(p.Z), {}, {}, {}, {}, {}};
  chain.states = chain.space.all_states();
  const std::size_t n = chain.states.size();
  chain.payoffs.resize(n);
  chain.row_ptr.assign(n + 1, 0);
  chain.cols.reserve(7 * n);
  chain.vals.reserve(7 * n);

  for (std::size_t k = 0; k < n; ++k) {
    const PopulationState s = chain.states[k];
    if (p.mu < 1.0) {
      for (Strategy strat : kStrategies)
        if (s.count(strat, p.Z) > 0)
          chain.payoffs[k][static_cast<int>(strat)] = average_payoff(strat, s, p);
    }
    const auto& f = chain.payoffs[k];
    const double n_ci = s.i_ci, n_t = s.i_t, n_u = s.i_u(p.Z);

    struct Move {
      int d_ci, d_t;
      double prob;
    };
    const std::array<Move, 6> moves{{
        {+1, 0, detail::move_probability(n_u, n_ci, f[2], f[0], p)},   // U -> CI
        {-1, 0, detail::move_probability(n_ci, n_u, f[0], f[2], p)},   // CI -> U
        {0, +1, detail::move_probability(n_u, n_t, f[2], f[1], p)},    // U -> T
        {0, -1, detail::move_probability(n_t, n_u, f[1], f[2], p)},    // T -> U
        {-1, +1, detail::move_probability(n_ci, n_t, f[0], f[1], p)},  // CI -> T
        {+1, -1, detail::move_probability(n_t, n_ci, f[1], f[0], p)},  // T -> CI
    }};

    std::array<std::pair<std::uint32_t, double>, 7> row;
    std::size_t len = 0;
    double total = 0.0;
    for (const Move& m : moves) {
      total += m.prob;
      if (m.prob > 0.0) {
        const PopulationState to{s.i_ci + m.d_ci, s.i_t + m.d_t};
        row[len++] = {static_cast<std::uint32_t>(chain.space.index_of(to)), m.prob};
      }
    }
    const double self_loop = 1.0 - total;
    if (self_loop > 0.0) row[len++] = {static_cast<std::uint32_t>(k), self_loop};
    std::sort(row.begin(), row.begin() + len,
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t e = 0; e < len; ++e) {
      chain.cols.push_back(row[e].first);
      chain.vals.push_back(row[e].second);
    }
    chain.row_ptr[k + 1] = chain.cols.size();
  }
  return chain;
}

struct SolverOptions {
  double tol = 1e-12;                    // L1 change of successive iterates
  std::uint64_t max_iters = 10'000'000;  // matrix-vector products before giving up
};

struct StationaryResult {
  std::vector<double> distribution;
  std::array<double, 3> rho{};   // stationary-weighted strategy fractions
  std::array<double, 3> fbar{};  // stationary-weighted average payoffs
  double residual = 0.0;         // L1 fixed-point residual of the returned vector
  std::uint64_t iterations = 0;
};

namespace detail {

// The transition matrix in incoming orientation, reorganized so that within a
// row of constant i_ci every one of the 7 stencil legs reads its source at a
// constant index offset. The power iteration then runs on unit-stride streams
// instead of gathers. Sources that would fall outside the state space carry
// weight 0 and land in the zeroed guard band around the vector.
struct IncomingStencil {
  std::size_t n = 0;
  std::size_t pad = 0;
  std::array<std::vector<double>, 7> weight;  // weight[leg][state]

  // leg -> index offset of the source state, for destination row i_ci = i
  static std::array<std::ptrdiff_t, 7> leg_offsets(int z, int i) {
    return {
        0,                        // self
        -(std::ptrdiff_t)(z + 2 - i),  // from (i-1, j)   via U -> CI
        +(std::ptrdiff_t)(z + 1 - i),  // from (i+1, j)   via CI -> U
        -1,                       // from (i, j-1)   via U -> T
        +1,                       // from (i, j+1)   via T -> U
        +(std::ptrdiff_t)(z - i),      // from (i+1, j-1) via CI -> T
        -(std::ptrdiff_t)(z + 1 - i),  // from (i-1, j+1) via T -> CI
    };
  }

  static IncomingStencil from_chain(const TransitionChain& chain) {
    const int z = chain.params.Z;
    IncomingStencil st;
    st.n = chain.size();
    st.pad = static_cast<std::size_t>(z) + 3;
    for (auto& w : st.weight) w.assign(st.n, 0.0);
    for (std::size_t from = 0; from < st.n; ++from) {
      const PopulationState a = chain.states[from];
      for (std::size_t e = chain.row_ptr[from]; e < chain.row_ptr[from + 1]; ++e) {
        const std::size_t to = chain.cols[e];
        const PopulationState b = chain.states[to];
        const auto offs = leg_offsets(z, b.i_ci);
        const std::ptrdiff_t rel = static_cast<std::ptrdiff_t>(from) -
                                   static_cast<std::ptrdiff_t>(to);
        std::size_t leg = 7;
        for (std::size_t m = 0; m < 7; ++m)
          if (offs[m] == rel) {
            leg = m;
            break;
          }
        if (leg == 7)
          throw validation_error("transition chain has an entry off the adjacency stencil");
        st.weight[leg][to] += chain.vals[e];
      }
    }
    return st;
  }

  // next = P^T * cur, evaluated row-of-constant-i_ci at a time.
  void apply(int z, const double* cur, double* next) const {
    std::size_t k = 0;
    for (int i = 0; i <= z; ++i) {
      const std::ptrdiff_t len = z + 1 - i;
      const auto offs = leg_offsets(z, i);
      const double* w0 = weight[0].data() + k;
      const double* w1 = weight[1].data() + k;
      const double* w2 = weight[2].data() + k;
      const double* w3 = weight[3].data() + k;
      const double* w4 = weight[4].data() + k;
      const double* w5 = weight[5].data() + k;
      const double* w6 = weight[6].data() + k;
      const double* c = cur + k;
      double* out = next + k;
      for (std::ptrdiff_t j = 0; j < len; ++j) {
        out[j] = w0[j] * c[j] + w1[j] * c[j + offs[1]] + w2[j] * c[j + offs[2]] +
                 w3[j] * c[j - 1] + w4[j] * c[j + 1] + w5[j] * c[j + offs[5]] +
                 w6[j] * c[j + offs[6]];
      }
      k += static_cast<std::size_t>(len);
    }
  }
};

}  // namespace detail

// Stationary distribution of the chain by power iteration: pi <- pi * P until
// the L1 change of successive iterates drops below opt.tol. The initial vector
// is uniform unless one is supplied. Throws nonergodic_error for mu = 0 (three
// absorbing states, no unique answer) and solver_error on non-convergence.
inline StationaryResult stationary(const TransitionChain& chain, const SolverOptions& opt = {},
                                   const std::vector<double>& initial = {}) {
  if (chain.params.mu == 0.0)
    throw nonergodic_error(
        "stationary: mu = 0 leaves three absorbing states; the stationary distribution "
        "is not unique");
  if (!(opt.tol > 0.0)) throw validation_error("stationary: tol must be > 0");

  const std::size_t n = chain.size();
  const int z = chain.params.Z;
  const auto stencil = detail::IncomingStencil::from_chain(chain);
  const std::size_t pad = stencil.pad;

  // guard bands stay zero; out-of-range stencil legs read them with weight 0
  std::vector<double> buf_a(n + 2 * pad, 0.0), buf_b(n + 2 * pad, 0.0);
  double* cur = buf_a.data() + pad;
  double* nxt = buf_b.data() + pad;

  if (initial.empty()) {
    std::fill(cur, cur + n, 1.0 / static_cast<double>(n));
  } else {
    if (initial.size() != n)
      throw validation_error("stationary: initial vector size does not match the state space");
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!(initial[k] >= 0.0))
        throw validation_error("stationary: initial vector entries must be >= 0");
      sum += initial[k];
    }
    if (!(sum > 0.0)) throw validation_error("stationary: initial vector must not be all zero");
    for (std::size_t k = 0; k < n; ++k) cur[k] = initial[k] / sum;
  }

  StationaryResult result;
  double change = std::numeric_limits<double>::infinity();
  while (result.iterations < opt.max_iters) {
    stencil.apply(z, cur, nxt);
    ++result.iterations;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += nxt[k];
    const double inv = 1.0 / sum;
    change = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      nxt[k] *= inv;
      change += std::abs(nxt[k] - cur[k]);
    }
    std::swap(cur, nxt);
    if (change <= opt.tol) break;
  }
  if (change > opt.tol)
    throw solver_error("stationary: no convergence after " + std::to_string(result.iterations) +
                       " iterations (last L1 change " + std::to_string(change) + ")");

  // residual of the vector actually returned
  stencil.apply(z, cur, nxt);
  result.residual = 0.0;
  for (std::size_t k = 0; k < n; ++k) result.residual += std::abs(nxt[k] - cur[k]);

  result.distribution.assign(cur, cur + n);
  for (std::size_t k = 0; k < n; ++k) {
    const PopulationState s = chain.states[k];
    const double p = result.distribution[k];
    result.rho[0] += p * s.i_ci / z;
    result.rho[1] += p * s.i_t / z;
    result.rho[2] += p * s.i_u(z) / z;
    for (int strat = 0; strat < 3; ++strat) result.fbar[strat] += p * chain.payoffs[k][strat];
  }
  return result;
}

// Direct stationary solve for small chains: Gaussian elimination on P^T - I
// with one equation replaced by the normalization sum(pi) = 1. Quadratic
// memory, cubic time; intended as an independent oracle for the sparse solver.
inline std::vector<double> stationary_dense(const TransitionChain& chain) {
  if (chain.params.mu == 0.0)
    throw nonergodic_error("stationary_dense: mu = 0 chains have no unique distribution");
  const std::size_t n = chain.size();
  if (n > 861)  // Z = 40
    throw validation_error("stationary_dense: limited to Z <= 40 (" + std::to_string(n) +
                           " states requested)");

  std::vector<double> a(n * n, 0.0), b(n, 0.0);
  for (std::size_t from = 0; from < n; ++from)
    for (std::size_t e = chain.row_ptr[from]; e < chain.row_ptr[from + 1]; ++e)
      a[static_cast<std::size_t>(chain.cols[e]) * n + from] += chain.vals[e];
  for (std::size_t k = 0; k < n; ++k) a[k * n + k] -= 1.0;
  for (std::size_t c = 0; c < n; ++c) a[(n - 1) * n + c] = 1.0;
  b[n - 1] = 1.0;

  // partial pivoting
  std::vector<std::size_t> perm(n);
  for (std::size_t k = 0; k < n; ++k) perm[k] = k;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a[perm[col] * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(a[perm[r] * n + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best == 0.0) throw solver_error("stationary_dense: singular system");
    std::swap(perm[col], perm[piv]);
    const double* prow = &a[perm[col] * n];
    const double diag = prow[col];
    for (std::size_t r = col + 1; r < n; ++r) {
      double* row = &a[perm[r] * n];
      const double factor = row[col] / diag;
      if (factor == 0.0) continue;
      row[col] = 0.0;
      for (std::size_t c = col + 1; c < n; ++c) row[c] -= factor * prow[c];
      b[perm[r]] -= factor * b[perm[col]];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    const double* row = &a[perm[k] * n];
    double acc = b[perm[k]];
    for (std::size_t c = k + 1; c < n; ++c) acc -= row[c] * x[c];
    x[k] = acc / row[k];
  }
  return x;
}

// Net per-state drift of the strategy counts in one revision event, expressed
// in the (u_CI, u_T) basis; the U component is the negated sum.
struct GradientField {
  StateSpace space;
  std::vector<PopulationState> states;
  std::vector<std::array<double, 2>> drift;  // (drift_ci, drift_t)

  double drift_u(std::size_t k) const { return -(drift[k][0] + drift[k][1]); }
};

inline GradientField gradient_field(const GameParams& p) {
  p.validate();
  GradientField field{StateSpace(p.Z), {}, {}};
  field.states = field.space.all_states();
  field.drift.resize(field.states.size());
  for (std::size_t k = 0; k < field.states.size(); ++k) {
    const OutTransitions t = state_out_transitions(field.states[k], p);
    field.drift[k] = {(t.u_to_ci + t.t_to_ci) - (t.ci_to_u + t.ci_to_t),
                      (t.u_to_t + t.ci_to_t) - (t.t_to_u + t.t_to_ci)};
  }
  return field;
}

struct StrategySummaries {
  std::array<double, 3> rho{};
  std::array<double, 3> fbar{};
};

// Stationary-weighted strategy fractions and average payoffs. Recomputes the
// payoffs from the game definition rather than reusing the chain's cache.
inline StrategySummaries summaries(const TransitionChain& chain, const std::vector<double>& pi,
                                   const GameParams& p) {
  if (pi.size() != chain.size())
    throw validation_error("summaries: distribution size does not match the chain");
  StrategySummaries out;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    const PopulationState s = chain.states[k];
    out.rho[0] += pi[k] * s.i_ci / p.Z;
    out.rho[1] += pi[k] * s.i_t / p.Z;
    out.rho[2] += pi[k] * s.i_u(p.Z) / p.Z;
    for (Strategy strat : kStrategies) {
      const int idx = static_cast<int>(strat);
      if (s.count(strat, p.Z) > 0 && pi[k] != 0.0)
        out.fbar[idx] += pi[k] * average_payoff(strat, s, p);
    }
  }
  return out;
}

}  // namespace ntg
