#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "ntg/abm.hpp"

using namespace ntg;

namespace {

GameParams scaled_baseline(int z) {
  GameParams p;
  p.Z = z;
  p.mu = 1.0 / z;
  return p;
}

struct MoveCounts {
  std::map<std::pair<int, int>, std::uint64_t> by_delta;
  std::uint64_t stays = 0;
  std::uint64_t total = 0;
};

// Empirical one-event transition frequencies out of a fixed state.
MoveCounts count_moves(const PopulationState& start, const SimConfig& cfg, std::uint64_t trials,
                       Rng& rng) {
  const Population initial(cfg.params.Z, start);
  MoveCounts counts;
  for (std::uint64_t k = 0; k < trials; ++k) {
    Population pop = initial;
    abm_step(pop, cfg, rng);
    const PopulationState after = pop.state();
    if (after == start) {
      ++counts.stays;
    } else {
      ++counts.by_delta[{after.i_ci - start.i_ci, after.i_t - start.i_t}];
    }
    ++counts.total;
  }
  return counts;
}

void check_frequency(double observed, double expected, std::uint64_t n) {
  const double sigma = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n));
  CHECK(std::abs(observed - expected) <= 3.0 * sigma + 1e-9);
}

}  // namespace

TEST_CASE("population bookkeeping") {
  Population pop(10, {4, 3});
  CHECK(pop.count(Strategy::CI) == 4);
  CHECK(pop.count(Strategy::T) == 3);
  CHECK(pop.count(Strategy::U) == 3);
  pop.set_strategy(0, Strategy::U);
  CHECK(pop.count(Strategy::CI) == 3);
  CHECK(pop.count(Strategy::U) == 4);
  CHECK(pop.state() == PopulationState{3, 3});

  Rng rng = make_rng(11);
  const Population rnd = Population::random(10, rng);
  std::array<int, 3> tally{};
  for (int a = 0; a < rnd.size(); ++a) tally[static_cast<int>(rnd.strategy(a))] += 1;
  for (Strategy s : kStrategies) CHECK(rnd.count(s) == tally[static_cast<int>(s)]);

  CHECK_THROWS_AS(Population(5, {4, 3}), validation_error);
}

TEST_CASE("realized game: degenerate groups score zero") {
  const GameParams p = scaled_baseline(20);
  Rng rng = make_rng(3);
  for (int k = 0; k < 200; ++k) {
    const RealizedPayoffs no_trustees = play_group_game({4, 0, 0}, p, rng);
    CHECK(no_trustees.ci == 0.0);
    CHECK(no_trustees.t == 0.0);
    CHECK(no_trustees.u == 0.0);
    const RealizedPayoffs no_investors = play_group_game({0, 2, 2}, p, rng);
    CHECK(no_investors.t == 0.0);
    CHECK(no_investors.u == 0.0);
  }
}

TEST_CASE("realized game: rounds override removes all randomness") {
  GameParams p = scaled_baseline(20);
  p.rounds_override = 1.0;
  Rng rng = make_rng(5);
  const Rng untouched = rng;
  const RealizedPayoffs r = play_group_game({2, 1, 1}, p, rng);
  CHECK(rng == untouched);  // no draws consumed
  CHECK(r.ci == group_payoff({2, 1, 1}, Strategy::CI, p));
  CHECK(r.t == group_payoff({2, 1, 1}, Strategy::T, p));
  CHECK(r.u == group_payoff({2, 1, 1}, Strategy::U, p));
  CHECK(r.rounds == 1);
}

TEST_CASE("realized game: blocked continuation is deterministic") {
  const GameParams p = scaled_baseline(20);  // M = 2, comp below has n_t = 1
  Rng rng = make_rng(17);
  for (int k = 0; k < 100; ++k) {
    const RealizedPayoffs r = play_group_game({2, 1, 1}, p, rng);
    CHECK(r.ci == Catch::Approx(1.9).margin(1e-12));
    CHECK(r.t == Catch::Approx(6.0).margin(1e-12));
    CHECK(r.u == Catch::Approx(8.0).margin(1e-12));
  }
}

TEST_CASE("realized game: Monte Carlo mean matches the analytic payoff") {
  GameParams p = scaled_baseline(20);
  p.M = 1;  // continuation active for the composition below
  const GroupComposition comp{2, 1, 1};
  Rng rng = make_rng(2024);
  const std::uint64_t n = 200'000;
  std::array<double, 3> mean{}, m2{};  // Welford running moments
  for (std::uint64_t k = 0; k < n; ++k) {
    const RealizedPayoffs r = play_group_game(comp, p, rng);
    const std::array<double, 3> v{r.ci, r.t, r.u};
    for (int s = 0; s < 3; ++s) {
      const double delta = v[s] - mean[s];
      mean[s] += delta / static_cast<double>(k + 1);
      m2[s] += delta * (v[s] - mean[s]);
    }
  }
  const std::array<double, 3> analytic{group_payoff(comp, Strategy::CI, p),
                                       group_payoff(comp, Strategy::T, p),
                                       group_payoff(comp, Strategy::U, p)};
  for (int s = 0; s < 3; ++s) {
    const double se = std::sqrt(m2[s] / static_cast<double>(n) / static_cast<double>(n));
    CHECK(std::abs(mean[s] - analytic[s]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("realized game: round counts are geometric") {
  const GameParams p = scaled_baseline(20);  // w = 0.8, mean length 5
  Rng rng = make_rng(77);
  const std::uint64_t n = 1'000'000;
  double total = 0.0;
  for (std::uint64_t k = 0; k < n; ++k)
    total += static_cast<double>(play_group_game({2, 1, 1}, p, rng).rounds);
  const double mean = total / n;
  const double sigma_mean = std::sqrt(p.w) / (1.0 - p.w) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - 5.0) <= 3.0 * sigma_mean);
}

TEST_CASE("group sampling matches the hypergeometric distribution") {
  const GameParams p = scaled_baseline(20);
  const PopulationState state{10, 5};
  Rng rng = make_rng(99);
  const std::uint64_t n = 1'000'000;
  std::map<std::pair<int, int>, std::uint64_t> freq;
  for (std::uint64_t k = 0; k < n; ++k) {
    const GroupComposition g = sample_group_for(Strategy::CI, state, p, rng);
    REQUIRE(g.size() == p.N);
    REQUIRE(g.n_ci >= 1);
    // composition of the *others*
    freq[{g.n_ci - 1, g.n_t}] += 1;
  }
  double tv_distance = 0.0;
  for (int j_ci = 0; j_ci <= p.N - 1; ++j_ci)
    for (int j_t = 0; j_t + j_ci <= p.N - 1; ++j_t) {
      const double expected =
          hypergeom_pmf(j_ci, j_t, p.N - 1, state.i_ci - 1, state.i_t, p.Z - 1);
      const auto it = freq.find({j_ci, j_t});
      const double observed =
          it == freq.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(n);
      tv_distance += std::abs(observed - expected);
    }
  tv_distance *= 0.5;
  CHECK(tv_distance < 0.005);
}

TEST_CASE("revision events reproduce the analytic transition probabilities") {
  const PopulationState start{10, 5};

  SECTION("mutation-selection at baseline-scaled parameters") {
    SimConfig cfg;
    cfg.params = scaled_baseline(20);
    Rng rng = make_rng(4242);
    const std::uint64_t trials = 1'000'000;
    const MoveCounts counts = count_moves(start, cfg, trials, rng);
    const OutTransitions t = state_out_transitions(start, cfg.params);
    auto freq = [&](int d_ci, int d_t) {
      const auto it = counts.by_delta.find({d_ci, d_t});
      return it == counts.by_delta.end()
                 ? 0.0
                 : static_cast<double>(it->second) / static_cast<double>(trials);
    };
    check_frequency(freq(+1, 0), t.u_to_ci, trials);
    check_frequency(freq(-1, 0), t.ci_to_u, trials);
    check_frequency(freq(0, +1), t.u_to_t, trials);
    check_frequency(freq(0, -1), t.t_to_u, trials);
    check_frequency(freq(-1, +1), t.ci_to_t, trials);
    check_frequency(freq(+1, -1), t.t_to_ci, trials);
    check_frequency(static_cast<double>(counts.stays) / static_cast<double>(trials),
                    t.self_loop, trials);
  }

  SECTION("mu = 1 mutates to each other strategy with probability 1/2") {
    SimConfig cfg;
    cfg.params = scaled_baseline(20);
    cfg.params.mu = 1.0;
    Rng rng = make_rng(31);
    const std::uint64_t trials = 100'000;
    const MoveCounts counts = count_moves(start, cfg, trials, rng);
    // a CI focal (probability 10/20) moves to T or U with probability 1/2 each
    const double to_t = static_cast<double>(counts.by_delta.at({-1, +1})) / trials;
    const double to_u = static_cast<double>(counts.by_delta.at({-1, 0})) / trials;
    check_frequency(to_t, 0.25, trials);
    check_frequency(to_u, 0.25, trials);
    CHECK(counts.stays == 0);  // every event mutates somewhere
  }
}

TEST_CASE("monomorphic population without mutation never changes") {
  SimConfig cfg;
  cfg.params = scaled_baseline(20);
  cfg.params.mu = 0.0;
  Population pop(20, {20, 0});
  Rng rng = make_rng(8);
  for (int k = 0; k < 10'000; ++k) abm_step(pop, cfg, rng);
  CHECK(pop.state() == PopulationState{20, 0});
}

TEST_CASE("simulation runs are deterministic in the seed") {
  SimConfig cfg;
  cfg.params = scaled_baseline(12);
  cfg.steps = 20'000;
  cfg.burn_in = 1'000;
  cfg.seed = 404;

  const AbmResult a = abm_run(cfg);
  const AbmResult b = abm_run(cfg);
  CHECK(a.rho == b.rho);
  CHECK(a.visits == b.visits);
  CHECK(a.events_counted == cfg.steps - cfg.burn_in);

  SimConfig other = cfg;
  other.seed = 405;
  const AbmResult c = abm_run(other);
  CHECK(a.visits != c.visits);
}

TEST_CASE("abm_run with a payoff cache replays plain abm_step exactly") {
  SimConfig cfg;
  cfg.params = scaled_baseline(12);
  cfg.steps = 2'000;
  cfg.burn_in = 0;
  cfg.seed = 15;

  PopulationState last{};
  abm_run(cfg, PopulationState{4, 4},
          [&](std::uint64_t, const PopulationState& s) { last = s; });

  Rng rng = make_rng(cfg.seed);
  Population pop(cfg.params.Z, {4, 4});
  for (std::uint64_t k = 0; k < cfg.steps; ++k) abm_step(pop, cfg, rng);
  CHECK(pop.state() == last);
}

TEST_CASE("observer sees the initial state and every event") {
  SimConfig cfg;
  cfg.params = scaled_baseline(8);
  cfg.steps = 500;
  cfg.burn_in = 10;
  std::uint64_t calls = 0, first = 1;
  abm_run(cfg, PopulationState{3, 3}, [&](std::uint64_t e, const PopulationState&) {
    if (calls == 0) first = e;
    ++calls;
  });
  CHECK(first == 0);
  CHECK(calls == cfg.steps + 1);
}

TEST_CASE("time averages at mu = 1 are symmetric") {
  SimConfig cfg;
  cfg.params = scaled_baseline(20);
  cfg.params.mu = 1.0;
  cfg.steps = 1'000'000;
  cfg.burn_in = 50'000;
  cfg.seed = 7;
  const AbmResult r = abm_run(cfg);
  for (int s = 0; s < 3; ++s) CHECK(r.rho[s] == Catch::Approx(1.0 / 3.0).margin(0.01));
}

TEST_CASE("visit histogram converges to the stationary distribution") {
  const GameParams p = scaled_baseline(12);
  const TransitionChain chain = build_chain(p);
  const StationaryResult exact = stationary(chain, {1e-13, 10'000'000});

  double previous = 1.0;
  for (const std::uint64_t steps : {200'000ull, 400'000ull, 800'000ull, 1'600'000ull}) {
    SimConfig cfg;
    cfg.params = p;
    cfg.steps = steps;
    cfg.burn_in = 20'000;
    cfg.seed = 1234;
    const AbmResult r = abm_run(cfg, PopulationState{4, 4});
    double tv_distance = 0.0;
    for (std::size_t k = 0; k < r.visits.size(); ++k) {
      const double empirical =
          static_cast<double>(r.visits[k]) / static_cast<double>(r.events_counted);
      tv_distance += std::abs(empirical - exact.distribution[k]);
    }
    tv_distance *= 0.5;
    CHECK(tv_distance < previous);
    previous = tv_distance;
  }
  CHECK(previous < 0.05);
}
