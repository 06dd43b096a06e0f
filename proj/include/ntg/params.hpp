#pragma once

#include <optional>
#include <sstream>
#include <string>

#include "ntg/errors.hpp"

namespace ntg {

// All model constants in one validated record. Field names follow the CLI
// flags and CSV column names (--Z, --RT, ...).
struct GameParams {
  int Z = 100;  // population size
  int N = 4;    // game group size
  int M = 2;    // trustworthy count required for investment after round 1
  double tv = 1.0;     // amount invested per round
  double RT = 6.0;     // multiply factor of trustworthy trustees
  double RU = 8.0;     // multiply factor of untrustworthy trustees
  double sigma = 0.1;  // observation cost, charged once per game
  double w = 0.8;      // per-round continuation probability
  double beta = 5.0;   // selection intensity of the pairwise comparison rule
  double mu = 0.01;    // mutation probability per revision event (1/Z when unset)
  std::optional<double> rounds_override;  // replaces the w-derived expected rounds

  // Mean length of a game whose continuation beyond each round has
  // probability w: 1 + w + w^2 + ... = 1/(1-w).
  double expected_rounds() const {
    if (rounds_override) return *rounds_override;
    if (!(w > 0.0 && w < 1.0)) throw validation_error("w: must satisfy 0 < w < 1");
    return 1.0 / (1.0 - w);
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw validation_error(msg); };
    if (N < 2) fail("N: group size must be >= 2, got " + std::to_string(N));
    if (Z < N) fail("Z: population size must be >= N, got Z=" + std::to_string(Z) +
                    " N=" + std::to_string(N));
    if (M < 0 || M > N) fail("M: threshold must satisfy 0 <= M <= N, got " + std::to_string(M));
    if (!(tv > 0.0)) fail("tv: investment must be > 0");
    if (!(RT > 0.0)) fail("RT: multiply factor must be > 0");
    if (!(RU > 0.0)) fail("RU: multiply factor must be > 0");
    if (!(sigma >= 0.0)) fail("sigma: observation cost must be >= 0");
    if (!(w > 0.0 && w < 1.0)) fail("w: continuation probability must satisfy 0 < w < 1");
    if (!(beta >= 0.0)) fail("beta: selection intensity must be >= 0");
    if (!(mu >= 0.0 && mu <= 1.0)) fail("mu: mutation probability must satisfy 0 <= mu <= 1");
    if (rounds_override && !(*rounds_override >= 1.0))
      fail("rounds-override: expected rounds must be >= 1");
  }
};

}  // namespace ntg
