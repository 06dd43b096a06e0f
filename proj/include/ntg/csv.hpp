#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "ntg/abm.hpp"
#include "ntg/errors.hpp"
#include "ntg/markov.hpp"

namespace ntg {

// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kStationaryCsvHeader = "i_CI,i_T,i_U,probability";
inline constexpr const char* kGradientCsvHeader = "i_CI,i_T,drift_CI,drift_T";
inline constexpr const char* kTimeSeriesCsvHeader = "event,i_CI,i_T,i_U";
inline constexpr const char* kHistogramCsvHeader = "i_CI,i_T,i_U,visits";
inline constexpr const char* kSummaryCsvHeader =
    "Z,N,M,tv,RT,RU,sigma,w,beta,mu,rounds_override,"
    "rho_CI,rho_T,rho_U,fbar_CI,fbar_T,fbar_U,residual,iterations";
inline constexpr int kSummaryCsvSchemaVersion = 1;

inline void write_stationary_csv(std::ostream& out, const TransitionChain& chain,
                                 const std::vector<double>& pi) {
  out << kStationaryCsvHeader << '\n';
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const PopulationState s = chain.states[k];
    out << s.i_ci << ',' << s.i_t << ',' << s.i_u(chain.params.Z) << ','
        << format_double(pi[k]) << '\n';
  }
}

inline void write_gradient_csv(std::ostream& out, const GradientField& field) {
  out << kGradientCsvHeader << '\n';
  for (std::size_t k = 0; k < field.states.size(); ++k) {
    out << field.states[k].i_ci << ',' << field.states[k].i_t << ','
        << format_double(field.drift[k][0]) << ',' << format_double(field.drift[k][1]) << '\n';
  }
}

inline void write_histogram_csv(std::ostream& out, const StateSpace& space,
                                const std::vector<std::uint64_t>& visits) {
  out << kHistogramCsvHeader << '\n';
  for (std::size_t k = 0; k < visits.size(); ++k) {
    const PopulationState s = space.state_at(k);
    out << s.i_ci << ',' << s.i_t << ',' << s.i_u(space.population()) << ',' << visits[k]
        << '\n';
  }
}

// Per-point result of a stationary solve. Wall time is reported on stderr and
// in logs only; artifact files must be byte-identical across reruns.
struct SummaryRow {
  GameParams params;
  std::array<double, 3> rho{};
  std::array<double, 3> fbar{};
  double residual = 0.0;
  std::uint64_t iterations = 0;
  double wall_seconds = 0.0;
};

inline void write_summary_row(std::ostream& out, const SummaryRow& row) {
  const GameParams& p = row.params;
  out << p.Z << ',' << p.N << ',' << p.M << ',' << format_double(p.tv) << ','
      << format_double(p.RT) << ',' << format_double(p.RU) << ',' << format_double(p.sigma)
      << ',' << format_double(p.w) << ',' << format_double(p.beta) << ','
      << format_double(p.mu) << ','
      << (p.rounds_override ? format_double(*p.rounds_override) : std::string{}) << ','
      << format_double(row.rho[0]) << ',' << format_double(row.rho[1]) << ','
      << format_double(row.rho[2]) << ',' << format_double(row.fbar[0]) << ','
      << format_double(row.fbar[1]) << ',' << format_double(row.fbar[2]) << ','
      << format_double(row.residual) << ',' << row.iterations << '\n';
}

inline std::ofstream open_output_file(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw validation_error("cannot open output file: " + path);
  return out;
}

}  // namespace ntg
