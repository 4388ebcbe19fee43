#pragma once

#include "dindip/common.hpp"

#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace dindip {

/// One sampled point of a discrete run (time = iteration) or of an integrated
/// flow (time = t, step = current integrator step).
template <typename Scalar>
struct TrajectoryRow {
  Scalar time{};
  Scalar step{};
  int backtracks = 0;
  Scalar loss{};
  Scalar grad_norm{};
  Scalar velocity_norm{};
  Scalar lyapunov{};
  Scalar dist_theta0{};
  Scalar err_signal = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar err_obs = std::numeric_limits<Scalar>::quiet_NaN();
};

/// Shortest round-trip decimal for IEEE doubles: 17 significant digits.
inline std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

inline const std::vector<std::string>& discrete_columns() {
  static const std::vector<std::string> cols = {"tau",        "s_tau",       "i_tau",     "loss",    "grad_norm",
                                                "v_norm",     "lyapunov",    "dist_theta0", "err_signal", "err_obs"};
  return cols;
}

inline const std::vector<std::string>& flow_columns() {
  static const std::vector<std::string> cols = {"t",         "loss",        "h",          "lyapunov",
                                                "grad_norm", "dist_theta0", "err_signal", "err_obs"};
  return cols;
}

inline void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

template <typename Scalar>
void write_discrete_row(std::ostream& out, const TrajectoryRow<Scalar>& r) {
  out << static_cast<long long>(r.time) << ',' << format_real(r.step) << ',' << r.backtracks << ','
      << format_real(r.loss) << ',' << format_real(r.grad_norm) << ',' << format_real(r.velocity_norm) << ','
      << format_real(r.lyapunov) << ',' << format_real(r.dist_theta0) << ',' << format_real(r.err_signal) << ','
      << format_real(r.err_obs) << '\n';
}

template <typename Scalar>
void write_flow_row(std::ostream& out, const TrajectoryRow<Scalar>& r) {
  out << format_real(r.time) << ',' << format_real(r.loss) << ',' << format_real(r.step) << ','
      << format_real(r.lyapunov) << ',' << format_real(r.grad_norm) << ',' << format_real(r.dist_theta0) << ','
      << format_real(r.err_signal) << ',' << format_real(r.err_obs) << '\n';
}

inline constexpr const char* kDiscreteUnits =
    "# units: tau=iteration, s_tau=step size, i_tau=backtracks, loss=squared observation units, "
    "grad_norm/v_norm/dist_theta0=parameter units, lyapunov=loss units, err_signal=signal units, "
    "err_obs=observation units";

inline constexpr const char* kFlowUnits =
    "# units: t=continuous time, loss=squared observation units, h=integrator step (time), "
    "lyapunov=loss units, grad_norm/dist_theta0=parameter units, err_signal=signal units, "
    "err_obs=observation units";

template <typename Scalar>
void write_discrete_csv(std::ostream& out, const std::vector<TrajectoryRow<Scalar>>& rows) {
  out << kDiscreteUnits << '\n';
  write_header(out, discrete_columns());
  for (const auto& r : rows) write_discrete_row(out, r);
}

template <typename Scalar>
void write_flow_csv(std::ostream& out, const std::vector<TrajectoryRow<Scalar>>& rows) {
  out << kFlowUnits << '\n';
  write_header(out, flow_columns());
  for (const auto& r : rows) write_flow_row(out, r);
}

}  // namespace dindip
