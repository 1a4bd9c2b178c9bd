// Tracking metrics: cumulative target tracking error (CTTE), trajectory path
// length V(T), cumulative noise statistics N1(T), N2(T).
#pragma once

#include "toa_track/core.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace toa {

struct CtteSeries {
  double total = 0.0;
  std::vector<double> cumulative;
};

/// sum_t ||x_t - x_t*|| and its running partial sums.
template <int Dim>
CtteSeries ctte(std::span<const Vec<Dim>> estimates, std::span<const Vec<Dim>> truth) {
  if (estimates.size() != truth.size()) {
    throw DomainError("CTTE needs equal-length series (" + std::to_string(estimates.size()) + " vs " +
                      std::to_string(truth.size()) + ")");
  }
  CtteSeries out;
  out.cumulative.reserve(estimates.size());
  for (std::size_t t = 0; t < estimates.size(); ++t) {
    out.total += (estimates[t] - truth[t]).norm();
    out.cumulative.push_back(out.total);
  }
  return out;
}

/// sum_{t=1}^{T-1} ||p_{t+1} - p_t||
template <int Dim>
double path_length(std::span<const Vec<Dim>> points) {
  if (points.empty()) throw DomainError("path_length needs at least one point");
  double total = 0.0;
  for (std::size_t t = 1; t < points.size(); ++t) total += (points[t] - points[t - 1]).norm();
  return total;
}

struct NoiseCumulants {
  double N1 = 0.0;  ///< sum sigma_t
  double N2 = 0.0;  ///< sum sigma_t^2
};

inline NoiseCumulants noise_cumulants(std::span<const double> sigmas) {
  NoiseCumulants out;
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw DomainError("noise levels must be >= 0");
    out.N1 += s;
    out.N2 += s * s;
  }
  // Cauchy-Schwarz: N1 <= sqrt(T N2)
  const double bound = std::sqrt(static_cast<double>(sigmas.size()) * out.N2);
  if (out.N1 > bound * (1.0 + 1e-12) + 1e-300) {
    throw Error("noise cumulants violate N1 <= sqrt(T N2)");
  }
  return out;
}

/// Mean increment of a cumulative series over consecutive non-overlapping
/// windows: slope_k = (c[(k+1)w - 1] - c[kw - 1]) / w with c[-1] = 0. A
/// trailing partial window is dropped.
inline std::vector<double> growth_profile(std::span<const double> cumulative, int window) {
  if (window < 2) throw DomainError("growth_profile window must be >= 2");
  if (static_cast<std::size_t>(window) > cumulative.size()) {
    throw DomainError("growth_profile window exceeds series length");
  }
  const std::size_t w = static_cast<std::size_t>(window);
  std::vector<double> slopes;
  for (std::size_t start = 0; start + w <= cumulative.size(); start += w) {
    const double before = start == 0 ? 0.0 : cumulative[start - 1];
    slopes.push_back((cumulative[start + w - 1] - before) / static_cast<double>(window));
  }
  return slopes;
}

/// Per-run (or Monte Carlo mean) metrics for one tracking method.
struct RunMetrics {
  std::vector<double> per_step_error;  ///< ||x_t - x_t*||
  std::vector<double> cumulative_ctte;
  double ctte = 0.0;
  std::optional<std::vector<double>> oracle_gap;  ///< ||x_t - x_hat_t||
  /// f_t(x_t) - f_t(x_hat_t); debug column only
  std::optional<std::vector<double>> dynamic_regret;
  double path_length_V = 0.0;
  std::optional<double> optimal_path_length_Vprime;
  double N1 = 0.0;
  double N2 = 0.0;
  double wall_time_per_step = 0.0;
  double max_noise_ratio = 0.0;
  int fallback_count = 0;
  bool failed = false;
  int failed_step = 0;  ///< 1-based step at which the method hit an anchor
  std::uint32_t frame_checksum = 0;
  std::vector<Eigen::VectorXd> estimates;  ///< retained for the representative run only
};

}  // namespace toa
