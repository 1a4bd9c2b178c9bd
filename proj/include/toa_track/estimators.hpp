// Online trackers (gradient and Newton steps), the closed-form OLS initializer
// and the batch gradient-descent oracle used for the least-squares estimates.
#pragma once

#include "toa_track/core.hpp"
#include "toa_track/geometry.hpp"
#include "toa_track/loss.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <optional>
#include <string_view>

namespace toa {

enum class Method { OGD, ONM };

constexpr std::string_view method_name(Method m) noexcept { return m == Method::OGD ? "OGD" : "ONM"; }

/// Newton steps above this Hessian condition number fall back to a gradient step.
inline constexpr double kOnmConditionLimit = 1e12;

template <int Dim = kDynamic>
struct TrackerState {
  Vec<Dim> estimate;
  double step_size = 0.1;
  Method method = Method::OGD;
  int fallback_count = 0;
};

/// Step-size schedule hook; the trackers ship with a constant step.
struct ConstantStepSize {
  double eta = 0.1;
  double operator()(int /*t*/) const noexcept { return eta; }
};

template <int Dim>
TrackerState<Dim> ogd_step(TrackerState<Dim> state, const LossSnapshot<Dim>& s) {
  if (state.method == Method::OGD && !(state.step_size > 0.0)) {
    throw DomainError("OGD step size must be > 0");
  }
  state.estimate -= state.step_size * s.gradient(state.estimate);
  return state;
}

/// Newton step x - H^{-1} g, solved as a linear system. Near-singular Hessians
/// (condition number above kOnmConditionLimit) take a gradient step instead and
/// bump fallback_count.
template <int Dim>
TrackerState<Dim> onm_step(TrackerState<Dim> state, const LossSnapshot<Dim>& s) {
  const auto [g, h] = s.gradient_and_hessian(state.estimate);
  const Vec<Dim> eig = detail::symmetric_eigenvalues<Dim>(h);
  const double largest = eig.cwiseAbs().maxCoeff();
  const double smallest = eig.cwiseAbs().minCoeff();
  const double cond = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
  if (!(cond <= kOnmConditionLimit)) {
    state.estimate -= state.step_size * g;
    ++state.fallback_count;
    return state;
  }
  state.estimate -= Eigen::PartialPivLU<Mat<Dim>>(h).solve(g);
  return state;
}

template <int Dim>
TrackerState<Dim> tracker_step(const TrackerState<Dim>& state, const LossSnapshot<Dim>& s) {
  return state.method == Method::OGD ? ogd_step(state, s) : onm_step(state, s);
}

/// Linearized closed-form estimate (A^T A)^{-1} A^T b from consecutive sensor
/// pairs: rows (a_{i+1} - a_i)^T, b_i = (||a_{i+1}||^2 - ||a_i||^2 + r_i^2 - r_{i+1}^2) / 2.
template <int Dim>
Vec<Dim> ols_initialize(const SensorArray<Dim>& sensors, const MeasurementFrame& frame) {
  const int m = sensors.count();
  if (frame.ranges.size() != m) throw DomainError("frame size does not match sensor count");
  const auto n = sensors.dim();
  Eigen::MatrixXd a(m - 1, n);
  Eigen::VectorXd b(m - 1);
  for (int i = 0; i + 1 < m; ++i) {
    const auto& lo = sensors[static_cast<std::size_t>(i)];
    const auto& hi = sensors[static_cast<std::size_t>(i + 1)];
    a.row(i) = (hi - lo).transpose();
    b[i] = 0.5 * (hi.squaredNorm() - lo.squaredNorm() + frame.ranges[i] * frame.ranges[i] -
                  frame.ranges[i + 1] * frame.ranges[i + 1]);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(kSpanTolerance);
  if (qr.rank() < n) throw GeometryError(GeometryError::Kind::RankDeficient, "OLS system is rank deficient");
  return detail::to_vec<Dim>(qr.solve(b));
}

struct OracleConfig {
  std::optional<double> step_size;  ///< defaults to 1/m
  double gradient_tolerance = 1e-8;
  int max_iterations = 5000;

  double resolved_step(int m) const { return step_size.value_or(1.0 / static_cast<double>(m)); }

  void validate() const {
    if (step_size && !(*step_size > 0.0)) throw DomainError("oracle step_size must be > 0");
    if (!(gradient_tolerance > 0.0)) throw DomainError("oracle gradient_tolerance must be > 0");
    if (max_iterations < 1) throw DomainError("oracle max_iterations must be >= 1");
  }

  bool operator==(const OracleConfig&) const = default;
};

template <int Dim>
struct OracleResult {
  Vec<Dim> estimate;
  double gradient_norm = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
  /// Set when an iterate hit an anchor guard; estimate is the last good iterate.
  std::optional<int> failed_sensor;
};

struct NoObserver {
  template <class P>
  void operator()(int, const P&) const noexcept {}
};

/// Constant-step gradient descent until ||grad|| < tolerance or the iteration
/// cap. `observer(k, x_k)` sees every iterate, starting with k = 0.
template <int Dim, class Observer = NoObserver>
OracleResult<Dim> batch_least_squares(const LossSnapshot<Dim>& s, const Vec<Dim>& init,
                                      const OracleConfig& cfg, Observer&& observer = {}) {
  cfg.validate();
  const double eta = cfg.resolved_step(s.count());
  OracleResult<Dim> out;
  out.estimate = init;
  try {
    Vec<Dim> g = s.gradient(out.estimate);
    observer(0, out.estimate);
    while (true) {
      out.gradient_norm = g.norm();
      if (out.gradient_norm < cfg.gradient_tolerance) {
        out.converged = true;
        break;
      }
      if (out.iterations >= cfg.max_iterations) break;
      const Vec<Dim> next = out.estimate - eta * g;
      g = s.gradient(next);
      out.estimate = next;
      ++out.iterations;
      observer(out.iterations, out.estimate);
    }
  } catch (const AnchorProximityError& e) {
    out.failed_sensor = e.sensor_index();
  }
  return out;
}

}  // namespace toa
