// Per-time-step range least-squares loss
//
//   f_t(x) = sum_i (||x - a_i|| - r_i)^2
//
// with analytic gradient and Hessian
//
//   grad f = 2 sum_i (1 - r_i/d_i) (x - a_i)
//   hess f = 2 sum_i [ (r_i/d_i^3) (x - a_i)(x - a_i)^T + (1 - r_i/d_i) I ],   d_i = ||x - a_i||.
//
// The loss is not differentiable at the anchors; derivatives refuse to evaluate
// within `anchor_guard` of any sensor.
#pragma once

#include "toa_track/core.hpp"
#include "toa_track/geometry.hpp"

#include <functional>
#include <type_traits>
#include <utility>

namespace toa {

template <int Dim>
struct LossEvaluation {
  double value = 0.0;
  Vec<Dim> gradient;
  Mat<Dim> hessian;
  Eigen::VectorXd distances;
  Eigen::VectorXd residuals;  ///< d_i - r_i
};

template <int Dim = kDynamic>
class LossSnapshot {
 public:
  using Point = Vec<Dim>;
  using Matrix = Mat<Dim>;

  LossSnapshot(const SensorArray<Dim>& sensors, MeasurementFrame frame,
               double anchor_guard = kDefaultAnchorGuard)
      : sensors_(sensors), frame_(std::move(frame)), anchor_guard_(anchor_guard) {
    if (frame_.ranges.size() != sensors.count()) {
      throw DomainError("frame has " + std::to_string(frame_.ranges.size()) + " ranges for " +
                        std::to_string(sensors.count()) + " sensors");
    }
    if (!frame_.ranges.allFinite()) throw DomainError("frame contains a non-finite range");
    if (!(anchor_guard_ > 0.0)) throw DomainError("anchor_guard must be > 0");
  }

  const SensorArray<Dim>& sensors() const noexcept { return sensors_.get(); }
  const MeasurementFrame& frame() const noexcept { return frame_; }
  double anchor_guard() const noexcept { return anchor_guard_; }
  int count() const noexcept { return sensors().count(); }
  Eigen::Index dim() const noexcept { return sensors().dim(); }

  double value(const Point& x) const {
    check_dim(x);
    double total = 0.0;
    for (int i = 0; i < count(); ++i) {
      const double res = (x - anchor(i)).norm() - frame_.ranges[i];
      total += res * res;
    }
    return total;
  }

  Point gradient(const Point& x) const {
    check_dim(x);
    Point g = detail::zero_vec<Dim>(dim());
    for (int i = 0; i < count(); ++i) {
      const Point diff = x - anchor(i);
      const double d = guarded_norm(diff, i);
      g += (1.0 - frame_.ranges[i] / d) * diff;
    }
    return 2.0 * g;
  }

  Matrix hessian(const Point& x) const { return gradient_and_hessian(x).second; }

  /// Gradient and Hessian in one pass over the sensors.
  std::pair<Point, Matrix> gradient_and_hessian(const Point& x) const {
    check_dim(x);
    Point g = detail::zero_vec<Dim>(dim());
    Matrix h = detail::zero_mat<Dim>(dim());
    double diag = 0.0;
    for (int i = 0; i < count(); ++i) {
      const Point diff = x - anchor(i);
      const double d = guarded_norm(diff, i);
      const double ratio = frame_.ranges[i] / d;
      g += (1.0 - ratio) * diff;
      const double w = ratio / (d * d);
      for (Eigen::Index c = 0; c < h.cols(); ++c) {
        for (Eigen::Index r = 0; r <= c; ++r) {
          h(r, c) += w * (diff[r] * diff[c]);
        }
      }
      diag += 1.0 - ratio;
    }
    h.diagonal().array() += diag;
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      for (Eigen::Index r = c + 1; r < h.rows(); ++r) h(r, c) = h(c, r);
    }
    return {2.0 * g, 2.0 * h};
  }

  /// Everything at once, with per-sensor distances and residuals for diagnostics.
  LossEvaluation<Dim> evaluate(const Point& x) const {
    LossEvaluation<Dim> out;
    out.distances.resize(count());
    out.residuals.resize(count());
    for (int i = 0; i < count(); ++i) {
      out.distances[i] = (x - anchor(i)).norm();
      out.residuals[i] = out.distances[i] - frame_.ranges[i];
    }
    out.value = out.residuals.squaredNorm();
    auto [g, h] = gradient_and_hessian(x);
    out.gradient = std::move(g);
    out.hessian = std::move(h);
    return out;
  }

 private:
  const Point& anchor(int i) const { return sensors()[static_cast<std::size_t>(i)]; }

  void check_dim(const Point& x) const {
    if (x.size() != dim()) throw DomainError("query point dimension does not match sensors");
  }

  double guarded_norm(const Point& diff, int i) const {
    const double d = diff.norm();
    if (!(d > anchor_guard_)) throw AnchorProximityError(i, d);
    return d;
  }

  std::reference_wrapper<const SensorArray<Dim>> sensors_;
  MeasurementFrame frame_;
  double anchor_guard_;
};

template <int Dim>
double loss_value(const LossSnapshot<Dim>& s, const std::type_identity_t<Vec<Dim>>& x) {
  return s.value(x);
}

template <int Dim>
Vec<Dim> loss_gradient(const LossSnapshot<Dim>& s, const std::type_identity_t<Vec<Dim>>& x) {
  return s.gradient(x);
}

template <int Dim>
Mat<Dim> loss_hessian(const LossSnapshot<Dim>& s, const std::type_identity_t<Vec<Dim>>& x) {
  return s.hessian(x);
}

}  // namespace toa
