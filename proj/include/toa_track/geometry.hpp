// Sensor configuration, target trajectories and the noisy range model.
#pragma once

#include "toa_track/core.hpp"
#include "toa_track/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace toa {

/// Relative threshold on the singular values of the sensor difference matrix.
inline constexpr double kSpanTolerance = 1e-10;

/// Fixed sensor positions a_1..a_m in R^n whose differences a_i - a_1 span R^n.
///
/// Only constructible through SensorArray::validate (or validate_sensor_array),
/// so holding one is proof that both invariants were checked.
template <int Dim = kDynamic>
class SensorArray {
 public:
  using Point = Vec<Dim>;

  static SensorArray validate(std::vector<Point> points) {
    if (points.empty()) {
      throw GeometryError(GeometryError::Kind::Empty, "sensor list is empty");
    }
    const Eigen::Index n = points.front().size();
    if (n < 1) {
      throw GeometryError(GeometryError::Kind::DimensionMismatch, "sensor dimension must be >= 1");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != n) {
        throw GeometryError(GeometryError::Kind::DimensionMismatch,
                            "sensor " + std::to_string(i) + " has dimension " +
                                std::to_string(points[i].size()) + ", expected " + std::to_string(n));
      }
      if (!points[i].allFinite()) {
        throw GeometryError(GeometryError::Kind::DimensionMismatch,
                            "sensor " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
    const auto m = static_cast<Eigen::Index>(points.size());
    if (m < n + 1) {
      throw GeometryError(GeometryError::Kind::TooFewSensors,
                          "need at least n+1 = " + std::to_string(n + 1) + " sensors in R^" +
                              std::to_string(n) + ", got " + std::to_string(m));
    }
    const Eigen::MatrixXd diff = difference_matrix(points);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
    const auto& sv = svd.singularValues();
    const double largest = sv.maxCoeff();
    const double smallest = sv.minCoeff();
    if (!(largest > 0.0) || !(smallest > kSpanTolerance * largest)) {
      throw GeometryError(GeometryError::Kind::RankDeficient,
                          "sensor differences a_i - a_1 do not span R^" + std::to_string(n) +
                              " (singular value ratio " + std::to_string(largest > 0 ? smallest / largest : 0.0) +
                              ")");
    }
    return SensorArray(std::move(points));
  }

  /// Stacked rows (a_i - a_1)^T, i = 2..m.
  static Eigen::MatrixXd difference_matrix(std::span<const Point> points) {
    const auto n = points.front().size();
    Eigen::MatrixXd diff(static_cast<Eigen::Index>(points.size()) - 1, n);
    for (std::size_t i = 1; i < points.size(); ++i) {
      diff.row(static_cast<Eigen::Index>(i) - 1) = (points[i] - points[0]).transpose();
    }
    return diff;
  }

  std::span<const Point> positions() const noexcept { return positions_; }
  const Point& operator[](std::size_t i) const { return positions_[i]; }
  int count() const noexcept { return static_cast<int>(positions_.size()); }
  Eigen::Index dim() const noexcept { return positions_.front().size(); }

 private:
  explicit SensorArray(std::vector<Point> points) : positions_(std::move(points)) {}

  std::vector<Point> positions_;
};

template <int Dim = kDynamic>
SensorArray<Dim> validate_sensor_array(std::vector<Vec<Dim>> points) {
  return SensorArray<Dim>::validate(std::move(points));
}

/// True target path x_1*, ..., x_T*. Index 0 holds x_1*.
template <int Dim = kDynamic>
class Trajectory {
 public:
  using Point = Vec<Dim>;

  explicit Trajectory(std::vector<Point> positions) : positions_(std::move(positions)) {
    if (positions_.empty()) {
      throw DomainError("trajectory must contain at least one point");
    }
    const auto n = positions_.front().size();
    for (const auto& p : positions_) {
      if (p.size() != n) throw DomainError("trajectory points differ in dimension");
      if (!p.allFinite()) throw DomainError("trajectory contains a non-finite coordinate");
    }
  }

  int horizon() const noexcept { return static_cast<int>(positions_.size()); }
  /// Position at 1-based time t.
  const Point& at(int t) const { return positions_.at(static_cast<std::size_t>(t - 1)); }
  std::span<const Point> positions() const noexcept { return positions_; }

 private:
  std::vector<Point> positions_;
};

/// Noise standard deviation schedule sigma_t, t = 1, 2, ...
struct NoiseSchedule {
  enum class Kind { Constant, InverseSqrt, ScaledInverseSqrt };

  Kind kind = Kind::Constant;
  double scale = 0.0;  ///< sigma for Constant, c otherwise
  double c0 = 3.0;     ///< high-probability bound ||w|| <= c0 sqrt(m) sigma

  static NoiseSchedule constant(double sigma) { return make(Kind::Constant, sigma); }
  /// sigma_t = c / sqrt(t)
  static NoiseSchedule inverse_sqrt(double c) { return make(Kind::InverseSqrt, c); }
  /// sigma_t = c / sqrt(2t)
  static NoiseSchedule scaled_inverse_sqrt(double c) { return make(Kind::ScaledInverseSqrt, c); }

  double sigma(int t) const {
    if (t < 1) throw DomainError("noise schedule is indexed from t = 1");
    switch (kind) {
      case Kind::Constant:
        return scale;
      case Kind::InverseSqrt:
        return scale / std::sqrt(static_cast<double>(t));
      case Kind::ScaledInverseSqrt:
        return scale / std::sqrt(2.0 * static_cast<double>(t));
    }
    return scale;
  }

  double max_sigma(int horizon) const {
    double best = 0.0;
    for (int t = 1; t <= horizon; ++t) best = std::max(best, sigma(t));
    return best;
  }

  std::vector<double> series(int horizon) const {
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (int t = 1; t <= horizon; ++t) out[static_cast<std::size_t>(t - 1)] = sigma(t);
    return out;
  }

  bool operator==(const NoiseSchedule&) const = default;

 private:
  static NoiseSchedule make(Kind kind, double scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
      throw DomainError("noise scale must be finite and >= 0");
    }
    NoiseSchedule s;
    s.kind = kind;
    s.scale = scale;
    return s;
  }
};

/// One time step's noisy ranges r_i^t.
struct MeasurementFrame {
  int t = 1;
  Eigen::VectorXd ranges;
  double sigma_t = 0.0;
  /// max_i |w_i| / ||x_t* - a_i||, recorded because the small-noise regime has
  /// no hard cutoff.
  double max_noise_ratio = 0.0;
};

/// x_{t+1} = x_t + step_scale / sqrt(2(t+1)) * u_t with u_t uniform on the sphere.
template <int Dim>
Trajectory<Dim> random_walk_trajectory(const Vec<Dim>& x1, int horizon, double step_scale, Engine& rng) {
  if (horizon < 1) throw DomainError("trajectory horizon must be >= 1");
  if (!(step_scale >= 0.0)) throw DomainError("step_scale must be >= 0");
  std::vector<Vec<Dim>> pts;
  pts.reserve(static_cast<std::size_t>(horizon));
  pts.push_back(x1);
  for (int t = 1; t < horizon; ++t) {
    const Vec<Dim> u = unit_direction<Dim>(rng, x1.size());
    const double step = step_scale / std::sqrt(2.0 * (t + 1));
    pts.push_back(pts.back() + step * u);
  }
  return Trajectory<Dim>(std::move(pts));
}

/// r_i = ||x_true - a_i|| + w_i, w_i ~ N(0, sigma_t^2) i.i.d.
template <int Dim>
MeasurementFrame measure(const SensorArray<Dim>& sensors, const Vec<Dim>& x_true, double sigma_t,
                         Engine& rng, int t = 1) {
  if (!(sigma_t >= 0.0)) throw DomainError("sigma_t must be >= 0");
  if (x_true.size() != sensors.dim()) throw DomainError("target dimension does not match sensors");
  MeasurementFrame frame;
  frame.t = t;
  frame.sigma_t = sigma_t;
  frame.ranges.resize(sensors.count());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < sensors.count(); ++i) {
    const double dist = (x_true - sensors[static_cast<std::size_t>(i)]).norm();
    const double w = sigma_t * noise(rng);
    frame.ranges[i] = dist + w;
    if (dist > 0.0) {
      frame.max_noise_ratio = std::max(frame.max_noise_ratio, std::abs(w) / dist);
    } else if (w != 0.0) {
      frame.max_noise_ratio = std::numeric_limits<double>::infinity();
    }
  }
  return frame;
}

}  // namespace toa
