// Core vocabulary types shared by every toa_track module.
#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace toa {

/// Column vector in R^Dim. Dim may be Eigen::Dynamic.
template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

/// Square Dim x Dim matrix.
template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

inline constexpr int kDynamic = Eigen::Dynamic;

/// Default radius around each sensor inside which derivatives are refused.
inline constexpr double kDefaultAnchorGuard = 1e-9;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  enum class Kind { Empty, DimensionMismatch, TooFewSensors, RankDeficient };

  GeometryError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Raised when a query point is within the anchor guard of a sensor, where
/// the loss is not differentiable.
class AnchorProximityError : public Error {
 public:
  AnchorProximityError(int sensor_index, double distance)
      : Error("query point within anchor guard of sensor " + std::to_string(sensor_index) +
              " (distance " + std::to_string(distance) + ")"),
        sensor_index_(sensor_index),
        distance_(distance) {}

  int sensor_index() const noexcept { return sensor_index_; }
  double distance() const noexcept { return distance_; }

 private:
  int sensor_index_;
  double distance_;
};

namespace detail {

template <int Dim>
Vec<Dim> zero_vec(Eigen::Index n) {
  if constexpr (Dim == kDynamic) {
    return Vec<Dim>::Zero(n);
  } else {
    return Vec<Dim>::Zero();
  }
}

template <int Dim>
Mat<Dim> zero_mat(Eigen::Index n) {
  if constexpr (Dim == kDynamic) {
    return Mat<Dim>::Zero(n, n);
  } else {
    return Mat<Dim>::Zero();
  }
}

template <int Dim>
Mat<Dim> identity_mat(Eigen::Index n) {
  if constexpr (Dim == kDynamic) {
    return Mat<Dim>::Identity(n, n);
  } else {
    return Mat<Dim>::Identity();
  }
}

/// Ascending eigenvalues of a symmetric matrix.
template <int Dim>
Vec<Dim> symmetric_eigenvalues(const Mat<Dim>& m) {
  Eigen::SelfAdjointEigenSolver<Mat<Dim>> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error("symmetric eigensolver failed to converge");
  }
  return solver.eigenvalues();
}

template <int Dim, class Derived>
Vec<Dim> to_vec(const Eigen::MatrixBase<Derived>& v) {
  if constexpr (Dim != kDynamic) {
    if (v.size() != Dim) {
      throw DomainError("point has dimension " + std::to_string(v.size()) + ", expected " +
                        std::to_string(Dim));
    }
  }
  return Vec<Dim>(v);
}

}  // namespace detail
}  // namespace toa
