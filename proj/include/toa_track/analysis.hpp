// Loss-landscape diagnostics.
//
// Around a least-squares estimate x_hat the range loss is strongly convex on a
// ball of radius
//
//   kappa = delta * Lambda / (10 m) - (K1 sqrt(m) sigma + K2 m sigma^2) - 4 c0 sigma / 5,
//
// where Lambda is the smallest eigenvalue of the Gram sum of unit directions
// from the target to the sensors. K1, K2 bound the estimation error
// ||x_hat - x*|| <= K1 sqrt(m) sigma + K2 m sigma^2 and are only known to
// exist, so they are either supplied, fitted by estimation_error_scaling, or
// set to zero (idealized mode). Every report carries the mode it was built in.
#pragma once

#include "toa_track/core.hpp"
#include "toa_track/estimators.hpp"
#include "toa_track/geometry.hpp"
#include "toa_track/loss.hpp"
#include "toa_track/random.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

namespace toa {

enum class ConstantsMode { Idealized, Empirical, Supplied };

constexpr std::string_view constants_mode_name(ConstantsMode m) noexcept {
  switch (m) {
    case ConstantsMode::Idealized:
      return "idealized";
    case ConstantsMode::Empirical:
      return "empirical";
    case ConstantsMode::Supplied:
      return "supplied";
  }
  return "unknown";
}

struct ConvexityConfig {
  double delta = 0.5;
  double c0 = 3.0;
  double K1 = 0.0;
  double K2 = 0.0;
  int eig_samples = 100;
  std::uint64_t seed = 0;
  ConstantsMode mode = ConstantsMode::Idealized;

  void validate() const {
    if (!(delta > 0.0)) throw DomainError("delta must be > 0");
    if (!(c0 > 0.0)) throw DomainError("c0 must be > 0");
    if (!(K1 >= 0.0) || !(K2 >= 0.0)) throw DomainError("K1 and K2 must be >= 0");
    if (eig_samples < 1) throw DomainError("eig_samples must be >= 1");
  }

  /// K1 sqrt(m) sigma + K2 m sigma^2
  double noise_radius(int m, double sigma) const {
    const double md = static_cast<double>(m);
    return K1 * std::sqrt(md) * sigma + K2 * md * sigma * sigma;
  }

  bool operator==(const ConvexityConfig&) const = default;
};

/// Sum over sensors of u_i u_i^T with u_i = (x - a_i) / ||x - a_i||.
template <int Dim>
Mat<Dim> direction_gram(const SensorArray<Dim>& sensors, const Vec<Dim>& x) {
  if (x.size() != sensors.dim()) throw DomainError("point dimension does not match sensors");
  Mat<Dim> gram = detail::zero_mat<Dim>(sensors.dim());
  for (int i = 0; i < sensors.count(); ++i) {
    const Vec<Dim> diff = x - sensors[static_cast<std::size_t>(i)];
    const double d = diff.norm();
    if (!(d > 0.0)) throw AnchorProximityError(i, d);
    const Vec<Dim> u = diff / d;
    gram.noalias() += u * u.transpose();
  }
  return gram;
}

/// Lambda: smallest eigenvalue of the unit-direction Gram sum at x.
template <int Dim>
double direction_gram_min_eig(const SensorArray<Dim>& sensors, const Vec<Dim>& x) {
  const Mat<Dim> gram = direction_gram(sensors, x);
  // u u^T accumulation is symmetric up to rounding; the solver reads one triangle.
  return detail::symmetric_eigenvalues<Dim>(gram)[0];
}

inline double kappa(const ConvexityConfig& cfg, int m, double lambda, double sigma) {
  if (m < 1) throw DomainError("kappa needs m >= 1");
  return cfg.delta / (10.0 * m) * lambda - cfg.noise_radius(m, sigma) - 4.0 * cfg.c0 * sigma / 5.0;
}

/// Points at which ball curvature is probed: the center, then (for positive
/// radius) the 2n axis-aligned boundary points and `samples` uniform draws.
template <int Dim>
std::vector<Vec<Dim>> ball_probe_points(const Vec<Dim>& center, double radius, int samples, Engine& rng) {
  if (!(radius >= 0.0)) throw DomainError("ball radius must be >= 0");
  std::vector<Vec<Dim>> pts{center};
  if (radius == 0.0) return pts;
  const auto n = center.size();
  pts.reserve(static_cast<std::size_t>(1 + 2 * n + samples));
  for (Eigen::Index k = 0; k < n; ++k) {
    Vec<Dim> p = center;
    p[k] += radius;
    pts.push_back(p);
    p[k] = center[k] - radius;
    pts.push_back(p);
  }
  for (int s = 0; s < samples; ++s) pts.push_back(uniform_in_ball<Dim>(rng, center, radius));
  return pts;
}

struct BallCurvature {
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double max_eigenvalue = -std::numeric_limits<double>::infinity();
  int points = 0;
};

template <int Dim>
void require_ball_clear_of_anchors(const LossSnapshot<Dim>& s, const Vec<Dim>& center, double radius) {
  for (int i = 0; i < s.count(); ++i) {
    const double d = (center - s.sensors()[static_cast<std::size_t>(i)]).norm();
    if (!(d > radius + s.anchor_guard())) throw AnchorProximityError(i, d);
  }
}

template <int Dim>
BallCurvature ball_curvature(const LossSnapshot<Dim>& s, const Vec<Dim>& center, double radius, int samples,
                             Engine& rng) {
  require_ball_clear_of_anchors(s, center, radius);
  BallCurvature out;
  for (const auto& p : ball_probe_points<Dim>(center, radius, samples, rng)) {
    const Vec<Dim> eig = detail::symmetric_eigenvalues<Dim>(s.hessian(p));
    out.min_eigenvalue = std::min(out.min_eigenvalue, eig[0]);
    out.max_eigenvalue = std::max(out.max_eigenvalue, eig[eig.size() - 1]);
    ++out.points;
  }
  return out;
}

struct StrongConvexityCheck {
  double min_eigenvalue = 0.0;
  bool all_positive = false;
  int points = 0;
};

template <int Dim>
StrongConvexityCheck verify_local_strong_convexity(const LossSnapshot<Dim>& s, const Vec<Dim>& center,
                                                   double radius, int samples, Engine& rng) {
  const BallCurvature c = ball_curvature(s, center, radius, samples, rng);
  return {c.min_eigenvalue, c.min_eigenvalue > 0.0, c.points};
}

struct CurvatureBounds {
  double mu_hat = 0.0;
  double L_hat = 0.0;
};

/// mu_hat / L_hat: extreme Hessian eigenvalues over the probed ball.
template <int Dim>
CurvatureBounds estimate_strong_convexity_constants(const LossSnapshot<Dim>& s, const Vec<Dim>& center,
                                                    double radius, int samples, Engine& rng) {
  const BallCurvature c = ball_curvature(s, center, radius, samples, rng);
  return {c.min_eigenvalue, c.max_eigenvalue};
}

/// rho = sqrt(1 - 2 eta mu L / (mu + L)), valid for 0 < mu <= L and 0 < eta <= 2/(mu+L).
inline double contraction_factor(double eta, double mu, double L) {
  if (!(mu > 0.0) || !(L >= mu) || !std::isfinite(L)) {
    throw DomainError("contraction factor needs 0 < mu <= L");
  }
  if (!(eta > 0.0) || !(eta <= 2.0 / (mu + L))) {
    throw DomainError("step size " + std::to_string(eta) + " outside (0, 2/(mu+L)] = (0, " +
                      std::to_string(2.0 / (mu + L)) + "]");
  }
  return std::sqrt(std::max(0.0, 1.0 - 2.0 * eta * mu * L / (mu + L)));
}

struct ConvexityReport {
  ConstantsMode mode = ConstantsMode::Idealized;
  double delta = 0.0;
  double c0 = 0.0;
  double K1 = 0.0;
  double K2 = 0.0;
  int m = 0;
  double eta = 0.0;
  double sigma_max = 0.0;
  double v_max = 0.0;
  double noise_radius = 0.0;  ///< K1 sqrt(m) sigma + K2 m sigma^2
  double min_distance = 0.0;  ///< min over i, t of ||x_t* - a_i||
  double Lambda = 0.0;
  double kappa = 0.0;
  std::optional<double> mu_hat;
  std::optional<double> L_hat;
  std::optional<double> rho;
  double radius_rhs = std::numeric_limits<double>::infinity();
  double init_distance = 0.0;
  bool dist_condition_ok = false;
  bool kappa_positive = false;
  bool radius_condition_ok = false;
  bool init_condition_ok = false;

  bool all_ok() const noexcept {
    return dist_condition_ok && kappa_positive && radius_condition_ok && init_condition_ok;
  }
};

/// Evaluates the conditions under which OGD keeps every iterate inside the next
/// step's strong-convexity ball. Uniform constants are min/max over the
/// trajectory points; mu_hat/L_hat are probed on noise-free losses centred at
/// each x_t*. Never throws on failed conditions; it reports them.
template <int Dim>
ConvexityReport check_tracking_conditions(const ConvexityConfig& cfg, const SensorArray<Dim>& sensors,
                                          const Trajectory<Dim>& trajectory, const NoiseSchedule& noise,
                                          double eta, const Vec<Dim>& x0) {
  cfg.validate();
  const int m = sensors.count();
  const int horizon = trajectory.horizon();

  ConvexityReport rep;
  rep.mode = cfg.mode;
  rep.delta = cfg.delta;
  rep.c0 = cfg.c0;
  rep.K1 = cfg.K1;
  rep.K2 = cfg.K2;
  rep.m = m;
  rep.eta = eta;
  rep.sigma_max = noise.max_sigma(horizon);
  rep.noise_radius = cfg.noise_radius(m, rep.sigma_max);

  rep.min_distance = std::numeric_limits<double>::infinity();
  rep.Lambda = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= horizon; ++t) {
    const auto& x = trajectory.at(t);
    for (int i = 0; i < m; ++i) {
      rep.min_distance = std::min(rep.min_distance, (x - sensors[static_cast<std::size_t>(i)]).norm());
    }
    try {
      rep.Lambda = std::min(rep.Lambda, direction_gram_min_eig(sensors, x));
    } catch (const AnchorProximityError&) {
      rep.Lambda = 0.0;
    }
    if (t < horizon) rep.v_max = std::max(rep.v_max, (trajectory.at(t + 1) - x).norm());
  }

  rep.dist_condition_ok = rep.min_distance > rep.noise_radius + cfg.delta;
  rep.kappa = kappa(cfg, m, rep.Lambda, rep.sigma_max);
  rep.kappa_positive = rep.kappa > 0.0;

  try {
    Engine rng = make_stream(cfg.seed, StreamTag::BallSampling);
    const double radius = std::max(rep.kappa, 0.0);
    double mu = std::numeric_limits<double>::infinity();
    double L = -std::numeric_limits<double>::infinity();
    for (int t = 1; t <= horizon; ++t) {
      const auto& x = trajectory.at(t);
      MeasurementFrame exact;
      exact.t = t;
      exact.ranges.resize(m);
      for (int i = 0; i < m; ++i) exact.ranges[i] = (x - sensors[static_cast<std::size_t>(i)]).norm();
      const LossSnapshot<Dim> snap(sensors, std::move(exact));
      const BallCurvature c = ball_curvature(snap, x, radius, cfg.eig_samples, rng);
      mu = std::min(mu, c.min_eigenvalue);
      L = std::max(L, c.max_eigenvalue);
    }
    if (mu > 0.0) {
      rep.mu_hat = mu;
      rep.L_hat = L;
      if (eta > 0.0 && eta <= 2.0 / (mu + L)) rep.rho = contraction_factor(eta, mu, L);
    }
  } catch (const AnchorProximityError&) {
    // curvature undefined near an anchor; rho stays unreported
  }

  if (rep.rho) {
    rep.radius_rhs = (2.0 * rep.noise_radius + rep.v_max) / (1.0 - *rep.rho);
    rep.radius_condition_ok = rep.kappa >= rep.radius_rhs;
  }
  rep.init_distance = (x0 - trajectory.at(1)).norm();
  rep.init_condition_ok = rep.init_distance <= rep.noise_radius;
  return rep;
}

/// Closed form lambda_min(u u^T - v v^T) = (|u|^2 - |v|^2 - |u - v| |u + v|) / 2
/// for linearly independent u, v.
template <int Dim>
double rank_one_diff_min_eig(const Vec<Dim>& u, const Vec<Dim>& v) {
  if (u.size() != v.size()) throw DomainError("vectors differ in dimension");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw DomainError("vectors must be nonzero");
  const Vec<Dim> uh = u / nu;
  const Vec<Dim> vh = v / nv;
  const double sine = (uh - uh.dot(vh) * vh).norm();
  if (!(sine > 1e-12)) throw DomainError("vectors are linearly dependent");
  return (u.squaredNorm() - v.squaredNorm() - (u - v).norm() * (u + v).norm()) / 2.0;
}

struct UnitDiffBound {
  double lhs = 0.0;  ///< || x/|x| - y/|y| ||
  double rhs = 0.0;  ///< ||x - y|| / min(|x|, |y|)
  bool holds = false;
};

/// Relative slack for rounding in the equal-norm (equality) case.
inline constexpr double kUnitDiffSlack = 1e-12;

template <int Dim>
UnitDiffBound unit_diff_bound_holds(const Vec<Dim>& x, const Vec<Dim>& y) {
  if (x.size() != y.size()) throw DomainError("vectors differ in dimension");
  const double nx = x.norm();
  const double ny = y.norm();
  if (!(nx > 0.0) || !(ny > 0.0)) throw DomainError("unit-difference bound needs nonzero vectors");
  UnitDiffBound out;
  out.lhs = (x / nx - y / ny).norm();
  out.rhs = (x - y).norm() / std::min(nx, ny);
  out.holds = out.lhs <= out.rhs * (1.0 + kUnitDiffSlack);
  return out;
}

struct ScalingRow {
  double sigma = 0.0;
  double mean_error = 0.0;
  int samples = 0;
  int failures = 0;
  double fitted = 0.0;
  double residual = 0.0;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  double K1_hat = 0.0;
  double K2_hat = 0.0;
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  int total_failures = 0;
};

/// Monte Carlo estimate of E||x_hat - x*|| per sigma, followed by a
/// least-squares fit of K1 sqrt(m) sigma + K2 m sigma^2 (no intercept).
/// Run r uses the same standard-normal draws at every sigma.
template <int Dim>
ScalingReport estimation_error_scaling(const SensorArray<Dim>& sensors, const Vec<Dim>& x_true,
                                       const std::vector<double>& sigma_grid, int runs_per_sigma,
                                       const OracleConfig& oracle_cfg, std::uint64_t seed) {
  if (sigma_grid.empty()) throw DomainError("sigma grid is empty");
  if (runs_per_sigma < 1) throw DomainError("runs_per_sigma must be >= 1");
  for (std::size_t k = 0; k < sigma_grid.size(); ++k) {
    if (!(sigma_grid[k] >= 0.0)) throw DomainError("sigma grid entries must be >= 0");
    if (k > 0 && !(sigma_grid[k] > sigma_grid[k - 1])) throw DomainError("sigma grid must be ascending");
  }
  const int m = sensors.count();
  ScalingReport rep;
  for (double sigma : sigma_grid) {
    ScalingRow row;
    row.sigma = sigma;
    double sum = 0.0;
    for (int r = 0; r < runs_per_sigma; ++r) {
      Engine rng = make_stream(seed, StreamTag::ErrorScaling, {static_cast<std::uint64_t>(r)});
      const LossSnapshot<Dim> snap(sensors, measure(sensors, x_true, sigma, rng));
      const auto res = batch_least_squares(snap, x_true, oracle_cfg);
      if (res.failed_sensor || !res.converged || !res.estimate.allFinite()) {
        ++row.failures;
        continue;
      }
      sum += (res.estimate - x_true).norm();
      ++row.samples;
    }
    row.mean_error = row.samples > 0 ? sum / row.samples : std::numeric_limits<double>::quiet_NaN();
    rep.total_failures += row.failures;
    rep.rows.push_back(row);
  }

  std::vector<const ScalingRow*> fit_rows;
  for (const auto& row : rep.rows) {
    if (row.sigma > 0.0 && row.samples > 0) fit_rows.push_back(&row);
  }
  if (fit_rows.size() >= 2) {
    const double md = static_cast<double>(m);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(fit_rows.size()), 2);
    Eigen::VectorXd b(a.rows());
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
      const double s = fit_rows[static_cast<std::size_t>(k)]->sigma;
      a(k, 0) = std::sqrt(md) * s;
      a(k, 1) = md * s * s;
      b[k] = fit_rows[static_cast<std::size_t>(k)]->mean_error;
    }
    const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
    rep.K1_hat = coef[0];
    rep.K2_hat = coef[1];
    const Eigen::VectorXd fitted = a * coef;
    const double mean = b.mean();
    const double ss_res = (b - fitted).squaredNorm();
    const double ss_tot = (b.array() - mean).square().sum();
    rep.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::numeric_limits<double>::quiet_NaN();
  }
  const double md = static_cast<double>(m);
  for (auto& row : rep.rows) {
    row.fitted = rep.K1_hat * std::sqrt(md) * row.sigma + rep.K2_hat * md * row.sigma * row.sigma;
    row.residual = row.mean_error - row.fitted;
  }
  return rep;
}

/// ConvexityConfig with K1, K2 taken from a scaling fit (clamped to >= 0).
inline ConvexityConfig with_empirical_constants(ConvexityConfig cfg, const ScalingReport& fit) {
  cfg.K1 = std::max(0.0, fit.K1_hat);
  cfg.K2 = std::max(0.0, fit.K2_hat);
  cfg.mode = ConstantsMode::Empirical;
  return cfg;
}

struct LemmaSuiteReport {
  int rank_one_pairs = 0;
  double rank_one_max_abs_diff = 0.0;
  int unit_diff_pairs = 0;
  int unit_diff_violations = 0;
  int equal_norm_pairs = 0;
  double equal_norm_max_gap = 0.0;  ///< max |lhs - rhs| over equal-norm pairs
  int unequal_norm_equalities = 0;  ///< unequal-norm pairs with |lhs - rhs| <= 1e-12

  bool passed(double eig_tol = 1e-10, double eq_tol = 1e-12) const noexcept {
    return rank_one_max_abs_diff <= eig_tol && unit_diff_violations == 0 && equal_norm_max_gap <= eq_tol &&
           unequal_norm_equalities == 0;
  }
};

/// Randomized checks of the two eigenvalue/unit-vector lemmas behind the
/// local strong convexity result: the closed-form rank-one difference
/// eigenvalue against a dense eigensolver (dimensions 2..5), and the
/// unit-difference inequality including its equality case.
inline LemmaSuiteReport lemma_property_suite(std::uint64_t seed, int rank_one_pairs = 1000,
                                             int unit_diff_pairs = 100000, int equal_norm_pairs = 1000) {
  LemmaSuiteReport rep;
  Engine rng = make_stream(seed, StreamTag::Property);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_vec = [&](Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = normal(rng);
    return v;
  };

  for (int p = 0; p < rank_one_pairs; ++p) {
    const Eigen::Index n = 2 + p % 4;
    const Eigen::VectorXd u = random_vec(n);
    const Eigen::VectorXd v = random_vec(n);
    const double closed = rank_one_diff_min_eig<kDynamic>(u, v);
    const Eigen::MatrixXd diff = u * u.transpose() - v * v.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(diff, Eigen::EigenvaluesOnly);
    rep.rank_one_max_abs_diff = std::max(rep.rank_one_max_abs_diff, std::abs(closed - solver.eigenvalues()[0]));
    ++rep.rank_one_pairs;
  }

  for (int p = 0; p < unit_diff_pairs; ++p) {
    const Eigen::Index n = 2 + p % 4;
    const auto b = unit_diff_bound_holds<kDynamic>(random_vec(n), random_vec(n));
    if (!b.holds) ++rep.unit_diff_violations;
    if (std::abs(b.lhs - b.rhs) <= 1e-12) ++rep.unequal_norm_equalities;
    ++rep.unit_diff_pairs;
  }

  for (int p = 0; p < equal_norm_pairs; ++p) {
    const Eigen::Index n = 2 + p % 4;
    const Eigen::VectorXd x = random_vec(n);
    Eigen::VectorXd y = random_vec(n);
    y *= x.norm() / y.norm();
    const auto b = unit_diff_bound_holds<kDynamic>(x, y);
    if (!b.holds) ++rep.unit_diff_violations;
    rep.equal_norm_max_gap = std::max(rep.equal_norm_max_gap, std::abs(b.lhs - b.rhs));
    ++rep.equal_norm_pairs;
  }
  return rep;
}

}  // namespace toa
