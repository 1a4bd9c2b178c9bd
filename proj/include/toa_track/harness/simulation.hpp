// Single runs and Monte Carlo orchestration.
//
// Run r draws its trajectory from stream (root_seed, Trajectory, r) and the
// ranges at step t from stream (root_seed, Measurement, r, t). Runs are
// independent tasks; aggregation walks them in run-index order, so results do
// not depend on the thread count.
#pragma once

#include "toa_track/analysis.hpp"
#include "toa_track/estimators.hpp"
#include "toa_track/geometry.hpp"
#include "toa_track/harness/scenario.hpp"
#include "toa_track/loss.hpp"
#include "toa_track/metrics.hpp"
#include "toa_track/random.hpp"

#include <boost/crc.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace toa {

struct SingleRun {
  std::vector<RunMetrics> methods;  ///< parallel to config.methods
  std::vector<Eigen::VectorXd> truth;
  std::optional<std::vector<Eigen::VectorXd>> oracle_estimates;
  std::optional<ConvexityReport> convexity;
};

struct RunOptions {
  int threads = 1;
  bool retain_raw = false;
};

struct MethodSummary {
  Method method = Method::OGD;
  RunMetrics mean;
  int runs = 0;
  int failed_runs = 0;
  long fallback_steps = 0;
};

struct RunSummary {
  int run = 0;
  double ctte = 0.0;
  bool failed = false;
  int failed_step = 0;
  int fallback_count = 0;
  std::uint32_t frame_checksum = 0;
};

struct Provenance {
  std::string config_hash;
  std::uint64_t root_seed = 0;
  std::string version;
};

struct TimingRow {
  std::string label;
  double ogd_seconds = 0.0;
  double onm_seconds = 0.0;
  double ratio = 0.0;  ///< onm / ogd
  int iterations = 0;
};

struct ScenarioResult {
  ScenarioConfig config;
  std::vector<MethodSummary> methods;
  std::vector<std::vector<RunSummary>> runs;          ///< [method][run]
  std::vector<std::vector<RunMetrics>> raw;           ///< [method][run], when retained
  std::vector<RunMetrics> representative;             ///< run 0, with estimates
  std::vector<Eigen::VectorXd> representative_truth;  ///< run 0
  std::optional<std::vector<Eigen::VectorXd>> representative_oracle;
  std::optional<ConvexityReport> convexity;
  std::vector<TimingRow> timing;
  Provenance provenance;
  bool failed = false;
  std::string failure_reason;

  const MethodSummary* find(Method m) const {
    for (const auto& s : methods) {
      if (s.method == m) return &s;
    }
    return nullptr;
  }
};

/// Fraction of failed runs above which a scenario is declared failed.
inline constexpr double kMaxFailedRunFraction = 0.10;

namespace detail {

/// Calls f with std::integral_constant<int, Dim> for Dim in {2, 3} or Eigen::Dynamic.
template <class F>
decltype(auto) with_dimension(Eigen::Index n, F&& f) {
  if (n == 2) return f(std::integral_constant<int, 2>{});
  if (n == 3) return f(std::integral_constant<int, 3>{});
  return f(std::integral_constant<int, kDynamic>{});
}

template <int Dim>
std::vector<Vec<Dim>> convert_points(const std::vector<Eigen::VectorXd>& pts) {
  std::vector<Vec<Dim>> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(to_vec<Dim>(p));
  return out;
}

template <int Dim>
std::vector<Eigen::VectorXd> to_dynamic(std::span<const Vec<Dim>> pts) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.emplace_back(p);
  return out;
}

inline void checksum_frame(boost::crc_32_type& crc, const MeasurementFrame& f) {
  crc.process_bytes(&f.t, sizeof f.t);
  crc.process_bytes(&f.sigma_t, sizeof f.sigma_t);
  crc.process_bytes(f.ranges.data(), static_cast<std::size_t>(f.ranges.size()) * sizeof(double));
}

template <int Dim>
Trajectory<Dim> make_trajectory(const ScenarioConfig& cfg, int run_index) {
  if (cfg.trajectory.kind == TrajectorySpec::Kind::Fixed) {
    return Trajectory<Dim>(convert_points<Dim>(cfg.trajectory.points));
  }
  Engine rng = make_stream(cfg.root_seed, StreamTag::Trajectory, {static_cast<std::uint64_t>(run_index)});
  return random_walk_trajectory<Dim>(to_vec<Dim>(cfg.x1_true), cfg.T, cfg.trajectory.step_scale, rng);
}

template <int Dim>
std::vector<MeasurementFrame> make_frames(const ScenarioConfig& cfg, const SensorArray<Dim>& sensors,
                                          const Trajectory<Dim>& traj, int run_index) {
  std::vector<MeasurementFrame> frames;
  frames.reserve(static_cast<std::size_t>(cfg.T));
  for (int t = 1; t <= cfg.T; ++t) {
    Engine rng = make_stream(cfg.root_seed, StreamTag::Measurement,
                             {static_cast<std::uint64_t>(run_index), static_cast<std::uint64_t>(t)});
    frames.push_back(measure(sensors, traj.at(t), cfg.noise.sigma(t), rng, t));
  }
  return frames;
}

template <int Dim>
SingleRun run_single_impl(const ScenarioConfig& cfg, int run_index, bool keep_estimates) {
  const auto sensors = SensorArray<Dim>::validate(convert_points<Dim>(cfg.sensors));
  const Trajectory<Dim> traj = make_trajectory<Dim>(cfg, run_index);
  const std::vector<MeasurementFrame> frames = make_frames(cfg, sensors, traj, run_index);
  std::vector<LossSnapshot<Dim>> snaps;
  snaps.reserve(frames.size());
  for (const auto& f : frames) snaps.emplace_back(sensors, f);

  double max_noise_ratio = 0.0;
  for (const auto& f : frames) max_noise_ratio = std::max(max_noise_ratio, f.max_noise_ratio);

  const Vec<Dim> x0 = cfg.init == InitMode::Exact ? traj.at(1) : ols_initialize(sensors, frames.front());

  SingleRun out;
  const auto truth = traj.positions();

  std::optional<std::vector<Vec<Dim>>> xhat;
  if (cfg.oracle) {
    xhat.emplace();
    xhat->reserve(frames.size());
    for (int t = 1; t <= cfg.T; ++t) {
      // oracle-only privilege: initialized at the true position
      const auto res = batch_least_squares(snaps[static_cast<std::size_t>(t - 1)], traj.at(t), *cfg.oracle);
      xhat->push_back(res.estimate);
    }
  }

  const std::vector<double> sigmas = cfg.noise.series(cfg.T);
  const NoiseCumulants cumulants = noise_cumulants(sigmas);
  const double V = path_length<Dim>(truth);
  const ConstantStepSize schedule{cfg.eta};

  for (Method method : cfg.methods) {
    RunMetrics rm;
    rm.path_length_V = V;
    rm.N1 = cumulants.N1;
    rm.N2 = cumulants.N2;
    rm.max_noise_ratio = max_noise_ratio;

    TrackerState<Dim> state{x0, cfg.eta, method, 0};
    std::vector<Vec<Dim>> estimates;
    estimates.reserve(frames.size());
    boost::crc_32_type crc;
    const auto start = std::chrono::steady_clock::now();
    for (int t = 1; t <= cfg.T; ++t) {
      const auto& snap = snaps[static_cast<std::size_t>(t - 1)];
      checksum_frame(crc, snap.frame());
      state.step_size = schedule(t);
      try {
        state = tracker_step(state, snap);
      } catch (const AnchorProximityError&) {
        rm.failed = true;
      }
      if (!rm.failed && !state.estimate.allFinite()) rm.failed = true;
      if (rm.failed) {
        rm.failed_step = t;
        break;
      }
      estimates.push_back(state.estimate);
    }
    const auto stop = std::chrono::steady_clock::now();
    rm.wall_time_per_step =
        std::chrono::duration<double>(stop - start).count() / static_cast<double>(std::max<std::size_t>(1, estimates.size()));
    rm.fallback_count = state.fallback_count;
    rm.frame_checksum = crc.checksum();

    const std::size_t done = estimates.size();
    rm.per_step_error.reserve(done);
    for (std::size_t k = 0; k < done; ++k) rm.per_step_error.push_back((estimates[k] - truth[k]).norm());
    const auto series = ctte<Dim>(std::span<const Vec<Dim>>(estimates), truth.first(done));
    rm.cumulative_ctte = series.cumulative;
    rm.ctte = series.total;

    if (xhat) {
      std::vector<double> gap;
      std::vector<double> regret;
      for (std::size_t k = 0; k < done; ++k) {
        gap.push_back((estimates[k] - (*xhat)[k]).norm());
        regret.push_back(snaps[k].value(estimates[k]) - snaps[k].value((*xhat)[k]));
      }
      rm.oracle_gap = std::move(gap);
      rm.dynamic_regret = std::move(regret);
      rm.optimal_path_length_Vprime = path_length<Dim>(std::span<const Vec<Dim>>(*xhat));
    }
    if (keep_estimates) rm.estimates = to_dynamic<Dim>(std::span<const Vec<Dim>>(estimates));
    out.methods.push_back(std::move(rm));
  }

  if (keep_estimates) {
    out.truth = to_dynamic<Dim>(truth);
    if (xhat) out.oracle_estimates = to_dynamic<Dim>(std::span<const Vec<Dim>>(*xhat));
    if (cfg.analysis) {
      out.convexity = check_tracking_conditions(*cfg.analysis, sensors, traj, cfg.noise, cfg.eta, x0);
    }
  }
  return out;
}

inline void accumulate(std::vector<double>& sum, const std::vector<double>& v) {
  if (sum.empty()) sum.assign(v.size(), 0.0);
  for (std::size_t k = 0; k < v.size(); ++k) sum[k] += v[k];
}

inline void scale(std::vector<double>& v, double s) {
  for (double& x : v) x *= s;
}

/// Pointwise arithmetic mean over successful runs, in run order.
inline RunMetrics mean_metrics(const std::vector<const RunMetrics*>& runs) {
  RunMetrics mean;
  if (runs.empty()) return mean;
  std::vector<double> gap;
  std::vector<double> regret;
  double vprime = 0.0;
  bool have_oracle = true;
  for (const RunMetrics* r : runs) {
    accumulate(mean.per_step_error, r->per_step_error);
    accumulate(mean.cumulative_ctte, r->cumulative_ctte);
    mean.ctte += r->ctte;
    mean.path_length_V += r->path_length_V;
    mean.N1 += r->N1;
    mean.N2 += r->N2;
    mean.wall_time_per_step += r->wall_time_per_step;
    mean.max_noise_ratio = std::max(mean.max_noise_ratio, r->max_noise_ratio);
    if (r->oracle_gap && r->dynamic_regret && r->optimal_path_length_Vprime) {
      accumulate(gap, *r->oracle_gap);
      accumulate(regret, *r->dynamic_regret);
      vprime += *r->optimal_path_length_Vprime;
    } else {
      have_oracle = false;
    }
  }
  const double inv = 1.0 / static_cast<double>(runs.size());
  scale(mean.per_step_error, inv);
  scale(mean.cumulative_ctte, inv);
  mean.ctte *= inv;
  mean.path_length_V *= inv;
  mean.N1 *= inv;
  mean.N2 *= inv;
  mean.wall_time_per_step *= inv;
  if (have_oracle) {
    scale(gap, inv);
    scale(regret, inv);
    mean.oracle_gap = std::move(gap);
    mean.dynamic_regret = std::move(regret);
    mean.optimal_path_length_Vprime = vprime * inv;
  }
  return mean;
}

}  // namespace detail

/// One trajectory and measurement stream, tracked by every configured method.
/// All methods consume the same frames. An anchor hit (or a non-finite
/// estimate) marks that method's run failed at the step; others continue.
inline SingleRun run_single(const ScenarioConfig& config, int run_index, bool keep_estimates = true) {
  config.validate();
  return detail::with_dimension(config.dim(), [&](auto dim) {
    return detail::run_single_impl<decltype(dim)::value>(config, run_index, keep_estimates);
  });
}

inline ScenarioResult run_monte_carlo(const ScenarioConfig& config, const RunOptions& options = {}) {
  config.validate();
  const int runs = config.mc_runs;
  std::vector<SingleRun> results(static_cast<std::size_t>(runs));

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int r = next.fetch_add(1); r < runs; r = next.fetch_add(1)) {
      try {
        results[static_cast<std::size_t>(r)] = run_single(config, r, r == 0);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(options.threads, 1, runs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  ScenarioResult out;
  out.config = config;
  out.provenance = {config_hash(config), config.root_seed, std::string(kVersion)};
  out.representative_truth = results.front().truth;
  out.representative_oracle = results.front().oracle_estimates;
  out.convexity = results.front().convexity;

  for (std::size_t k = 0; k < config.methods.size(); ++k) {
    MethodSummary summary;
    summary.method = config.methods[k];
    std::vector<const RunMetrics*> ok;
    std::vector<RunSummary> per_run;
    for (int r = 0; r < runs; ++r) {
      const RunMetrics& rm = results[static_cast<std::size_t>(r)].methods[k];
      per_run.push_back({r, rm.ctte, rm.failed, rm.failed_step, rm.fallback_count, rm.frame_checksum});
      summary.fallback_steps += rm.fallback_count;
      if (rm.failed) {
        ++summary.failed_runs;
      } else {
        ok.push_back(&rm);
      }
    }
    summary.runs = runs;
    summary.mean = detail::mean_metrics(ok);
    if (summary.failed_runs > kMaxFailedRunFraction * runs) {
      out.failed = true;
      out.failure_reason += std::string(method_name(summary.method)) + " failed in " +
                            std::to_string(summary.failed_runs) + " of " + std::to_string(runs) + " runs; ";
    }
    out.representative.push_back(results.front().methods[k]);
    out.runs.push_back(std::move(per_run));
    out.methods.push_back(std::move(summary));
  }
  if (options.retain_raw) {
    out.raw.resize(config.methods.size());
    for (std::size_t k = 0; k < config.methods.size(); ++k) {
      for (auto& r : results) {
        RunMetrics rm = r.methods[k];
        rm.estimates.clear();
        out.raw[k].push_back(std::move(rm));
      }
    }
  }
  return out;
}

}  // namespace toa
