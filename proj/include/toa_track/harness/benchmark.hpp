// Per-iteration wall-clock cost of the two trackers on identical snapshots.
#pragma once

#include "toa_track/estimators.hpp"
#include "toa_track/harness/scenario.hpp"
#include "toa_track/harness/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <vector>

namespace toa {

/// Fewer timed samples give unstable medians.
inline constexpr int kMinBenchmarkIterations = 1000;

struct BenchmarkOptions {
  int iterations = 1000;  ///< timed samples per method
  int warmup = 100;       ///< untimed samples per method
  int batch = 32;         ///< steps per timed sample
  int snapshots = 512;    ///< distinct snapshots cycled through
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

template <int Dim>
TimingRow benchmark_impl(const ScenarioConfig& cfg, const BenchmarkOptions& opt) {
  ScenarioConfig local = cfg;
  local.T = std::min(cfg.T, std::max(2, opt.snapshots));
  if (local.trajectory.kind == TrajectorySpec::Kind::Fixed) local.trajectory.points.resize(static_cast<std::size_t>(local.T));
  const auto sensors = SensorArray<Dim>::validate(convert_points<Dim>(local.sensors));
  const Trajectory<Dim> traj = make_trajectory<Dim>(local, 0);
  const auto frames = make_frames(local, sensors, traj, 0);
  std::vector<LossSnapshot<Dim>> snaps;
  for (const auto& f : frames) snaps.emplace_back(sensors, f);

  // Both methods step from the same OGD-tracked states so they see identical inputs.
  std::vector<Vec<Dim>> starts;
  TrackerState<Dim> track{traj.at(1), cfg.eta, Method::OGD, 0};
  for (const auto& s : snaps) {
    starts.push_back(track.estimate);
    track = ogd_step(track, s);
  }

  volatile double sink = 0.0;
  std::size_t cursor = 0;
  auto sample = [&](Method method) {
    const auto t0 = std::chrono::steady_clock::now();
    double acc = 0.0;
    for (int b = 0; b < opt.batch; ++b) {
      const std::size_t k = cursor++ % snaps.size();
      TrackerState<Dim> st{starts[k], cfg.eta, method, 0};
      st = method == Method::OGD ? ogd_step(st, snaps[k]) : onm_step(st, snaps[k]);
      acc += st.estimate[0];
    }
    const auto t1 = std::chrono::steady_clock::now();
    sink = sink + acc;
    return std::chrono::duration<double>(t1 - t0).count() / opt.batch;
  };

  for (int w = 0; w < opt.warmup; ++w) {
    sample(Method::OGD);
    sample(Method::ONM);
  }
  std::vector<double> ogd;
  std::vector<double> onm;
  ogd.reserve(static_cast<std::size_t>(opt.iterations));
  onm.reserve(static_cast<std::size_t>(opt.iterations));
  for (int i = 0; i < opt.iterations; ++i) {
    // interleaved so slow drifts in machine load hit both methods alike
    ogd.push_back(sample(Method::OGD));
    onm.push_back(sample(Method::ONM));
  }
  TimingRow row;
  row.label = cfg.name;
  row.ogd_seconds = median(std::move(ogd));
  row.onm_seconds = median(std::move(onm));
  row.ratio = row.ogd_seconds > 0.0 ? row.onm_seconds / row.ogd_seconds : 0.0;
  row.iterations = opt.iterations;
  return row;
}

}  // namespace detail

/// Median wall-clock seconds per ogd_step and onm_step.
inline TimingRow benchmark_per_iteration(const ScenarioConfig& config, const BenchmarkOptions& options = {}) {
  config.validate();
  if (options.iterations < kMinBenchmarkIterations || options.batch < 1 || options.warmup < 0) {
    throw DomainError("benchmark needs iterations >= 1000, batch >= 1, warmup >= 0");
  }
  return detail::with_dimension(config.dim(), [&](auto dim) {
    return detail::benchmark_impl<decltype(dim)::value>(config, options);
  });
}

}  // namespace toa
