#include "toa_track/toa_track.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

struct CommonFlags {
  std::optional<int> mc_runs;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool oracle = false;
  std::optional<std::string> init;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool scenario_flags) {
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--seed", f.seed, "Root seed");
  if (!scenario_flags) return;
  cmd->add_option("--mc-runs", f.mc_runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--oracle", f.oracle, "Compute the per-step batch least-squares solution x_hat_t");
  cmd->add_option("--init", f.init, "Tracker initialization")->check(CLI::IsMember({"exact", "ols"}));
}

toa::ScenarioConfig configure(const std::string& source, const CommonFlags& f) {
  toa::ScenarioConfig cfg = toa::resolve_scenario(source);
  if (f.mc_runs) cfg.mc_runs = *f.mc_runs;
  if (f.seed) cfg.root_seed = *f.seed;
  if (f.oracle && !cfg.oracle) cfg.oracle = toa::OracleConfig{};
  if (f.init) cfg.init = *f.init == "ols" ? toa::InitMode::Ols : toa::InitMode::Exact;
  cfg.validate();
  return cfg;
}

std::filesystem::path out_dir(const CommonFlags& f, const std::string& fallback) {
  return f.out.empty() ? std::filesystem::path("out") / fallback : std::filesystem::path(f.out);
}

int cmd_run(const std::string& source, const CommonFlags& f) {
  const auto cfg = configure(source, f);
  const auto result = toa::run_monte_carlo(cfg, {f.threads, false});
  const auto dir = out_dir(f, cfg.name);
  const auto manifest = toa::emit(result, dir);

  std::printf("%s: T=%d, %d runs, seed %llu, config %s\n", cfg.name.c_str(), cfg.T, cfg.mc_runs,
              static_cast<unsigned long long>(cfg.root_seed), result.provenance.config_hash.c_str());
  for (const auto& m : result.methods) {
    std::printf("  %s  mean CTTE %.6g  failed runs %d  fallback steps %ld\n", std::string(toa::method_name(m.method)).c_str(),
                m.mean.ctte, m.failed_runs, m.fallback_steps);
  }
  if (result.convexity) {
    std::printf("  conditions (%s): dist %d  kappa>0 %d  radius %d  init %d\n",
                std::string(toa::constants_mode_name(result.convexity->mode)).c_str(),
                result.convexity->dist_condition_ok, result.convexity->kappa_positive,
                result.convexity->radius_condition_ok, result.convexity->init_condition_ok);
  }
  std::printf("  wrote %zu files to %s\n", manifest.files.size() + 1, dir.string().c_str());
  if (result.failed) {
    std::fprintf(stderr, "scenario failed: %s\n", result.failure_reason.c_str());
    return 2;
  }
  return 0;
}

int cmd_bench(const std::string& target, const CommonFlags& f, const toa::BenchmarkOptions& opt) {
  std::vector<std::string> names;
  if (target == "all") {
    for (auto n : toa::kPresetNames) names.emplace_back(n);
  } else {
    names.push_back(target);
  }
  nlohmann::json rows = nlohmann::json::array();
  std::printf("%-8s %14s %14s %8s\n", "preset", "OGD s/iter", "ONM s/iter", "ratio");
  for (const auto& name : names) {
    auto cfg = toa::resolve_scenario(name);
    if (f.seed) cfg.root_seed = *f.seed;
    const auto row = toa::benchmark_per_iteration(cfg, opt);
    std::printf("%-8s %14.4g %14.4g %8.2f\n", row.label.c_str(), row.ogd_seconds, row.onm_seconds, row.ratio);
    rows.push_back({{"label", row.label},
                    {"ogd_seconds", row.ogd_seconds},
                    {"onm_seconds", row.onm_seconds},
                    {"ratio", row.ratio},
                    {"iterations", row.iterations}});
  }
  if (!f.out.empty()) {
    std::filesystem::create_directories(f.out);
    toa::detail::write_file(std::filesystem::path(f.out) / "timing.json", nlohmann::json{{"benchmark", rows}}.dump(2) + "\n");
  }
  return 0;
}

template <int Dim>
nlohmann::json analyze_impl(const toa::ScenarioConfig& cfg, const std::vector<double>& grid, int runs) {
  const auto sensors = toa::SensorArray<Dim>::validate(toa::detail::convert_points<Dim>(cfg.sensors));
  const auto traj = toa::detail::make_trajectory<Dim>(cfg, 0);
  const auto frames = toa::detail::make_frames(cfg, sensors, traj, 0);
  const toa::Vec<Dim> x0 = cfg.init == toa::InitMode::Exact ? traj.at(1) : toa::ols_initialize(sensors, frames.front());
  const toa::OracleConfig oracle = cfg.oracle.value_or(toa::OracleConfig{});
  const toa::ConvexityConfig base = cfg.analysis.value_or(toa::ConvexityConfig{});

  const auto fit = toa::estimation_error_scaling(sensors, toa::detail::to_vec<Dim>(cfg.x1_true), grid, runs, oracle,
                                                 toa::derive_seed(cfg.root_seed, toa::StreamTag::ErrorScaling, {}));
  toa::ConvexityConfig idealized = base;
  idealized.K1 = 0.0;
  idealized.K2 = 0.0;
  idealized.mode = toa::ConstantsMode::Idealized;
  const toa::ConvexityConfig empirical = toa::with_empirical_constants(base, fit);

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : fit.rows) {
    rows.push_back({{"sigma", r.sigma},
                    {"mean_error", r.mean_error},
                    {"samples", r.samples},
                    {"failures", r.failures},
                    {"fitted", r.fitted},
                    {"residual", r.residual}});
  }
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& c : {idealized, empirical}) {
    reports.push_back(toa::to_json(toa::check_tracking_conditions(c, sensors, traj, cfg.noise, cfg.eta, x0)));
  }
  if (base.mode == toa::ConstantsMode::Supplied) {
    reports.push_back(toa::to_json(toa::check_tracking_conditions(base, sensors, traj, cfg.noise, cfg.eta, x0)));
  }
  return {{"config", toa::to_json(cfg)},
          {"scaling",
           {{"runs_per_sigma", runs},
            {"rows", rows},
            {"K1_hat", fit.K1_hat},
            {"K2_hat", fit.K2_hat},
            {"r_squared", fit.r_squared},
            {"total_failures", fit.total_failures}}},
          {"conditions", reports}};
}

int cmd_analyze(const std::string& source, const CommonFlags& f, const std::vector<double>& grid, int runs) {
  const auto cfg = configure(source, f);
  const nlohmann::json report = toa::detail::with_dimension(cfg.dim(), [&](auto dim) {
    return analyze_impl<decltype(dim)::value>(cfg, grid, runs);
  });
  const auto& s = report["scaling"];
  std::printf("%s: error scaling over %zu sigma values, %d runs each\n", cfg.name.c_str(), grid.size(), runs);
  for (const auto& r : s["rows"]) {
    std::printf("  sigma %-10.4g mean error %.6g\n", r["sigma"].get<double>(), r["mean_error"].get<double>());
  }
  std::printf("  K1_hat %.6g  K2_hat %.6g  R^2 %.6f\n", s["K1_hat"].get<double>(), s["K2_hat"].get<double>(),
              s["r_squared"].get<double>());
  for (const auto& c : report["conditions"]) {
    std::printf("  %-9s kappa %.6g  dist %d  kappa>0 %d  radius %d  init %d\n",
                c["mode"].get<std::string>().c_str(), c["kappa"].is_number() ? c["kappa"].get<double>() : 0.0,
                c["dist_condition_ok"].get<bool>(), c["kappa_positive"].get<bool>(),
                c["radius_condition_ok"].get<bool>(), c["init_condition_ok"].get<bool>());
  }
  const auto dir = out_dir(f, cfg.name);
  std::filesystem::create_directories(dir);
  toa::detail::write_file(dir / "analysis.json", report.dump(2) + "\n");
  std::printf("  wrote %s\n", (dir / "analysis.json").string().c_str());
  return 0;
}

int cmd_lemmas(const CommonFlags& f) {
  const auto rep = toa::lemma_property_suite(f.seed.value_or(0));
  std::printf("rank-one difference eigenvalue: %d pairs, max |closed form - eigensolver| = %.3g\n", rep.rank_one_pairs,
              rep.rank_one_max_abs_diff);
  std::printf("unit-difference bound: %d random pairs, %d violations, %d spurious equalities\n", rep.unit_diff_pairs,
              rep.unit_diff_violations, rep.unequal_norm_equalities);
  std::printf("equal-norm pairs: %d, max |lhs - rhs| = %.3g\n", rep.equal_norm_pairs, rep.equal_norm_max_gap);
  const bool ok = rep.passed();
  std::printf("%s\n", ok ? "all lemma checks passed" : "lemma checks FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online TOA target tracking simulator"};
  app.set_version_flag("--version", std::string(toa::kVersion));
  app.require_subcommand(1);

  CommonFlags flags;
  std::string source;

  auto* run = app.add_subcommand("run", "Run a Monte Carlo scenario and write CSV, report and plots");
  run->add_option("scenario", source, "Preset name (A1 A2 A3 B0 B1 B2 C1 C2) or JSON config file")->required();
  add_common(run, flags, true);

  toa::BenchmarkOptions bench_opt;
  auto* bench = app.add_subcommand("bench", "Per-iteration timing of OGD and ONM");
  bench->add_option("preset", source, "Preset name, config file, or 'all'")->required();
  bench->add_option("--iterations", bench_opt.iterations, "Timed samples per method")
      ->check(CLI::Range(toa::kMinBenchmarkIterations, 100000000));
  bench->add_option("--warmup", bench_opt.warmup, "Untimed samples per method");
  add_common(bench, flags, false);

  std::vector<double> grid{1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  int scaling_runs = 500;
  auto* analyze = app.add_subcommand("analyze", "Tracking-condition report and estimation-error regression");
  analyze->add_option("scenario", source, "Preset name or JSON config file")->required();
  analyze->add_option("--sigmas", grid, "Noise levels for the error regression (ascending)");
  analyze->add_option("--scaling-runs", scaling_runs, "Oracle solves per noise level")->check(CLI::PositiveNumber);
  add_common(analyze, flags, true);

  auto* lemmas = app.add_subcommand("lemmas", "Randomized checks of the eigenvalue and unit-vector lemmas");
  add_common(lemmas, flags, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(source, flags);
    if (*bench) return cmd_bench(source, flags, bench_opt);
    if (*analyze) return cmd_analyze(source, flags, grid, scaling_runs);
    if (*lemmas) return cmd_lemmas(flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
