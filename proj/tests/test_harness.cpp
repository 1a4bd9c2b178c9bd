#include "toa_track/toa_track.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("toa_track_" + name)) {
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

toa::ScenarioConfig small(const std::string& name, int runs = 8) {
  auto c = toa::preset(name);
  c.T = 120;
  c.mc_runs = runs;
  return c;
}

toa::ScenarioConfig noise_free_static() {
  auto c = toa::preset("A1");
  c.noise = toa::NoiseSchedule::constant(0.0);
  c.trajectory = toa::TrajectorySpec::random_walk(0.0);
  return c;
}

TEST(Preset, Definitions) {
  const auto a1 = toa::preset("A1");
  EXPECT_EQ(a1.noise, toa::NoiseSchedule::constant(0.0001));
  EXPECT_EQ(a1.T, 500);
  EXPECT_EQ(a1.x1_true, Eigen::Vector2d(2, 1));
  EXPECT_DOUBLE_EQ(a1.eta, 0.1);
  EXPECT_EQ(toa::preset("A3").noise, toa::NoiseSchedule::inverse_sqrt(0.01));
  EXPECT_EQ(toa::preset("B0").T, 10000);
  EXPECT_DOUBLE_EQ(toa::preset("C1").trajectory.step_scale, 0.1);
  EXPECT_DOUBLE_EQ(toa::preset("C2").trajectory.step_scale, 0.5);
  EXPECT_THROW(toa::preset("Z9"), toa::DomainError);
}

TEST(Preset, B2NoiseToVariationRatio) {
  const auto b2 = toa::preset("B2");
  for (int t = 1; t < 200; ++t) {
    const double v_t = b2.trajectory.step_scale / std::sqrt(2.0 * (t + 1));
    EXPECT_NEAR(b2.noise.sigma(t + 1) / v_t, 1.6, 1e-12);
  }
}

TEST(Config, JsonRoundTrip) {
  auto c = toa::preset("C1");
  c.oracle = toa::OracleConfig{};
  c.oracle->max_iterations = 123;
  c.analysis = toa::ConvexityConfig{};
  c.analysis->delta = 0.25;
  c.init = toa::InitMode::Ols;
  c.root_seed = 99;
  const auto back = toa::config_from_json(toa::to_json(c));
  EXPECT_EQ(toa::to_json(back), toa::to_json(c));
  EXPECT_EQ(toa::config_hash(back), toa::config_hash(c));
}

TEST(Config, FileWithPresetBase) {
  TempDir dir("config");
  fs::create_directories(dir.path());
  const auto file = dir.path() / "cfg.json";
  std::ofstream(file) << R"({"preset": "A2", "name": "mine", "T": 50, "methods": ["OGD"],
                            "noise": {"kind": "inverse-sqrt", "scale": 0.02}, "oracle": true})";
  const auto c = toa::resolve_scenario(file.string());
  EXPECT_EQ(c.name, "mine");
  EXPECT_EQ(c.T, 50);
  EXPECT_EQ(c.methods, std::vector<toa::Method>{toa::Method::OGD});
  EXPECT_EQ(c.noise, toa::NoiseSchedule::inverse_sqrt(0.02));
  EXPECT_TRUE(c.oracle.has_value());
  EXPECT_EQ(c.sensors.size(), 3u);
}

TEST(Config, ErrorsCarryPath) {
  try {
    toa::load_config_file("/nonexistent/dir/cfg.json");
    FAIL();
  } catch (const toa::Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/cfg.json"), std::string::npos);
  }
  auto c = toa::preset("A1");
  c.T = 0;
  EXPECT_THROW(c.validate(), toa::DomainError);
  c = toa::preset("A1");
  c.eta = 0.0;
  EXPECT_THROW(c.validate(), toa::DomainError);
}

TEST(RunSingle, NoiseFreeStaticStaysOnTarget) {
  const auto run = toa::run_single(noise_free_static(), 0);
  for (const auto& m : run.methods) {
    ASSERT_EQ(m.per_step_error.size(), 500u);
    for (double e : m.per_step_error) EXPECT_LT(e, 1e-9);
  }
}

TEST(RunSingle, DeterministicAndSharedFrames) {
  const auto c = small("A1");
  const auto a = toa::run_single(c, 3);
  const auto b = toa::run_single(c, 3);
  ASSERT_EQ(a.methods.size(), 2u);
  EXPECT_EQ(a.methods[0].cumulative_ctte, b.methods[0].cumulative_ctte);
  EXPECT_EQ(a.methods[1].cumulative_ctte, b.methods[1].cumulative_ctte);
  EXPECT_EQ(a.methods[0].frame_checksum, a.methods[1].frame_checksum);
  EXPECT_NE(a.methods[0].frame_checksum, toa::run_single(c, 4).methods[0].frame_checksum);
}

TEST(RunSingle, MetricInvariants) {
  auto c = small("A2");
  c.oracle = toa::OracleConfig{};
  const auto run = toa::run_single(c, 0);
  for (const auto& m : run.methods) {
    double sum = 0.0;
    for (double e : m.per_step_error) {
      EXPECT_GE(e, 0.0);
      sum += e;
    }
    EXPECT_NEAR(m.ctte, sum, 1e-12 * sum);
    EXPECT_EQ(m.ctte, m.cumulative_ctte.back());
    ASSERT_TRUE(m.oracle_gap.has_value());
    EXPECT_EQ(m.oracle_gap->size(), 120u);
    ASSERT_TRUE(m.optimal_path_length_Vprime.has_value());
    EXPECT_GT(m.path_length_V, 0.0);
  }
  ASSERT_TRUE(run.oracle_estimates.has_value());
  EXPECT_EQ(run.oracle_estimates->size(), 120u);
}

TEST(RunSingle, OlsInitStartsAtLinearEstimate) {
  auto c = small("A2", 1);
  c.init = toa::InitMode::Ols;
  const auto run = toa::run_single(c, 0);
  EXPECT_EQ(run.methods[0].estimates.size(), 120u);
  EXPECT_GT(run.methods[0].per_step_error.front(), 0.0);
}

TEST(RunSingle, ThreeDimensionalScenario) {
  auto c = small("A2", 1);
  c.sensors = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1)};
  c.x1_true = Eigen::Vector3d(2, 1, 1.5);
  const auto run = toa::run_single(c, 0);
  EXPECT_EQ(run.truth.front().size(), 3);
  EXPECT_FALSE(run.methods[0].failed);
  EXPECT_LT(run.methods[0].ctte / c.T, 0.05);
}

TEST(MonteCarlo, SingleRunMatchesRunSingle) {
  const auto c = small("A2", 1);
  const auto mc = toa::run_monte_carlo(c);
  const auto single = toa::run_single(c, 0);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(mc.methods[k].mean.cumulative_ctte, single.methods[k].cumulative_ctte);
    EXPECT_EQ(mc.methods[k].mean.ctte, single.methods[k].ctte);
  }
}

TEST(MonteCarlo, NoiseFreeMeanCtteTiny) {
  auto c = noise_free_static();
  c.methods = {toa::Method::OGD};
  const auto r = toa::run_monte_carlo(c, {2, false});
  EXPECT_LT(r.methods[0].mean.ctte, 1e-6);
}

TEST(MonteCarlo, MeansArePointwiseAverages) {
  const auto c = small("A3", 10);
  const auto r = toa::run_monte_carlo(c, {3, true});
  for (std::size_t k = 0; k < r.methods.size(); ++k) {
    ASSERT_EQ(r.raw[k].size(), 10u);
    for (std::size_t t : {std::size_t{0}, std::size_t{57}, std::size_t{119}}) {
      double sum = 0.0;
      for (const auto& run : r.raw[k]) sum += run.cumulative_ctte[t];
      EXPECT_NEAR(r.methods[k].mean.cumulative_ctte[t], sum / 10.0, 1e-13);
    }
  }
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResults) {
  const auto c = small("C1", 12);
  const auto one = toa::run_monte_carlo(c, {1, false});
  const auto many = toa::run_monte_carlo(c, {5, false});
  EXPECT_EQ(toa::steps_csv(one), toa::steps_csv(many));
  EXPECT_EQ(toa::runs_csv(one), toa::runs_csv(many));
}

TEST(MonteCarlo, A2OgdBeatsOnm) {
  auto c = toa::preset("A2");
  c.mc_runs = 100;
  const auto r = toa::run_monte_carlo(c);
  EXPECT_LT(r.find(toa::Method::OGD)->mean.ctte, r.find(toa::Method::ONM)->mean.ctte);
}

TEST(MonteCarlo, AnchorHitsFailScenario) {
  auto c = toa::preset("A1");
  c.trajectory = toa::TrajectorySpec::fixed({Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.6, 0.6)});
  c.T = 2;
  c.x1_true = Eigen::Vector2d(0.5, 0.5);
  c.mc_runs = 5;
  const auto r = toa::run_monte_carlo(c);
  EXPECT_TRUE(r.failed);
  EXPECT_EQ(r.methods[0].failed_runs, 5);
  EXPECT_EQ(r.runs[0][0].failed_step, 1);
  EXPECT_FALSE(r.failure_reason.empty());
}

TEST(MonteCarlo, ProvenanceAndConvexity) {
  auto c = small("A1", 2);
  c.analysis = toa::ConvexityConfig{};
  const auto r = toa::run_monte_carlo(c);
  EXPECT_EQ(r.provenance.config_hash, toa::config_hash(c));
  EXPECT_EQ(r.provenance.version, std::string(toa::kVersion));
  ASSERT_TRUE(r.convexity.has_value());
  EXPECT_EQ(r.convexity->mode, toa::ConstantsMode::Idealized);
}

TEST(Emit, HeaderContract) {
  const auto r = toa::run_monte_carlo(small("A1", 2));
  EXPECT_EQ(first_line(toa::steps_csv(r)),
            "t,true_1,true_2,ogd_1,ogd_2,onm_1,onm_2,err_ogd,err_onm,ctte_ogd,ctte_onm");
  auto only_onm = small("A1", 2);
  only_onm.methods = {toa::Method::ONM};
  EXPECT_EQ(first_line(toa::steps_csv(toa::run_monte_carlo(only_onm))), "t,true_1,true_2,onm_1,onm_2,err_onm,ctte_onm");
  auto with_oracle = small("A1", 2);
  with_oracle.oracle = toa::OracleConfig{};
  EXPECT_EQ(first_line(toa::steps_csv(toa::run_monte_carlo(with_oracle))),
            "t,true_1,true_2,ogd_1,ogd_2,onm_1,onm_2,xhat_1,xhat_2,err_ogd,err_onm,ctte_ogd,ctte_onm");
}

TEST(Emit, FullPrecisionRows) {
  const auto r = toa::run_monte_carlo(small("A2", 2));
  std::istringstream csv(toa::steps_csv(r));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  std::vector<std::string> cells;
  std::stringstream row(line);
  for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
  ASSERT_EQ(cells.size(), 11u);
  EXPECT_EQ(std::stod(cells[3]), r.representative[0].estimates[0][0]);
  EXPECT_EQ(std::stod(cells[9]), r.methods[0].mean.cumulative_ctte[0]);
}

TEST(Emit, ManifestAndReemission) {
  TempDir dir("emit");
  const auto r = toa::run_monte_carlo(small("A3", 3));
  const auto m1 = toa::emit(r, dir.path() / "a");
  const auto m2 = toa::emit(r, dir.path() / "b");
  ASSERT_EQ(m1.files.size(), m2.files.size());
  for (std::size_t k = 0; k < m1.files.size(); ++k) {
    EXPECT_TRUE(fs::exists(dir.path() / "a" / m1.files[k].path));
    EXPECT_EQ(m1.files[k].bytes, fs::file_size(dir.path() / "a" / m1.files[k].path));
    EXPECT_EQ(m1.files[k].crc32, toa::hex32(toa::crc32_of(slurp(dir.path() / "a" / m1.files[k].path))));
    if (m1.files[k].path != "timing.json") {
      EXPECT_EQ(m1.files[k].crc32, m2.files[k].crc32);
    }
  }
  for (const char* f : {"steps.csv", "runs.csv", "report.json", "ctte.svg", "trajectory.svg", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() / "a" / f)) << f;
  }
  const auto report = nlohmann::json::parse(slurp(dir.path() / "a" / "report.json"));
  EXPECT_EQ(report["provenance"]["config_hash"], r.provenance.config_hash);
  EXPECT_EQ(report["methods"].size(), 2u);
  EXPECT_NE(slurp(dir.path() / "a" / "trajectory.svg").find("<polyline"), std::string::npos);
}

TEST(Emit, IoErrorNamesPath) {
  TempDir dir("blocked");
  fs::create_directories(dir.path());
  std::ofstream(dir.path() / "file") << "x";
  const auto r = toa::run_monte_carlo(small("A1", 1));
  try {
    toa::emit(r, dir.path() / "file" / "sub");
    FAIL() << "expected an I/O error";
  } catch (const toa::Error& e) {
    EXPECT_NE(std::string(e.what()).find((dir.path() / "file").string()), std::string::npos);
  }
}

TEST(Benchmark, OgdCheaperThanOnm) {
  const auto row = toa::benchmark_per_iteration(toa::preset("A2"));
  EXPECT_GT(row.ogd_seconds, 0.0);
  EXPECT_LT(row.ogd_seconds, row.onm_seconds);
  EXPECT_EQ(row.iterations, 1000);
}

TEST(Benchmark, RejectsTooFewIterations) {
  toa::BenchmarkOptions opt;
  opt.iterations = 999;
  EXPECT_THROW(toa::benchmark_per_iteration(toa::preset("A1"), opt), toa::DomainError);
}

TEST(Benchmark, RepeatedRatiosStable) {
  const auto a = toa::benchmark_per_iteration(toa::preset("A1"));
  const auto b = toa::benchmark_per_iteration(toa::preset("A1"));
  EXPECT_LT(std::max(a.ratio, b.ratio) / std::min(a.ratio, b.ratio), 1.5);
}

}  // namespace
