// Scenario configuration, named presets and the JSON config file format.
#pragma once

#include "toa_track/analysis.hpp"
#include "toa_track/estimators.hpp"
#include "toa_track/geometry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <boost/crc.hpp>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace toa {

inline constexpr std::string_view kVersion = "toa_track 1.0.0";

enum class InitMode { Exact, Ols };

struct TrajectorySpec {
  enum class Kind { RandomWalk, Fixed };
  Kind kind = Kind::RandomWalk;
  double step_scale = 0.0;
  std::vector<Eigen::VectorXd> points;  ///< Fixed only

  static TrajectorySpec random_walk(double step_scale) { return {Kind::RandomWalk, step_scale, {}}; }
  static TrajectorySpec fixed(std::vector<Eigen::VectorXd> pts) { return {Kind::Fixed, 0.0, std::move(pts)}; }
};

struct ScenarioConfig {
  std::string name = "custom";
  int T = 500;
  std::vector<Eigen::VectorXd> sensors;
  Eigen::VectorXd x1_true;
  TrajectorySpec trajectory;
  NoiseSchedule noise;
  std::vector<Method> methods{Method::OGD, Method::ONM};
  double eta = 0.1;
  InitMode init = InitMode::Exact;
  int mc_runs = 100;
  std::uint64_t root_seed = 0;
  std::optional<OracleConfig> oracle;
  std::optional<ConvexityConfig> analysis;

  Eigen::Index dim() const { return x1_true.size(); }

  bool has_method(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

  void validate() const {
    if (T < 1) throw DomainError("T must be >= 1");
    if (mc_runs < 1) throw DomainError("mc_runs must be >= 1");
    if (!(eta > 0.0)) throw DomainError("eta must be > 0");
    if (methods.empty()) throw DomainError("at least one method is required");
    if (x1_true.size() < 1) throw DomainError("x1_true is empty");
    if (!x1_true.allFinite()) throw DomainError("x1_true has a non-finite coordinate");
    if (sensors.empty()) throw DomainError("sensor list is empty");
    for (const auto& a : sensors) {
      if (a.size() != x1_true.size()) throw DomainError("sensor and target dimensions differ");
    }
    if (trajectory.kind == TrajectorySpec::Kind::Fixed) {
      if (static_cast<int>(trajectory.points.size()) != T) {
        throw DomainError("fixed trajectory has " + std::to_string(trajectory.points.size()) +
                          " points but T = " + std::to_string(T));
      }
      for (const auto& p : trajectory.points) {
        if (p.size() != x1_true.size()) throw DomainError("fixed trajectory dimension mismatch");
      }
    } else if (!(trajectory.step_scale >= 0.0)) {
      throw DomainError("step_scale must be >= 0");
    }
    if (oracle) oracle->validate();
    if (analysis) analysis->validate();
  }
};

/// Sensors used throughout the simulation study: (0.5,0.5), (0,0.5), (0.5,0).
inline std::vector<Eigen::VectorXd> reference_sensors() {
  return {Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d(0.5, 0.0)};
}

inline constexpr std::array<std::string_view, 8> kPresetNames{"A1", "A2", "A3", "B0", "B1", "B2", "C1", "C2"};

inline bool is_preset(std::string_view name) {
  return std::find(kPresetNames.begin(), kPresetNames.end(), name) != kPresetNames.end();
}

/// A*: T = 500 random walk with step 0.005 and three noise levels.
/// B*: T = 10000 variants. C*: large noise and/or path variation.
inline ScenarioConfig preset(std::string_view name) {
  ScenarioConfig c;
  c.name = std::string(name);
  c.sensors = reference_sensors();
  c.x1_true = Eigen::Vector2d(2.0, 1.0);
  c.trajectory = TrajectorySpec::random_walk(0.005);
  c.eta = 0.1;
  c.T = 500;
  if (name == "A1") {
    c.noise = NoiseSchedule::constant(0.0001);
  } else if (name == "A2") {
    c.noise = NoiseSchedule::constant(0.01);
  } else if (name == "A3") {
    c.noise = NoiseSchedule::inverse_sqrt(0.01);
  } else if (name == "B0") {
    c.noise = NoiseSchedule::constant(0.0001);
    c.T = 10000;
  } else if (name == "B1") {
    c.noise = NoiseSchedule::scaled_inverse_sqrt(0.005);
    c.T = 10000;
  } else if (name == "B2") {
    c.noise = NoiseSchedule::scaled_inverse_sqrt(0.008);
    c.T = 10000;
  } else if (name == "C1") {
    c.trajectory = TrajectorySpec::random_walk(0.1);
    c.noise = NoiseSchedule::scaled_inverse_sqrt(0.1);
  } else if (name == "C2") {
    c.trajectory = TrajectorySpec::random_walk(0.5);
    c.noise = NoiseSchedule::scaled_inverse_sqrt(0.001);
  } else {
    throw DomainError("unknown preset '" + std::string(name) + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json point_to_json(const Eigen::VectorXd& p) {
  return nlohmann::json(std::vector<double>(p.data(), p.data() + p.size()));
}

inline Eigen::VectorXd point_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json points_to_json(const std::vector<Eigen::VectorXd>& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back(point_to_json(p));
  return arr;
}

inline std::vector<Eigen::VectorXd> points_from_json(const nlohmann::json& j) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& p : j) out.push_back(point_from_json(p));
  return out;
}

inline std::string_view noise_kind_name(NoiseSchedule::Kind k) {
  switch (k) {
    case NoiseSchedule::Kind::Constant:
      return "constant";
    case NoiseSchedule::Kind::InverseSqrt:
      return "inverse-sqrt";
    case NoiseSchedule::Kind::ScaledInverseSqrt:
      return "scaled-inverse-sqrt";
  }
  return "constant";
}

inline Method method_from_name(const std::string& s) {
  if (s == "OGD" || s == "ogd") return Method::OGD;
  if (s == "ONM" || s == "onm") return Method::ONM;
  throw DomainError("unknown method '" + s + "'");
}

inline InitMode init_from_name(const std::string& s) {
  if (s == "exact") return InitMode::Exact;
  if (s == "ols") return InitMode::Ols;
  throw DomainError("unknown init mode '" + s + "' (expected exact|ols)");
}

}  // namespace detail

inline std::string_view init_name(InitMode m) { return m == InitMode::Exact ? "exact" : "ols"; }

inline nlohmann::json to_json(const OracleConfig& o) {
  nlohmann::json j;
  j["step_size"] = o.step_size ? nlohmann::json(*o.step_size) : nlohmann::json(nullptr);
  j["gradient_tolerance"] = o.gradient_tolerance;
  j["max_iterations"] = o.max_iterations;
  return j;
}

inline OracleConfig oracle_from_json(const nlohmann::json& j) {
  OracleConfig o;
  if (j.contains("step_size") && !j["step_size"].is_null()) o.step_size = j["step_size"].get<double>();
  o.gradient_tolerance = j.value("gradient_tolerance", o.gradient_tolerance);
  o.max_iterations = j.value("max_iterations", o.max_iterations);
  return o;
}

inline nlohmann::json to_json(const ConvexityConfig& c) {
  return {{"delta", c.delta}, {"c0", c.c0},   {"K1", c.K1},
          {"K2", c.K2},       {"eig_samples", c.eig_samples}, {"seed", c.seed},
          {"mode", std::string(constants_mode_name(c.mode))}};
}

inline ConvexityConfig convexity_from_json(const nlohmann::json& j) {
  ConvexityConfig c;
  c.delta = j.value("delta", c.delta);
  c.c0 = j.value("c0", c.c0);
  c.K1 = j.value("K1", c.K1);
  c.K2 = j.value("K2", c.K2);
  c.eig_samples = j.value("eig_samples", c.eig_samples);
  c.seed = j.value("seed", c.seed);
  const std::string mode = j.value("mode", std::string(j.contains("K1") || j.contains("K2") ? "supplied" : "idealized"));
  if (mode == "idealized") {
    c.mode = ConstantsMode::Idealized;
  } else if (mode == "empirical") {
    c.mode = ConstantsMode::Empirical;
  } else if (mode == "supplied") {
    c.mode = ConstantsMode::Supplied;
  } else {
    throw DomainError("unknown constants mode '" + mode + "'");
  }
  return c;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["T"] = c.T;
  j["sensors"] = detail::points_to_json(c.sensors);
  j["x1_true"] = detail::point_to_json(c.x1_true);
  if (c.trajectory.kind == TrajectorySpec::Kind::RandomWalk) {
    j["trajectory"] = {{"kind", "random-walk"}, {"step_scale", c.trajectory.step_scale}};
  } else {
    j["trajectory"] = {{"kind", "fixed"}, {"points", detail::points_to_json(c.trajectory.points)}};
  }
  j["noise"] = {{"kind", std::string(detail::noise_kind_name(c.noise.kind))},
                {"scale", c.noise.scale},
                {"c0", c.noise.c0}};
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : c.methods) methods.push_back(std::string(method_name(m)));
  j["methods"] = methods;
  j["eta"] = c.eta;
  j["init"] = std::string(init_name(c.init));
  j["mc_runs"] = c.mc_runs;
  j["root_seed"] = c.root_seed;
  j["oracle"] = c.oracle ? to_json(*c.oracle) : nlohmann::json(nullptr);
  j["analysis"] = c.analysis ? to_json(*c.analysis) : nlohmann::json(nullptr);
  return j;
}

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  // start from a preset when named, so files only need to list overrides
  if (j.contains("preset")) c = preset(j["preset"].get<std::string>());
  c.name = j.value("name", c.name);
  c.T = j.value("T", c.T);
  if (j.contains("sensors")) c.sensors = detail::points_from_json(j["sensors"]);
  if (j.contains("x1_true")) c.x1_true = detail::point_from_json(j["x1_true"]);
  if (j.contains("trajectory")) {
    const auto& tj = j["trajectory"];
    const std::string kind = tj.value("kind", std::string("random-walk"));
    if (kind == "random-walk") {
      c.trajectory = TrajectorySpec::random_walk(tj.value("step_scale", 0.0));
    } else if (kind == "fixed") {
      c.trajectory = TrajectorySpec::fixed(detail::points_from_json(tj.at("points")));
      if (!j.contains("T")) c.T = static_cast<int>(c.trajectory.points.size());
      if (!j.contains("x1_true") && !c.trajectory.points.empty()) c.x1_true = c.trajectory.points.front();
    } else {
      throw DomainError("unknown trajectory kind '" + kind + "'");
    }
  }
  if (j.contains("noise")) {
    const auto& nj = j["noise"];
    const std::string kind = nj.value("kind", std::string("constant"));
    const double scale = nj.value("scale", 0.0);
    if (kind == "constant") {
      c.noise = NoiseSchedule::constant(scale);
    } else if (kind == "inverse-sqrt") {
      c.noise = NoiseSchedule::inverse_sqrt(scale);
    } else if (kind == "scaled-inverse-sqrt") {
      c.noise = NoiseSchedule::scaled_inverse_sqrt(scale);
    } else {
      throw DomainError("unknown noise kind '" + kind + "'");
    }
    c.noise.c0 = nj.value("c0", c.noise.c0);
  }
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j["methods"]) c.methods.push_back(detail::method_from_name(m.get<std::string>()));
  }
  c.eta = j.value("eta", c.eta);
  if (j.contains("init")) c.init = detail::init_from_name(j["init"].get<std::string>());
  c.mc_runs = j.value("mc_runs", c.mc_runs);
  c.root_seed = j.value("root_seed", c.root_seed);
  if (j.contains("oracle")) {
    if (j["oracle"].is_null() || j["oracle"] == false) {
      c.oracle.reset();
    } else {
      c.oracle = j["oracle"].is_boolean() ? OracleConfig{} : oracle_from_json(j["oracle"]);
    }
  }
  if (j.contains("analysis")) {
    if (j["analysis"].is_null() || j["analysis"] == false) {
      c.analysis.reset();
    } else {
      c.analysis = j["analysis"].is_boolean() ? ConvexityConfig{} : convexity_from_json(j["analysis"]);
    }
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("config file '" + path + "': " + e.what());
  }
}

/// A preset name or a path to a JSON config file.
inline ScenarioConfig resolve_scenario(const std::string& preset_or_path) {
  if (is_preset(preset_or_path)) return preset(preset_or_path);
  return load_config_file(preset_or_path);
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

inline std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

/// Checksum of the canonical JSON form of a config.
inline std::string config_hash(const ScenarioConfig& c) { return hex32(crc32_of(to_json(c).dump())); }

}  // namespace toa
