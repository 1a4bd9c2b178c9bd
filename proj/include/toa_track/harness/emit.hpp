// Output files for a scenario result: per-step CSV, per-run CSV, JSON report,
// SVG figures and a checksummed manifest. Everything except timing.json is a
// pure function of the result, so re-emitting gives identical bytes.
#pragma once

#include "toa_track/harness/scenario.hpp"
#include "toa_track/harness/simulation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace toa {

struct ManifestEntry {
  std::string path;  ///< relative to the output directory
  std::size_t bytes = 0;
  std::string crc32;
};

struct Manifest {
  std::filesystem::path directory;
  std::vector<ManifestEntry> files;

  const ManifestEntry* find(const std::string& name) const {
    for (const auto& f : files) {
      if (f.path == name) return &f;
    }
    return nullptr;
  }
};

namespace detail {

/// Shortest form that round-trips: 17 significant digits.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline double series_at(const std::vector<double>& v, std::size_t k) {
  return k < v.size() ? v[k] : std::numeric_limits<double>::quiet_NaN();
}

/// Methods in canonical column order (OGD before ONM).
inline std::vector<std::size_t> method_columns(const ScenarioResult& r) {
  std::vector<std::size_t> idx;
  for (Method m : {Method::OGD, Method::ONM}) {
    for (std::size_t k = 0; k < r.methods.size(); ++k) {
      if (r.methods[k].method == m) idx.push_back(k);
    }
  }
  return idx;
}

}  // namespace detail

/// Header: t,true_1..true_n,ogd_1..ogd_n,onm_1..onm_n[,xhat_1..xhat_n],err_ogd,err_onm,ctte_ogd,ctte_onm.
/// Position columns come from the representative run (run 0); err/ctte columns
/// are Monte Carlo means. Method columns appear only for configured methods.
inline std::string steps_csv(const ScenarioResult& r) {
  const auto n = r.config.dim();
  const auto cols = detail::method_columns(r);
  const bool with_xhat = r.representative_oracle.has_value();
  std::string out = "t";
  auto add_point_header = [&](const std::string& prefix) {
    for (Eigen::Index k = 1; k <= n; ++k) out += "," + prefix + "_" + std::to_string(k);
  };
  add_point_header("true");
  for (std::size_t k : cols) add_point_header(detail::lower(method_name(r.methods[k].method)));
  if (with_xhat) add_point_header("xhat");
  for (std::size_t k : cols) out += ",err_" + detail::lower(method_name(r.methods[k].method));
  for (std::size_t k : cols) out += ",ctte_" + detail::lower(method_name(r.methods[k].method));
  out += "\n";

  const auto point_cells = [&](const std::vector<Eigen::VectorXd>& pts, std::size_t t) {
    std::string cells;
    for (Eigen::Index k = 0; k < n; ++k) {
      cells += ",";
      cells += detail::format_double(t < pts.size() ? pts[t][k] : std::numeric_limits<double>::quiet_NaN());
    }
    return cells;
  };
  for (std::size_t t = 0; t < static_cast<std::size_t>(r.config.T); ++t) {
    out += std::to_string(t + 1);
    out += point_cells(r.representative_truth, t);
    for (std::size_t k : cols) out += point_cells(r.representative[k].estimates, t);
    if (with_xhat) out += point_cells(*r.representative_oracle, t);
    for (std::size_t k : cols) out += "," + detail::format_double(detail::series_at(r.methods[k].mean.per_step_error, t));
    for (std::size_t k : cols) out += "," + detail::format_double(detail::series_at(r.methods[k].mean.cumulative_ctte, t));
    out += "\n";
  }
  return out;
}

inline std::string runs_csv(const ScenarioResult& r) {
  std::string out = "run,method,ctte,failed,failed_step,fallback_count,frame_checksum\n";
  for (std::size_t k = 0; k < r.methods.size(); ++k) {
    for (const auto& s : r.runs[k]) {
      out += std::to_string(s.run) + "," + std::string(method_name(r.methods[k].method)) + "," +
             detail::format_double(s.ctte) + "," + (s.failed ? "1" : "0") + "," + std::to_string(s.failed_step) +
             "," + std::to_string(s.fallback_count) + "," + hex32(s.frame_checksum) + "\n";
    }
  }
  return out;
}

inline nlohmann::json to_json(const ConvexityReport& c) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(detail::format_double(v)); };
  return {{"mode", std::string(constants_mode_name(c.mode))},
          {"delta", c.delta},
          {"c0", c.c0},
          {"K1", c.K1},
          {"K2", c.K2},
          {"m", c.m},
          {"eta", c.eta},
          {"sigma_max", c.sigma_max},
          {"v_max", c.v_max},
          {"noise_radius", c.noise_radius},
          {"min_distance", num(c.min_distance)},
          {"Lambda", num(c.Lambda)},
          {"kappa", num(c.kappa)},
          {"mu_hat", opt(c.mu_hat)},
          {"L_hat", opt(c.L_hat)},
          {"rho", opt(c.rho)},
          {"radius_rhs", num(c.radius_rhs)},
          {"init_distance", c.init_distance},
          {"dist_condition_ok", c.dist_condition_ok},
          {"kappa_positive", c.kappa_positive},
          {"radius_condition_ok", c.radius_condition_ok},
          {"init_condition_ok", c.init_condition_ok}};
}

inline nlohmann::json report_json(const ScenarioResult& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["provenance"] = {{"config_hash", r.provenance.config_hash},
                     {"root_seed", r.provenance.root_seed},
                     {"version", r.provenance.version}};
  j["failed"] = r.failed;
  j["failure_reason"] = r.failure_reason;
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& s : r.methods) {
    const auto& m = s.mean;
    nlohmann::json e{{"method", std::string(method_name(s.method))},
                     {"runs", s.runs},
                     {"failed_runs", s.failed_runs},
                     {"fallback_steps", s.fallback_steps},
                     {"mean_ctte", m.ctte},
                     {"mean_path_length_V", m.path_length_V},
                     {"N1", m.N1},
                     {"N2", m.N2},
                     {"max_noise_ratio", m.max_noise_ratio}};
    if (m.optimal_path_length_Vprime) e["mean_optimal_path_length_Vprime"] = *m.optimal_path_length_Vprime;
    if (m.oracle_gap && !m.oracle_gap->empty()) e["mean_final_oracle_gap"] = m.oracle_gap->back();
    methods.push_back(e);
  }
  j["methods"] = methods;
  j["convexity"] = r.convexity ? to_json(*r.convexity) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json timing_json(const ScenarioResult& r) {
  nlohmann::json j;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& s : r.methods) per[std::string(method_name(s.method))] = s.mean.wall_time_per_step;
  j["wall_time_per_step"] = per;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : r.timing) {
    rows.push_back({{"label", t.label},
                    {"ogd_seconds", t.ogd_seconds},
                    {"onm_seconds", t.onm_seconds},
                    {"ratio", t.ratio},
                    {"iterations", t.iterations}});
  }
  j["benchmark"] = rows;
  return j;
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line plot with axes, min/max tick labels and a legend.
inline std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                 const std::vector<PlotSeries>& series, bool equal_aspect = false) {
  constexpr double width = 640;
  constexpr double height = 440;
  constexpr double left = 80;
  constexpr double right = 20;
  constexpr double top = 40;
  constexpr double bottom = 60;
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      xmin = std::min(xmin, s.x[k]);
      xmax = std::max(xmax, s.x[k]);
      ymin = std::min(ymin, s.y[k]);
      ymax = std::max(ymax, s.y[k]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  if (equal_aspect) {
    const double sx = (xmax - xmin) / pw;
    const double sy = (ymax - ymin) / ph;
    const double s = std::max(sx, sy);
    const double cx = 0.5 * (xmin + xmax);
    const double cy = 0.5 * (ymin + ymax);
    xmin = cx - 0.5 * s * pw;
    xmax = cx + 0.5 * s * pw;
    ymin = cy - 0.5 * s * ph;
    ymax = cy + 0.5 * s * ph;
  }
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };
  using detail::format_short;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"440\" viewBox=\"0 0 640 440\">\n";
  svg += "<rect width=\"640\" height=\"440\" fill=\"white\"/>\n";
  svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" + title +
         "</text>\n";
  svg += "<rect x=\"" + format_short(left) + "\" y=\"" + format_short(top) + "\" width=\"" + format_short(pw) +
         "\" height=\"" + format_short(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  const std::string font = "font-family=\"sans-serif\" font-size=\"11\"";
  svg += "<text x=\"" + format_short(left) + "\" y=\"" + format_short(top + ph + 16) + "\" " + font + ">" +
         format_short(xmin) + "</text>\n";
  svg += "<text x=\"" + format_short(left + pw) + "\" y=\"" + format_short(top + ph + 16) +
         "\" text-anchor=\"end\" " + font + ">" + format_short(xmax) + "</text>\n";
  svg += "<text x=\"" + format_short(left - 6) + "\" y=\"" + format_short(top + ph) + "\" text-anchor=\"end\" " +
         font + ">" + format_short(ymin) + "</text>\n";
  svg += "<text x=\"" + format_short(left - 6) + "\" y=\"" + format_short(top + 10) + "\" text-anchor=\"end\" " +
         font + ">" + format_short(ymax) + "</text>\n";
  svg += "<text x=\"" + format_short(left + pw / 2) + "\" y=\"" + format_short(height - 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + xlabel + "</text>\n";
  svg += "<text x=\"18\" y=\"" + format_short(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         format_short(top + ph / 2) + ")\" font-family=\"sans-serif\" font-size=\"13\">" + ylabel + "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    std::string pts;
    for (std::size_t k = 0; k < ser.x.size() && k < ser.y.size(); ++k) {
      if (!std::isfinite(ser.x[k]) || !std::isfinite(ser.y[k])) continue;
      pts += format_short(px(ser.x[k])) + "," + format_short(py(ser.y[k])) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(s);
    svg += "<line x1=\"" + format_short(left + 10) + "\" y1=\"" + format_short(ly - 4) + "\" x2=\"" +
           format_short(left + 34) + "\" y2=\"" + format_short(ly - 4) + "\" stroke=\"" + ser.color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + format_short(left + 40) + "\" y=\"" + format_short(ly) + "\" " + font + ">" + ser.label +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

namespace detail {

inline const char* method_color(Method m) { return m == Method::OGD ? "#1f77b4" : "#d62728"; }

inline std::vector<double> coordinate(const std::vector<Eigen::VectorXd>& pts, Eigen::Index k) {
  std::vector<double> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(k < p.size() ? p[k] : 0.0);
  return out;
}

}  // namespace detail

/// Mean cumulative CTTE against t, one curve per method.
inline std::string ctte_svg(const ScenarioResult& r) {
  std::vector<PlotSeries> series;
  for (const auto& s : r.methods) {
    PlotSeries p{std::string(method_name(s.method)), detail::method_color(s.method), {}, s.mean.cumulative_ctte};
    for (std::size_t t = 0; t < p.y.size(); ++t) p.x.push_back(static_cast<double>(t + 1));
    series.push_back(std::move(p));
  }
  return svg_line_plot("CTTE (" + r.config.name + ", " + std::to_string(r.config.mc_runs) + " runs)", "t", "CTTE",
                       series);
}

/// Representative run in the first two coordinates: truth, trackers, optional x_hat.
inline std::string trajectory_svg(const ScenarioResult& r) {
  const Eigen::Index dy = r.config.dim() > 1 ? 1 : 0;
  std::vector<PlotSeries> series;
  series.push_back({"true", "#000000", detail::coordinate(r.representative_truth, 0),
                    detail::coordinate(r.representative_truth, dy)});
  for (std::size_t k = 0; k < r.methods.size(); ++k) {
    const auto& est = r.representative[k].estimates;
    series.push_back({std::string(method_name(r.methods[k].method)), detail::method_color(r.methods[k].method),
                      detail::coordinate(est, 0), detail::coordinate(est, dy)});
  }
  if (r.representative_oracle) {
    series.push_back({"x_hat", "#2ca02c", detail::coordinate(*r.representative_oracle, 0),
                      detail::coordinate(*r.representative_oracle, dy)});
  }
  return svg_line_plot("Trajectories (" + r.config.name + ", run 0)", "x1", "x2", series, true);
}

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"crc32", f.crc32}});
  return {{"files", files}};
}

/// Writes every output file into out_dir (created if needed) and returns the
/// manifest, which is also written as manifest.json.
inline Manifest emit(const ScenarioResult& result, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir.string() + "': " + ec.message());

  Manifest manifest;
  manifest.directory = out_dir;
  auto put = [&](const std::string& name, const std::string& content) {
    detail::write_file(out_dir / name, content);
    manifest.files.push_back({name, content.size(), hex32(crc32_of(content))});
  };
  put("steps.csv", steps_csv(result));
  put("runs.csv", runs_csv(result));
  put("report.json", report_json(result).dump(2) + "\n");
  put("ctte.svg", ctte_svg(result));
  put("trajectory.svg", trajectory_svg(result));
  put("timing.json", timing_json(result).dump(2) + "\n");
  detail::write_file(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  return manifest;
}

}  // namespace toa
