// Copyright 2026 The modecollapse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MODECOLLAPSE_EXPORT_HPP
#define MODECOLLAPSE_EXPORT_HPP

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "modecollapse/errors.hpp"
#include "modecollapse/experiments.hpp"
#include "modecollapse/fixed_points.hpp"
#include "modecollapse/model.hpp"
#include "modecollapse/svg.hpp"

namespace modecollapse {

enum class Format { csv, json, svg };

inline Format parse_format(std::string_view text) {
  if (text == "csv") return Format::csv;
  if (text == "json") return Format::json;
  if (text == "svg" || text == "svg_plot") return Format::svg;
  throw ConfigError("unknown format '" + std::string(text) + "'");
}

using RcSweep = std::vector<RcSearchResult>;
using FixedPointList = std::vector<FixedPointReport>;
using Result = std::variant<TrajectoryRecord, FixedPointList, BasinMap, QuasiSweep, RcSweep>;

namespace detail {

using nlohmann::json;

/// NaN and infinities become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double to_double(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json series_json(const TrajectoryRecord& rec, std::size_t stride) {
  json t = json::array(), m1 = json::array(), m2 = json::array(), s = json::array(),
       w1 = json::array(), w2 = json::array(), detP = json::array(), rate = json::array(),
       loss = json::array();
  for (std::size_t k = 0; k < rec.size(); k += stride) {
    t.push_back(rec.times[k]);
    m1.push_back(rec.states[k].m1);
    m2.push_back(rec.states[k].m2);
    s.push_back(rec.states[k].s);
    w1.push_back(rec.states[k].w1);
    w2.push_back(rec.states[k].w2);
    detP.push_back(rec.detP_series[k]);
    rate.push_back(number(rec.rhs_norm_series[k]));
    if (k < rec.loss_series.size()) loss.push_back(number(rec.loss_series[k]));
  }
  json out = {{"t", t}, {"m1", m1}, {"m2", m2}, {"s", s}, {"w1", w1}, {"w2", w2},
              {"detP", detP}, {"rhs_norm", rate}};
  if (!loss.empty()) out["loss_estimate"] = loss;
  return out;
}

inline TrajectoryRecord series_from_json(const json& j) {
  TrajectoryRecord rec;
  const auto& t = j.at("t");
  for (std::size_t k = 0; k < t.size(); ++k) {
    SummaryState x;
    x.m1 = j.at("m1")[k].get<double>();
    x.m2 = j.at("m2")[k].get<double>();
    x.s = j.at("s")[k].get<double>();
    x.w1 = j.at("w1")[k].get<double>();
    x.w2 = j.at("w2")[k].get<double>();
    rec.times.push_back(t[k].get<double>());
    rec.states.push_back(x);
    rec.detP_series.push_back(j.at("detP")[k].get<double>());
    rec.rhs_norm_series.push_back(to_double(j.at("rhs_norm")[k]));
    if (j.contains("loss_estimate")) rec.loss_series.push_back(to_double(j["loss_estimate"][k]));
  }
  return rec;
}

inline json verdict_json(const CollapseVerdict& v) {
  return {{"collapsed", v.collapsed}, {"reason", std::string(to_string(v.reason))}};
}

inline CollapseReason parse_reason(std::string_view text) {
  for (CollapseReason r :
       {CollapseReason::none, CollapseReason::mean_alignment, CollapseReason::weight_vanishing})
    if (to_string(r) == text) return r;
  throw ConfigError("unknown collapse reason '" + std::string(text) + "'");
}

inline std::size_t stride_for(std::size_t n, std::size_t max_points) {
  return n <= max_points ? 1 : (n + max_points - 1) / max_points;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// JSON.

inline nlohmann::json to_json(const TrajectoryRecord& rec) {
  nlohmann::json j = detail::series_json(rec, 1);
  j["type"] = "trajectory";
  j["converged"] = rec.converged;
  j["steps"] = rec.steps;
  j["verdict"] = detail::verdict_json(rec.verdict);
  return j;
}

inline nlohmann::json to_json(const FixedPointList& points) {
  nlohmann::json arr = nlohmann::json::array();
  for (const FixedPointReport& fp : points) {
    arr.push_back({{"kind", std::string(to_string(fp.kind))},
                   {"m1", fp.m1},
                   {"m2", fp.m2},
                   {"s", fp.s},
                   {"eigenvalues", {fp.eigenvalues[0], fp.eigenvalues[1], fp.eigenvalues[2]}},
                   {"stable", fp.stable},
                   {"detP", fp.detP}});
  }
  return {{"type", "fixed_points"}, {"points", arr}};
}

inline nlohmann::json to_json(const BasinMap& map) {
  nlohmann::json labels = nlohmann::json::array();
  for (BasinLabel l : map.labels) labels.push_back(std::string(to_string(l)));
  nlohmann::json boundary = nlohmann::json::array();
  for (const auto& line : map.boundary) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Point2& p : line) pts.push_back({p.x, p.y});
    boundary.push_back(pts);
  }
  return {{"type", "basin"}, {"R", map.R},       {"w_star", map.w_star},
          {"w1", map.w1},    {"s0", map.s0},     {"grid_n", map.grid_n},
          {"axis", map.axis}, {"labels", labels}, {"boundary", boundary}};
}

inline nlohmann::json to_json(const QuasiSweep& sweep, std::size_t max_points = 2000) {
  using detail::number;
  nlohmann::json runs = nlohmann::json::array();
  for (const QuasiRun& run : sweep.runs) {
    runs.push_back({{"R", run.R},
                    {"seed", run.seed},
                    {"verdict", std::string(to_string(run.verdict))},
                    {"quasi", run.episode.found},
                    {"T_quasi", number(run.episode.found ? run.episode.T_quasi : NAN)},
                    {"t_enter", number(run.episode.found ? run.episode.t_enter : NAN)},
                    {"t_exit", number(run.episode.found ? run.episode.t_exit : NAN)},
                    {"plateau_slope", number(run.episode.plateau_slope)},
                    {"plateau_samples", run.episode.plateau_samples},
                    {"collapse", detail::verdict_json(run.record.verdict)},
                    {"series", detail::series_json(
                                   run.record, detail::stride_for(run.record.size(), max_points))}});
  }
  const QuasiFit& f = sweep.fit;
  nlohmann::json ratios = nlohmann::json::array(), slopes = nlohmann::json::array();
  for (std::size_t k = 0; k < f.radii.size(); ++k) {
    slopes.push_back(number(f.plateau_slope[k]));
    ratios.push_back(number(f.plateau_ratio[k]));
  }
  return {{"type", "quasi"},
          {"runs", runs},
          {"fit",
           {{"radii", f.radii},
            {"T_quasi", f.T_quasi},
            {"log_T_slope", number(f.log_T_slope)},
            {"log_T_intercept", number(f.log_T_intercept)},
            {"plateau_slope", slopes},
            {"plateau_ratio", ratios},
            {"excluded", f.excluded}}}};
}

inline nlohmann::json to_json(const RcSearchResult& r) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedThreshold& st : r.seeds) {
    seeds.push_back({{"seed", st.seed},
                     {"collapses", st.collapses},
                     {"threshold", detail::number(st.threshold)},
                     {"lo", st.lo},
                     {"hi", st.hi},
                     {"non_monotone", st.non_monotone},
                     {"unconverged", st.unconverged},
                     {"trials", st.trials}});
  }
  return {{"type", "rc_search"},
          {"d", r.d},
          {"family", std::string(to_string(r.family))},
          {"R_c", detail::number(r.R_c)},
          {"per_seed_thresholds", r.per_seed_thresholds},
          {"seeds_never_collapsing", r.seeds_never_collapsing},
          {"bracket", {r.R_lo, r.R_hi}},
          {"tol", r.tol},
          {"seeds", seeds}};
}

inline nlohmann::json to_json(const RcSweep& sweep) {
  if (sweep.size() == 1) return to_json(sweep.front());
  nlohmann::json arr = nlohmann::json::array();
  for (const RcSearchResult& r : sweep) arr.push_back(to_json(r));
  return {{"type", "rc_sweep"}, {"results", arr}};
}

inline RcSearchResult rc_from_json(const nlohmann::json& j) {
  RcSearchResult r;
  r.d = j.at("d").get<int>();
  r.family = parse_family(j.at("family").get<std::string>());
  r.R_c = detail::to_double(j.at("R_c"));
  r.per_seed_thresholds = j.at("per_seed_thresholds").get<std::vector<double>>();
  r.seeds_never_collapsing = j.at("seeds_never_collapsing").get<std::vector<std::uint64_t>>();
  if (j.contains("bracket")) {
    r.R_lo = j["bracket"][0].get<double>();
    r.R_hi = j["bracket"][1].get<double>();
  }
  if (j.contains("tol")) r.tol = j["tol"].get<double>();
  if (j.contains("seeds")) {
    for (const auto& s : j["seeds"]) {
      SeedThreshold st;
      st.seed = s.at("seed").get<std::uint64_t>();
      st.collapses = s.at("collapses").get<bool>();
      st.threshold = detail::to_double(s.at("threshold"));
      st.lo = s.at("lo").get<double>();
      st.hi = s.at("hi").get<double>();
      st.non_monotone = s.at("non_monotone").get<bool>();
      st.unconverged = s.at("unconverged").get<int>();
      st.trials = s.at("trials").get<int>();
      r.seeds.push_back(st);
    }
  }
  return r;
}

/// Inverse of to_json for every result type.
inline Result result_from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "trajectory") {
      TrajectoryRecord rec = detail::series_from_json(j);
      rec.converged = j.at("converged").get<bool>();
      rec.steps = j.at("steps").get<std::int64_t>();
      rec.verdict.collapsed = j.at("verdict").at("collapsed").get<bool>();
      rec.verdict.reason = detail::parse_reason(j.at("verdict").at("reason").get<std::string>());
      if (!rec.empty()) rec.verdict.final_state = rec.states.back();
      return rec;
    }
    if (type == "fixed_points") {
      FixedPointList points;
      for (const auto& p : j.at("points")) {
        FixedPointReport fp;
        const std::string kind = p.at("kind").get<std::string>();
        for (FixedPointKind k :
             {FixedPointKind::global_min, FixedPointKind::flipped, FixedPointKind::align_pp,
              FixedPointKind::align_mm, FixedPointKind::align_root, FixedPointKind::interior})
          if (to_string(k) == kind) fp.kind = k;
        fp.m1 = p.at("m1").get<double>();
        fp.m2 = p.at("m2").get<double>();
        fp.s = p.at("s").get<double>();
        for (int k = 0; k < 3; ++k) fp.eigenvalues[k] = p.at("eigenvalues")[k].get<double>();
        fp.stable = p.at("stable").get<bool>();
        fp.detP = p.at("detP").get<double>();
        points.push_back(fp);
      }
      return points;
    }
    if (type == "basin") {
      BasinMap map;
      map.R = j.at("R").get<double>();
      map.w_star = j.at("w_star").get<double>();
      map.w1 = j.at("w1").get<double>();
      map.s0 = j.at("s0").get<double>();
      map.grid_n = j.at("grid_n").get<int>();
      map.axis = j.at("axis").get<std::vector<double>>();
      for (const auto& l : j.at("labels")) map.labels.push_back(parse_basin_label(l.get<std::string>()));
      for (const auto& line : j.at("boundary")) {
        std::vector<Point2> pts;
        for (const auto& p : line) pts.push_back({p[0].get<double>(), p[1].get<double>()});
        map.boundary.push_back(pts);
      }
      if (map.labels.size() != static_cast<std::size_t>(map.grid_n) * map.grid_n)
        throw ConfigError("basin label count does not match grid_n");
      return map;
    }
    if (type == "quasi") {
      QuasiSweep sweep;
      for (const auto& r : j.at("runs")) {
        QuasiRun run;
        run.R = r.at("R").get<double>();
        run.seed = r.at("seed").get<std::uint64_t>();
        run.verdict = parse_quasi_verdict(r.at("verdict").get<std::string>());
        run.episode.found = r.at("quasi").get<bool>();
        run.episode.T_quasi = detail::to_double(r.at("T_quasi"));
        run.episode.t_enter = detail::to_double(r.at("t_enter"));
        run.episode.t_exit = detail::to_double(r.at("t_exit"));
        run.episode.plateau_slope = detail::to_double(r.at("plateau_slope"));
        run.episode.plateau_samples = r.at("plateau_samples").get<std::size_t>();
        run.record = detail::series_from_json(r.at("series"));
        run.record.verdict.collapsed = r.at("collapse").at("collapsed").get<bool>();
        run.record.verdict.reason =
            detail::parse_reason(r.at("collapse").at("reason").get<std::string>());
        sweep.runs.push_back(std::move(run));
      }
      const auto& f = j.at("fit");
      sweep.fit.radii = f.at("radii").get<std::vector<double>>();
      sweep.fit.T_quasi = f.at("T_quasi").get<std::vector<double>>();
      sweep.fit.log_T_slope = detail::to_double(f.at("log_T_slope"));
      sweep.fit.log_T_intercept = detail::to_double(f.at("log_T_intercept"));
      for (const auto& v : f.at("plateau_slope")) sweep.fit.plateau_slope.push_back(detail::to_double(v));
      for (const auto& v : f.at("plateau_ratio")) sweep.fit.plateau_ratio.push_back(detail::to_double(v));
      sweep.fit.excluded = f.at("excluded").get<std::vector<double>>();
      return sweep;
    }
    if (type == "rc_search") return RcSweep{rc_from_json(j)};
    if (type == "rc_sweep") {
      RcSweep sweep;
      for (const auto& r : j.at("results")) sweep.push_back(rc_from_json(r));
      return sweep;
    }
    throw ConfigError("unknown result type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed result JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV.

/// CSV: m1_0,m2_0,label
inline void write_csv(std::ostream& out, const BasinMap& map) {
  out.precision(17);
  out << "m1_0,m2_0,label\n";
  for (int i = 0; i < map.grid_n; ++i)
    for (int j = 0; j < map.grid_n; ++j)
      out << map.axis[i] << ',' << map.axis[j] << ',' << to_string(map.at(i, j)) << '\n';
}

/// CSV: R,seed,verdict,T_quasi,t_enter,t_exit,plateau_slope,plateau_samples
inline void write_csv(std::ostream& out, const QuasiSweep& sweep) {
  out.precision(17);
  out << "R,seed,verdict,T_quasi,t_enter,t_exit,plateau_slope,plateau_samples\n";
  for (const QuasiRun& run : sweep.runs) {
    const QuasiEpisode& e = run.episode;
    out << run.R << ',' << run.seed << ',' << to_string(run.verdict) << ','
        << (e.found ? e.T_quasi : NAN) << ',' << (e.found ? e.t_enter : NAN) << ','
        << (e.found ? e.t_exit : NAN) << ',' << e.plateau_slope << ',' << e.plateau_samples
        << '\n';
  }
}

/// CSV: d,family,seed,collapses,threshold,lo,hi,non_monotone,unconverged,trials
inline void write_csv(std::ostream& out, const RcSweep& sweep) {
  out.precision(17);
  out << "d,family,seed,collapses,threshold,lo,hi,non_monotone,unconverged,trials\n";
  for (const RcSearchResult& r : sweep)
    for (const SeedThreshold& st : r.seeds)
      out << r.d << ',' << to_string(r.family) << ',' << st.seed << ',' << (st.collapses ? 1 : 0)
          << ',' << st.threshold << ',' << st.lo << ',' << st.hi << ','
          << (st.non_monotone ? 1 : 0) << ',' << st.unconverged << ',' << st.trials << '\n';
}

/// Overlap-matrix CSV for K > 2 runs, the K = 2 trajectory schema otherwise.
inline void write_csv(std::ostream& out, const TrajectoryRecord& rec) {
  if (!rec.overlaps.empty()) write_overlap_csv(out, rec);
  else write_trajectory_csv(out, rec, !rec.loss_series.empty());
}

inline void write_csv(std::ostream& out, const FixedPointList& points) {
  write_fixed_points_csv(out, points);
}

// ---------------------------------------------------------------------------
// SVG.

namespace detail {

inline std::vector<svg::Series> overlap_series(const TrajectoryRecord& rec) {
  svg::Series m1{"m1", "#1f77b4"}, m2{"m2", "#ff7f0e"}, s{"s", "#2ca02c"};
  for (std::size_t k = 0; k < rec.size(); ++k) {
    for (svg::Series* p : {&m1, &m2, &s}) p->x.push_back(rec.times[k]);
    m1.y.push_back(rec.states[k].m1);
    m2.y.push_back(rec.states[k].m2);
    s.y.push_back(rec.states[k].s);
  }
  return {m1, m2, s};
}

inline std::vector<svg::Series> weight_series(const TrajectoryRecord& rec) {
  svg::Series w1{"w1", "#1f77b4"}, w2{"w2", "#ff7f0e"};
  for (std::size_t k = 0; k < rec.size(); ++k) {
    w1.x.push_back(rec.times[k]);
    w2.x.push_back(rec.times[k]);
    w1.y.push_back(rec.states[k].w1);
    w2.y.push_back(rec.states[k].w2);
  }
  return {w1, w2};
}

inline std::string trajectory_panels(const TrajectoryRecord& rec, double left, double top,
                                     const std::string& title) {
  std::string body;
  svg::Panel upper(left, top, 260, 150);
  upper.set_range(rec.empty() ? 0.0 : rec.times.front(), rec.empty() ? 1.0 : rec.times.back(),
                  -1.05, 1.05);
  const auto over = overlap_series(rec);
  body += upper.axes(title, "", "overlap");
  for (const auto& s : over) body += upper.line(s);
  body += upper.legend(over);
  svg::Panel lower(left, top + 200, 260, 150);
  lower.set_range(rec.empty() ? 0.0 : rec.times.front(), rec.empty() ? 1.0 : rec.times.back(),
                  -0.02, 1.02);
  const auto w = weight_series(rec);
  body += lower.axes("", "t", "weight");
  for (const auto& s : w) body += lower.line(s);
  body += lower.legend(w);
  return body;
}

}  // namespace detail

inline std::string render_svg(const TrajectoryRecord& rec) {
  return svg::document(360, 420, detail::trajectory_panels(rec, 70, 25, "trajectory"));
}

inline std::string render_svg(const BasinMap& map) {
  const double size = 400, left = 60, top = 30;
  std::string body;
  const double cell = size / map.grid_n;
  for (int i = 0; i < map.grid_n; ++i) {
    for (int j = 0; j < map.grid_n; ++j) {
      const char* color = "#bbbbbb";
      switch (map.at(i, j)) {
        case BasinLabel::global_min: color = "#6baed6"; break;
        case BasinLabel::flipped: color = "#c6dbef"; break;
        case BasinLabel::collapse: color = "#fb6a4a"; break;
        case BasinLabel::undecided: break;
      }
      body += "<rect x=\"" + svg::num(left + i * cell) + "\" y=\"" +
              svg::num(top + size - (j + 1) * cell) + "\" width=\"" + svg::num(cell + 0.05) +
              "\" height=\"" + svg::num(cell + 0.05) + "\" fill=\"" + color + "\"/>\n";
    }
  }
  svg::Panel panel(left, top, size, size);
  panel.set_range(-1.0, 1.0, -1.0, 1.0);
  for (const auto& line : map.boundary) {
    svg::Series s{"", "black"};
    s.dashed = true;
    for (const Point2& p : line) {
      s.x.push_back(p.x);
      s.y.push_back(p.y);
    }
    body += panel.line(s);
  }
  body += panel.axes("basin, R = " + svg::tick_label(map.R) + ", s0 = " + svg::tick_label(map.s0),
                     "m1_0", "m2_0");
  const std::vector<std::pair<const char*, const char*>> keys = {
      {"global_min", "#6baed6"}, {"flipped", "#c6dbef"}, {"collapse", "#fb6a4a"},
      {"undecided", "#bbbbbb"}};
  double y = top + 12;
  for (const auto& [name, color] : keys) {
    body += "<rect x=\"" + svg::num(left + size + 10) + "\" y=\"" + svg::num(y - 9) +
            "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    body += "<text x=\"" + svg::num(left + size + 24) + "\" y=\"" + svg::num(y) +
            "\" font-size=\"10\">" + name + "</text>\n";
    y += 14;
  }
  return svg::document(left + size + 100, top + size + 50, body);
}

/// One column per radius (first seed at that radius): overlaps on top,
/// weights below.
inline std::string render_svg(const QuasiSweep& sweep) {
  std::vector<const QuasiRun*> shown;
  for (const QuasiRun& run : sweep.runs) {
    bool seen = false;
    for (const QuasiRun* p : shown) seen = seen || p->R == run.R;
    if (!seen) shown.push_back(&run);
  }
  std::string body;
  double left = 70;
  for (const QuasiRun* run : shown) {
    body += detail::trajectory_panels(run->record, left, 25,
                                      "R = " + svg::tick_label(run->R) + " (" +
                                          std::string(to_string(run->verdict)) + ")");
    left += 330;
  }
  return svg::document(std::max(360.0, left), 420, body);
}

inline std::string render_svg(const RcSweep& sweep) {
  svg::Series agg{"median R_c", "#d62728"}, pts{"", "#7f7f7f"};
  pts.markers = true;
  for (const RcSearchResult& r : sweep) {
    agg.x.push_back(r.d);
    agg.y.push_back(r.R_c);
    for (double t : r.per_seed_thresholds) {
      pts.x.push_back(r.d);
      pts.y.push_back(t);
    }
  }
  svg::Panel panel(70, 30, 360, 260);
  panel.fit({agg, pts});
  std::string body = panel.axes("critical radius", "d", "R_c");
  body += panel.line(pts);
  body += panel.line(agg);
  svg::Series agg_markers = agg;
  agg_markers.markers = true;
  agg_markers.label.clear();
  body += panel.line(agg_markers);
  body += panel.legend({agg});
  return svg::document(480, 340, body);
}

inline std::string render_svg(const FixedPointList& points) {
  svg::Series stable{"stable", "#2ca02c"}, unstable{"unstable", "#d62728"};
  stable.markers = unstable.markers = true;
  for (const FixedPointReport& fp : points) {
    svg::Series& s = fp.stable ? stable : unstable;
    s.x.push_back(fp.m1);
    s.y.push_back(fp.m2);
  }
  svg::Panel panel(70, 30, 300, 300);
  panel.set_range(-1.05, 1.05, -1.05, 1.05);
  std::string body = panel.axes("fixed points", "m1", "m2");
  body += panel.line(stable) + panel.line(unstable) + panel.legend({stable, unstable});
  return svg::document(420, 380, body);
}

// ---------------------------------------------------------------------------

inline std::string render(const Result& result, Format format) {
  return std::visit(
      [format](const auto& r) -> std::string {
        switch (format) {
          case Format::json: return to_json(r).dump(2) + "\n";
          case Format::svg: return render_svg(r);
          case Format::csv: {
            std::ostringstream out;
            write_csv(out, r);
            return out.str();
          }
        }
        return {};
      },
      result);
}

/// Writes the result to `path`; "-" means standard output.
inline void export_result(const Result& result, const std::string& path, Format format,
                          std::ostream& stdout_stream) {
  const std::string text = render(result, format);
  if (path == "-") {
    stdout_stream << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write '" + path + "': " + std::strerror(errno));
}

inline Result read_result_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not JSON: " + e.what());
  }
  return result_from_json(j);
}

}  // namespace modecollapse

#endif  // MODECOLLAPSE_EXPORT_HPP
