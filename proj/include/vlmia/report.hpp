// report.hpp
//
// Result assembly: one row per (model_tag, tau) with per-metric member /
// non-member similarity means and ROC-AUC mean+-std, emitted as a CSV
// table, a JSON summary (including every per-repeat AUC so the aggregation
// can be re-checked from the artifact alone), loss-trace CSVs and SVG
// plots (grouped similarity-mean bars per tau, and AUC-vs-granularity
// curves, one polyline per tau).

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmia/errors.hpp"
#include "vlmia/mia.hpp"
#include "vlmia/toy_vlm.hpp"
#include "vlmia/util.hpp"

namespace vlmia {

struct ReportRow {
  std::string model_tag;
  double tau = 0.0;
  std::map<std::string, AttackResult> by_metric;  // keyed by metric name
};

struct ReportBundle {
  std::vector<ReportRow> rows;  // sorted by (model_tag, tau)
  std::map<std::string, std::vector<TraceEntry>> traces;  // per tau label
  std::string config_hash;
  double sigma = 1.0;
  std::string regularized_sheet = "encoder-hidden";
  std::string auc_population = "all (g, repeat) AUC values of the granularity sweep";
};

inline nlohmann::json to_json(const AttackResult& r) {
  nlohmann::json per_g = nlohmann::json::array();
  for (const auto& run : r.per_g) {
    per_g.push_back({{"g", run.g}, {"repeats", run.repeats}, {"auc", run.aucs}});
  }
  return {{"metric", r.metric},
          {"auc_mean", r.auc_mean},
          {"auc_std", r.auc_std},
          {"per_g", per_g},
          {"alpha_in", r.alpha_in},
          {"alpha_out", r.alpha_out},
          {"delta", r.delta},
          {"best_threshold", r.best_threshold},
          {"best_accuracy", r.best_accuracy}};
}

inline AttackResult attack_result_from_json(const nlohmann::json& j) {
  AttackResult r;
  r.metric = j.at("metric").get<std::string>();
  r.auc_mean = j.at("auc_mean").get<double>();
  r.auc_std = j.at("auc_std").get<double>();
  for (const auto& run : j.at("per_g")) {
    r.per_g.push_back({run.at("g").get<std::size_t>(), run.at("repeats").get<std::size_t>(),
                       run.at("auc").get<std::vector<double>>()});
  }
  r.alpha_in = j.at("alpha_in").get<double>();
  r.alpha_out = j.at("alpha_out").get<double>();
  r.delta = j.at("delta").get<double>();
  r.best_threshold = j.at("best_threshold").get<double>();
  r.best_accuracy = j.at("best_accuracy").get<double>();
  return r;
}

namespace detail {

inline std::string csv_field(const std::map<std::string, AttackResult>& by_metric,
                             const std::string& metric, double AttackResult::*field) {
  auto it = by_metric.find(metric);
  return it == by_metric.end() ? std::string() : fmt_double(it->second.*field);
}

// minimal SVG canvas
class Svg {
public:
  Svg(double width, double height) : w_(width), h_(height) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
         << "\" viewBox=\"0 0 " << w_ << " " << h_ << "\">\n";
    out_ << "<rect width=\"" << w_ << "\" height=\"" << h_ << "\" fill=\"white\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& color = "#444",
            double stroke = 1.0) {
    out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
         << "\" y2=\"" << num(y2) << "\" stroke=\"" << color << "\" stroke-width=\"" << stroke
         << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill) {
    out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
         << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
    out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) out_ << num(x) << ',' << num(y) << ' ';
    out_ << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& color) {
    out_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << r << "\" fill=\""
         << color << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& anchor = "start") {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
         << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
  }
  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

private:
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
  }
  double w_, h_;
  std::ostringstream out_;
};

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                                  "#d62728", "#9467bd", "#8c564b"};
  return colors;
}

}  // namespace detail

inline std::string report_table_csv(const ReportBundle& bundle) {
  std::ostringstream out;
  out << "model_tag,tau,"
         "embedding_member_mean,embedding_nonmember_mean,embedding_delta,"
         "rouge2_member_mean,rouge2_nonmember_mean,rouge2_delta,"
         "embedding_auc_mean,embedding_auc_std,rouge2_auc_mean,rouge2_auc_std\n";
  for (const auto& row : bundle.rows) {
    using detail::csv_field;
    const auto& m = row.by_metric;
    out << row.model_tag << ',' << fmt_double(row.tau) << ','
        << csv_field(m, "embedding-cosine", &AttackResult::alpha_in) << ','
        << csv_field(m, "embedding-cosine", &AttackResult::alpha_out) << ','
        << csv_field(m, "embedding-cosine", &AttackResult::delta) << ','
        << csv_field(m, "rouge2", &AttackResult::alpha_in) << ','
        << csv_field(m, "rouge2", &AttackResult::alpha_out) << ','
        << csv_field(m, "rouge2", &AttackResult::delta) << ','
        << csv_field(m, "embedding-cosine", &AttackResult::auc_mean) << ','
        << csv_field(m, "embedding-cosine", &AttackResult::auc_std) << ','
        << csv_field(m, "rouge2", &AttackResult::auc_mean) << ','
        << csv_field(m, "rouge2", &AttackResult::auc_std) << '\n';
  }
  return out.str();
}

inline nlohmann::json report_summary_json(const ReportBundle& bundle) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : bundle.rows) {
    nlohmann::json metrics;
    for (const auto& [name, result] : row.by_metric) metrics[name] = to_json(result);
    rows.push_back({{"model_tag", row.model_tag}, {"tau", row.tau}, {"metrics", metrics}});
  }
  return {{"v", 1},
          {"config_hash", bundle.config_hash},
          {"sigma", bundle.sigma},
          {"regularized_sheet", bundle.regularized_sheet},
          {"auc_population", bundle.auc_population},
          {"rows", rows}};
}

// Grouped bars: for each (model_tag, tau) a member and a non-member bar.
inline std::string similarity_means_svg(const ReportBundle& bundle, const std::string& metric) {
  const double width = 640, height = 360, left = 60, bottom = 300, top = 40;
  detail::Svg svg(width, height);
  svg.text(left, 20, metric + " similarity means (solid: member, hatched: non-member)", 12);
  svg.line(left, bottom, width - 20, bottom);
  svg.line(left, bottom, left, top);
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    const double y = bottom - v * (bottom - top);
    svg.line(left - 4, y, left, y);
    svg.text(left - 8, y + 4, fmt_double(v), 10, "end");
  }
  std::vector<const ReportRow*> rows;
  for (const auto& row : bundle.rows) {
    if (row.by_metric.count(metric)) rows.push_back(&row);
  }
  if (rows.empty()) return svg.finish();
  const double group_w = (width - left - 40) / static_cast<double>(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AttackResult& r = rows[i]->by_metric.at(metric);
    const double x0 = left + group_w * static_cast<double>(i) + group_w * 0.2;
    const double bar_w = group_w * 0.25;
    const std::string color = detail::palette()[i % detail::palette().size()];
    const double h_in = std::clamp(r.alpha_in, 0.0, 1.0) * (bottom - top);
    const double h_out = std::clamp(r.alpha_out, 0.0, 1.0) * (bottom - top);
    svg.rect(x0, bottom - h_in, bar_w, h_in, color);
    svg.rect(x0 + bar_w * 1.3, bottom - h_out, bar_w, h_out, color + "88");
    svg.text(x0 + bar_w, bottom + 16, rows[i]->model_tag + " t=" + fmt_double(rows[i]->tau), 10,
             "middle");
  }
  return svg.finish();
}

// AUC vs granularity: one polyline per (model_tag, tau), a point per g
// (mean of that g's repeats).
inline std::string auc_vs_g_svg(const ReportBundle& bundle, const std::string& metric) {
  const double width = 640, height = 360, left = 60, bottom = 300, top = 40;
  detail::Svg svg(width, height);
  svg.text(left, 20, metric + " attack ROC-AUC vs granularity g", 12);
  svg.line(left, bottom, width - 20, bottom);
  svg.line(left, bottom, left, top);
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    const double y = bottom - v * (bottom - top);
    svg.line(left - 4, y, left, y);
    svg.text(left - 8, y + 4, fmt_double(v), 10, "end");
  }
  std::size_t max_g = 1;
  for (const auto& row : bundle.rows) {
    auto it = row.by_metric.find(metric);
    if (it == row.by_metric.end()) continue;
    for (const auto& run : it->second.per_g) max_g = std::max(max_g, run.g);
  }
  std::size_t color_idx = 0;
  double legend_y = top;
  for (const auto& row : bundle.rows) {
    auto it = row.by_metric.find(metric);
    if (it == row.by_metric.end()) continue;
    const std::string color = detail::palette()[color_idx++ % detail::palette().size()];
    std::vector<std::pair<double, double>> pts;
    for (const auto& run : it->second.per_g) {
      const double mean =
          std::accumulate(run.aucs.begin(), run.aucs.end(), 0.0) /
          static_cast<double>(run.aucs.size());
      const double x =
          left + (width - left - 40) * static_cast<double>(run.g) / static_cast<double>(max_g);
      pts.push_back({x, bottom - mean * (bottom - top)});
    }
    svg.polyline(pts, color);
    for (const auto& [x, y] : pts) svg.circle(x, y, 2.5, color);
    svg.circle(width - 150, legend_y, 4, color);
    svg.text(width - 140, legend_y + 4, row.model_tag + " t=" + fmt_double(row.tau), 10);
    legend_y += 16;
  }
  return svg.finish();
}

inline std::string traces_csv(const ReportBundle& bundle) {
  std::ostringstream out;
  out << "tau,epoch,j_cap,r_topo,j_tau\n";
  for (const auto& [label, trace] : bundle.traces) {
    for (const auto& e : trace) {
      out << label << ',' << e.epoch << ',' << fmt_double(e.j_cap) << ','
          << fmt_double(e.r_topo) << ',' << fmt_double(e.j_tau) << '\n';
    }
  }
  return out.str();
}

// Writes the report files under dir and returns their paths.
inline std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle,
                                                      const std::filesystem::path& dir) {
  if (bundle.rows.empty()) throw DataError("emit_report: empty bundle");
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    const auto path = dir / name;
    write_file(path, content);
    written.push_back(path);
  };
  emit("table.csv", report_table_csv(bundle));
  emit("summary.json", report_summary_json(bundle).dump(1) + "\n");
  if (!bundle.traces.empty()) emit("traces.csv", traces_csv(bundle));
  std::vector<std::string> metrics;
  for (const auto& row : bundle.rows) {
    for (const auto& [name, result] : row.by_metric) {
      if (std::find(metrics.begin(), metrics.end(), name) == metrics.end()) {
        metrics.push_back(name);
      }
    }
  }
  for (const auto& metric : metrics) {
    emit("sim_means_" + metric + ".svg", similarity_means_svg(bundle, metric));
    emit("auc_vs_g_" + metric + ".svg", auc_vs_g_svg(bundle, metric));
  }
  return written;
}

// Median AUC per (model_tag, tau, metric) across repeated runs (e.g. a
// fixed-seed sweep), with a non-monotonicity note per metric when the
// median does not fall as tau grows. Missing (tau, metric, g) cells in any
// bundle raise.
inline nlohmann::json summarize_seed_sweep(const std::vector<ReportBundle>& bundles) {
  if (bundles.empty()) throw DataError("summarize_seed_sweep: no bundles");
  // key: (model_tag, tau, metric) -> auc_mean of each bundle
  std::map<std::tuple<std::string, double, std::string>, std::vector<double>> cells;
  for (const auto& bundle : bundles) {
    for (const auto& row : bundle.rows) {
      for (const auto& [metric, result] : row.by_metric) {
        if (result.per_g.empty()) throw DataError("summarize_seed_sweep: empty per_g cell");
        for (const auto& run : result.per_g) {
          if (run.aucs.size() != run.repeats) {
            throw DataError("summarize_seed_sweep: per_g cell missing repeats");
          }
        }
        cells[{row.model_tag, row.tau, metric}].push_back(result.auc_mean);
      }
    }
  }
  nlohmann::json entries = nlohmann::json::array();
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> trends;
  for (auto& [key, values] : cells) {
    const auto& [model_tag, tau, metric] = key;
    if (values.size() != bundles.size()) {
      throw DataError("summarize_seed_sweep: (tau, metric) cell missing in some bundles");
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median =
        n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    entries.push_back({{"model_tag", model_tag},
                       {"tau", tau},
                       {"metric", metric},
                       {"median_auc", median},
                       {"runs", n}});
    trends[{model_tag, metric}].push_back({tau, median});
  }
  nlohmann::json flags = nlohmann::json::array();
  for (const auto& [key, points] : trends) {
    for (std::size_t i = 1; i < points.size(); ++i) {  // taus ascend (map order)
      if (points[i].second > points[i - 1].second) {
        flags.push_back(key.first + "/" + key.second + ": median AUC rises from tau=" +
                        fmt_double(points[i - 1].first) + " to tau=" +
                        fmt_double(points[i].first));
      }
    }
  }
  return {{"v", 1}, {"runs", bundles.size()}, {"median_auc", entries}, {"non_monotone_flags", flags}};
}

inline void write_seed_sweep_summary(const std::vector<ReportBundle>& bundles,
                                     const std::filesystem::path& path) {
  write_file(path, summarize_seed_sweep(bundles).dump(1) + "\n");
}

}  // namespace vlmia
