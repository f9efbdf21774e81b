// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "idea_eval/error.hpp"
#include "idea_eval/runner.hpp"

namespace idea_eval {

std::string format_number(std::optional<double> value) {
  if (!value || !std::isfinite(*value)) return "NA";
  // fmt never consults the global locale for these specifiers.
  auto text = fmt::format("{:.6f}", *value);
  if (text == "-0.000000") text = "0.000000";
  return text;
}

namespace {

std::string num(double v) { return format_number(v); }

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, std::string_view header) : path_(path) {
    out_ << header << '\n';
  }
  template <typename... Cells>
  void row(const Cells&... cells) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << cells), ...);
    out_ << '\n';
  }
  std::filesystem::path write() const {
    std::ofstream file(path_, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path_.string()));
    const auto text = out_.str();
    file.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!file) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path_.string()));
    return path_;
  }

 private:
  std::filesystem::path path_;
  std::ostringstream out_;
};

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Rho-vs-layer line chart, one polyline. NA cells break the line.
std::string layer_chart_svg(const std::vector<const CellSummary*>& cells, double ratio,
                            const std::string& criterion) {
  constexpr double width = 640, height = 400, left = 60, right = 20, top = 40, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;

  double y_lo = -0.2, y_hi = 1.0;
  for (const auto* c : cells) {
    if (c->mean_rho) {
      y_lo = std::min(y_lo, std::floor(*c->mean_rho * 5.0) / 5.0);
      y_hi = std::max(y_hi, std::ceil(*c->mean_rho * 5.0) / 5.0);
    }
  }
  int x_lo = 0, x_hi = 0;
  if (!cells.empty()) {
    x_lo = cells.front()->layer;
    x_hi = cells.front()->layer;
    for (const auto* c : cells) {
      x_lo = std::min(x_lo, c->layer);
      x_hi = std::max(x_hi, c->layer);
    }
  }
  const auto sx = [&](int layer) {
    return x_hi == x_lo ? left + plot_w / 2
                        : left + plot_w * (layer - x_lo) / static_cast<double>(x_hi - x_lo);
  };
  const auto sy = [&](double rho) { return top + plot_h * (y_hi - rho) / (y_hi - y_lo); };

  std::ostringstream svg;
  svg << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
      "viewBox=\"0 0 {0:.0f} {1:.0f}\">\n",
      width, height);
  svg << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << fmt::format(
      "<text x=\"{:.1f}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" "
      "text-anchor=\"middle\">Spearman vs layer ({}, train ratio {})</text>\n",
      width / 2, xml_escape(criterion), format_number(ratio));
  svg << fmt::format(
      "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n", left,
      top + plot_h, left + plot_w);
  svg << fmt::format(
      "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", left, top,
      top + plot_h);
  for (double t = y_lo; t <= y_hi + 1e-9; t += 0.2) {
    svg << fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#dddddd\"/>\n"
        "<text x=\"{3:.1f}\" y=\"{4:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"end\">{5:.1f}</text>\n",
        left, sy(t), left + plot_w, left - 6, sy(t) + 4, t + 0.0);
  }
  for (const auto* c : cells) {
    svg << fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"middle\">{}</text>\n",
        sx(c->layer), top + plot_h + 16, c->layer);
  }
  svg << fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\" "
      "text-anchor=\"middle\">layer</text>\n",
      left + plot_w / 2, height - 12);

  std::string points;
  const auto flush = [&] {
    if (!points.empty()) {
      svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" << points
          << "\"/>\n";
    }
    points.clear();
  };
  for (const auto* c : cells) {
    if (!c->mean_rho) {
      flush();
      continue;
    }
    points += fmt::format("{}{:.1f},{:.1f}", points.empty() ? "" : " ", sx(c->layer), sy(*c->mean_rho));
  }
  flush();
  for (const auto* c : cells) {
    if (!c->mean_rho) continue;
    svg << fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"{}\" fill=\"{}\"/>\n", sx(c->layer),
                       sy(*c->mean_rho), c->best ? 5 : 3, c->best ? "#d62728" : "#1f77b4");
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));
  std::vector<std::filesystem::path> written;

  CsvFile grid(out_dir / "grid.csv", "ratio,layer,seed,rho,pvalue,selected_epoch");
  for (const auto& c : report.grid) {
    grid.row(num(c.ratio), c.layer, c.seed, format_number(c.rho),
             c.rho ? num(c.pvalue) : std::string("NA"), c.selected_epoch);
  }
  written.push_back(grid.write());

  CsvFile summary(out_dir / "summary.csv", "ratio,layer,mean_rho,mean_pvalue,seeds,seeds_defined,best");
  for (const auto& s : report.summary) {
    summary.row(num(s.ratio), s.layer, format_number(s.mean_rho), format_number(s.mean_pvalue), s.seeds,
                s.seeds_defined, s.best ? 1 : 0);
  }
  written.push_back(summary.write());

  CsvFile bins(out_dir / "bins.csv", "ratio,layer,bin,count,fraction");
  CsvFile hist(out_dir / "hist.csv", "ratio,layer,source,bin,lower,upper,count,fraction");
  CsvFile domains(out_dir / "domains.csv",
                  "ratio,layer,domain,count,human_mean,human_std,ours_mean,ours_std,human_min,ours_min,"
                  "human_max,ours_max,diff_pct");
  CsvFile closest(out_dir / "closest.csv", "ratio,layer,rho,pvalue,n");
  for (const auto& b : report.bundles) {
    for (std::size_t k = 0; k < 4; ++k) {
      bins.row(num(b.ratio), b.layer, ErrorBins::kLabels[k], b.bins.counts[k], num(b.bins.fractions[k]));
    }
    const auto within = static_cast<std::size_t>(std::llround(b.within_two * static_cast<double>(b.bins.total)));
    bins.row(num(b.ratio), b.layer, "<2", within, num(b.within_two));

    for (const auto& [source, h] : {std::pair{"human", &b.human_histogram},
                                    std::pair{"predicted", &b.predicted_histogram}}) {
      hist.row(num(b.ratio), b.layer, source, "underflow", "-inf", num(h->lo), h->underflow,
               num(h->fraction(h->underflow)));
      for (std::size_t k = 0; k < h->counts.size(); ++k) {
        hist.row(num(b.ratio), b.layer, source, k, num(h->bin_lo(k)), num(h->bin_hi(k)), h->counts[k],
                 num(h->fraction(h->counts[k])));
      }
      hist.row(num(b.ratio), b.layer, source, "overflow", num(h->hi), "inf", h->overflow,
               num(h->fraction(h->overflow)));
    }
    for (const auto& d : b.domains) {
      domains.row(num(b.ratio), b.layer, csv_field(d.domain), d.count, num(d.human_mean), num(d.human_std),
                  num(d.ours_mean), num(d.ours_std), num(d.human_min), num(d.ours_min), num(d.human_max),
                  num(d.ours_max), num(100.0 * d.diff_pct));
    }
    if (b.closest_human) {
      closest.row(num(b.ratio), b.layer, num(b.closest_human->rho), num(b.closest_human->pvalue),
                  b.closest_human->n);
    } else {
      closest.row(num(b.ratio), b.layer, "NA", "NA", b.test_ids.size());
    }
  }
  written.push_back(bins.write());
  written.push_back(hist.write());
  written.push_back(domains.write());
  written.push_back(closest.write());

  std::vector<double> ratios;
  for (const auto& s : report.summary) {
    if (std::find(ratios.begin(), ratios.end(), s.ratio) == ratios.end()) ratios.push_back(s.ratio);
  }
  for (double ratio : ratios) {
    std::vector<const CellSummary*> cells;
    for (const auto& s : report.summary) {
      if (s.ratio == ratio) cells.push_back(&s);
    }
    std::sort(cells.begin(), cells.end(),
              [](const CellSummary* a, const CellSummary* b) { return a->layer < b->layer; });
    const auto path = out_dir / fmt::format("layers_{}.svg", ratio);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
    out << layer_chart_svg(cells, ratio, report.criterion);
    if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
    written.push_back(path);
  }
  return written;
}

}  // namespace idea_eval
