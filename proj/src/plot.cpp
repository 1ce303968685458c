#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bprx/harness.hpp"

namespace bprx {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Curve {
  std::string method;
  std::vector<int> episodes;
  std::vector<double> mean;
  std::vector<double> ci_half;
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

std::string render_plot_svg(std::span<const ResultRow> rows) {
  if (rows.empty()) throw std::runtime_error("plot: no data rows");

  // method -> episode -> trial -> returns (averaged over targets per trial).
  std::map<std::string, std::map<int, std::map<int, std::vector<double>>>> bucket;
  for (const ResultRow& r : rows)
    bucket[r.method][r.episode][r.trial].push_back(r.return_value);

  std::vector<Curve> curves;
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -std::numeric_limits<double>::infinity();
  int x_max = 1;
  for (const auto& [method, episodes] : bucket) {
    Curve curve;
    curve.method = method;
    for (const auto& [episode, trials] : episodes) {
      std::vector<double> per_trial;
      for (const auto& [_, values] : trials)
        per_trial.push_back(std::accumulate(values.begin(), values.end(), 0.0) /
                            static_cast<double>(values.size()));
      const SummaryStat s = summarize(per_trial);
      curve.episodes.push_back(episode);
      curve.mean.push_back(s.mean);
      curve.ci_half.push_back(s.ci95_half);
      y_min = std::min(y_min, s.mean - s.ci95_half);
      y_max = std::max(y_max, s.mean + s.ci95_half);
      x_max = std::max(x_max, episode);
    }
    curves.push_back(std::move(curve));
  }
  if (y_min == y_max) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  const double width = 760, height = 480;
  const double ml = 70, mr = 20, mt = 30, mb = 50;
  auto sx = [&](double episode) {
    return ml + (episode - 1) / std::max(1.0, double(x_max - 1)) *
                    (width - ml - mr);
  };
  auto sy = [&](double v) {
    return mt + (y_max - v) / (y_max - y_min) * (height - mt - mb);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes with a handful of ticks.
  svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
      << width - mr << "\" y2=\"" << height - mb
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  for (int e = 1; e <= x_max; ++e) {
    if (x_max > 12 && e % 2 == 0) continue;
    svg << "<text x=\"" << sx(e) << "\" y=\"" << height - mb + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << e << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = y_min + (y_max - y_min) * i / 4.0;
    svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << sy(v) << "\" x2=\"" << ml
        << "\" y2=\"" << sy(v) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << sy(v) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  svg << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"13\" text-anchor=\"middle\">episode</text>\n";
  svg << "<text x=\"18\" y=\"" << (mt + height - mb) / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (mt + height - mb) / 2 << ")\">mean return</text>\n";

  int color_index = 0;
  double legend_y = mt + 8;
  for (const Curve& curve : curves) {
    const char* color = kPalette[color_index % 8];
    ++color_index;

    // 95% CI band: upper edge forward, lower edge reversed.
    svg << "<polygon class=\"ci-band\" fill=\"" << color
        << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < curve.episodes.size(); ++i)
      svg << fmt(sx(curve.episodes[i])) << ","
          << fmt(sy(curve.mean[i] + curve.ci_half[i])) << " ";
    for (std::size_t i = curve.episodes.size(); i-- > 0;)
      svg << fmt(sx(curve.episodes[i])) << ","
          << fmt(sy(curve.mean[i] - curve.ci_half[i])) << " ";
    svg << "\"/>\n";

    svg << "<polyline class=\"mean-line\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.episodes.size(); ++i)
      svg << fmt(sx(curve.episodes[i])) << "," << fmt(sy(curve.mean[i])) << " ";
    svg << "\"/>\n";

    svg << "<rect x=\"" << width - mr - 150 << "\" y=\"" << legend_y - 9
        << "\" width=\"18\" height=\"4\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << width - mr - 126 << "\" y=\"" << legend_y
        << "\" font-size=\"12\">" << curve.method << "</text>\n";
    legend_y += 18;
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plots(const std::filesystem::path& results_csv,
                const std::filesystem::path& out_dir) {
  const auto rows = parse_csv(read_text_file(results_csv));
  if (rows.empty()) throw std::runtime_error("plot: results csv has no rows");
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "returns.svg", render_plot_svg(rows));
}

}  // namespace bprx
