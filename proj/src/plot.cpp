#include "chbsim/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "chbsim/errors.hpp"

namespace chbsim {

namespace {

constexpr double kPanelW = 420, kPanelH = 300, kLeft = 70, kTop = 40, kGap = 90, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double x_max = 1;
  double y_lo = -8, y_hi = 1;  // log10 decades
};

void draw_panel(std::ostream& out, const std::vector<PlotSeries>& series, const Axis& ax,
                double x0, bool by_comms, const char* xlabel) {
  const double y0 = kTop;
  out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(kPanelW)
      << "\" height=\"" << num(kPanelH) << "\" fill=\"none\" stroke=\"#000\"/>\n";
  auto px = [&](double x) { return x0 + kPanelW * x / ax.x_max; };
  auto py = [&](double y) {
    const double ly = std::log10(y);
    return y0 + kPanelH * (ax.y_hi - ly) / (ax.y_hi - ax.y_lo);
  };
  for (int e = static_cast<int>(ax.y_lo); e <= static_cast<int>(ax.y_hi); ++e) {
    const double y = py(std::pow(10.0, e));
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x0 + kPanelW)
        << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">1e" << e << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double xv = ax.x_max * i / 4.0;
    const double x = px(xv);
    out << "<text x=\"" << num(x) << "\" y=\"" << num(y0 + kPanelH + 16)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << std::llround(xv) << "</text>\n";
  }
  out << "<text x=\"" << num(x0 + kPanelW / 2) << "\" y=\"" << num(y0 + kPanelH + 36)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
  const double floor_v = std::pow(10.0, ax.y_lo);
  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\""
        << kColors[s % (sizeof kColors / sizeof *kColors)] << "\" points=\"";
    bool first = true;
    for (const auto& r : series[s].trace.records()) {
      const double x = by_comms ? static_cast<double>(r.comms_cumulative) : static_cast<double>(r.k);
      const double y = std::isfinite(r.f_gap) && r.f_gap > floor_v ? r.f_gap : floor_v;
      if (!first) out << ' ';
      out << num(px(x)) << ',' << num(py(y));
      first = false;
    }
    out << "\"/>\n";
  }
}

}  // namespace

void render_svg(const std::vector<PlotSeries>& series, std::ostream& out) {
  Axis comms_ax, iter_ax;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  double max_comms = 1, max_k = 1;
  for (const auto& s : series) {
    for (const auto& r : s.trace.records()) {
      if (std::isfinite(r.f_gap) && r.f_gap > 0.0) {
        lo = std::min(lo, r.f_gap);
        hi = std::max(hi, r.f_gap);
      }
      max_comms = std::max(max_comms, static_cast<double>(r.comms_cumulative));
      max_k = std::max(max_k, static_cast<double>(r.k));
    }
  }
  if (!(hi > 0.0)) {
    lo = 1e-8;
    hi = 1.0;
  }
  double y_lo = std::floor(std::log10(lo));
  double y_hi = std::ceil(std::log10(hi));
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  y_lo = std::max(y_lo, y_hi - 20);
  comms_ax = {max_comms, y_lo, y_hi};
  iter_ax = {max_k, y_lo, y_hi};

  const double width = kLeft + 2 * kPanelW + kGap + 30;
  const double legend_h = 18.0 * static_cast<double>(series.size());
  const double height = kTop + kPanelH + kBottom + legend_h;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  out << "<text x=\"" << num(kLeft) << "\" y=\"24\" font-size=\"13\">objective error</text>\n";
  draw_panel(out, series, comms_ax, kLeft, true, "communications");
  draw_panel(out, series, iter_ax, kLeft + kPanelW + kGap, false, "iterations");
  double ly = kTop + kPanelH + kBottom;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % (sizeof kColors / sizeof *kColors)];
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + 24)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(kLeft + 30) << "\" y=\"" << num(ly + 4) << "\" font-size=\"12\">"
        << escape(series[s].label) << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
}

void plot_csv_files(const std::vector<std::filesystem::path>& csvs,
                    const std::filesystem::path& out_svg) {
  if (csvs.empty()) throw PreconditionError("plot: no input files");
  std::vector<PlotSeries> series;
  for (const auto& path : csvs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    PlotSeries s;
    try {
      s.trace = read_csv(in);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.detail(), e.line());
    }
    s.label = s.trace.meta("algorithm");
    if (s.label.empty()) s.label = path.stem().string();
    series.push_back(std::move(s));
  }
  std::ofstream out(out_svg, std::ios::binary);
  if (!out) throw Error("cannot write " + out_svg.string());
  render_svg(series, out);
}

}  // namespace chbsim
