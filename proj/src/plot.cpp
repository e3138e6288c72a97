#include "bgan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "bgan/errors.hpp"

namespace bgan {
namespace {

constexpr double kWidth = 800, kHeight = 600;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

Frame fit_frame(const std::vector<PlotSeries>& series) {
  Frame f{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const PlotSeries& s : series) {
    if (s.points.cols() != 2) throw ShapeError("plot series '" + s.name + "' must have 2 columns");
    for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
      const double x = s.points(i, 0), y = s.points(i, 1);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      f.x0 = std::min(f.x0, x);
      f.x1 = std::max(f.x1, x);
      f.y0 = std::min(f.y0, y);
      f.y1 = std::max(f.y1, y);
    }
  }
  if (!std::isfinite(f.x0)) f = {0, 1, 0, 1};
  if (f.x1 - f.x0 <= 0) f.x0 -= 0.5, f.x1 += 0.5;
  if (f.y1 - f.y0 <= 0) f.y0 -= 0.5, f.y1 += 0.5;
  const double mx = 0.05 * (f.x1 - f.x0), my = 0.05 * (f.y1 - f.y0);
  return {f.x0 - mx, f.x1 + mx, f.y0 - my, f.y1 + my};
}

void open_document(std::ostringstream& out, const PlotLabels& labels, const Frame& f) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n";
  out << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  out << "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << escape(labels.title) << "</text>\n";
  const double left = kLeft, right = kWidth - kRight, top = kTop, bottom = kHeight - kBottom;
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\"" << bottom - top
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = f.x0 + (f.x1 - f.x0) * t / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * t / 4.0;
    out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << bottom + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << tick(xv) << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << num(f.py(yv) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << tick(yv) << "</text>\n";
  }
  out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << kHeight - 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(labels.x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << (top + bottom) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << (top + bottom) / 2 << ")\">" << escape(labels.y_label) << "</text>\n";
}

void legend(std::ostringstream& out, const std::vector<PlotSeries>& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(i);
    out << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[i % std::size(kPalette)] << "\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 30 << "\" y=\"" << y + 10
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(series[i].name) << "</text>\n";
  }
}

}  // namespace

std::string svg_scatter(const PlotLabels& labels, const std::vector<PlotSeries>& series) {
  const Frame f = fit_frame(series);
  std::ostringstream out;
  open_document(out, labels, f);
  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<g fill=\"" << kPalette[s % std::size(kPalette)] << "\" fill-opacity=\"0.5\">\n";
    const Matrix& p = series[s].points;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (!std::isfinite(p(i, 0)) || !std::isfinite(p(i, 1))) continue;
      out << "<circle cx=\"" << num(f.px(p(i, 0))) << "\" cy=\"" << num(f.py(p(i, 1))) << "\" r=\"2\"/>\n";
    }
    out << "</g>\n";
  }
  legend(out, series);
  out << "</svg>\n";
  return out.str();
}

std::string svg_lines(const PlotLabels& labels, const std::vector<PlotSeries>& series) {
  const Frame f = fit_frame(series);
  std::ostringstream out;
  open_document(out, labels, f);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % std::size(kPalette)];
    const Matrix& p = series[s].points;
    std::string path;
    bool pen_down = false;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (!std::isfinite(p(i, 0)) || !std::isfinite(p(i, 1))) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L" : " M") + num(f.px(p(i, 0))) + " " + num(f.py(p(i, 1)));
      pen_down = true;
      out << "<circle cx=\"" << num(f.px(p(i, 0))) << "\" cy=\"" << num(f.py(p(i, 1))) << "\" r=\"3\" fill=\"" << colour
          << "\"/>\n";
    }
    if (!path.empty()) out << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
  }
  legend(out, series);
  out << "</svg>\n";
  return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace bgan
