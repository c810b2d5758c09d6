#include "fdl/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fdl {

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

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

struct Frame {
  double x0, x1, y0, y1;
  double left = 70, right = 150, top = 40, bottom = 50;
  int width, height;
  bool log_y;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const {
    const double v = log_y ? std::log10(y) : y;
    return height - bottom - (v - y0) / (y1 - y0) * (height - top - bottom);
  }
};

Frame fit_frame(const std::vector<Series>& series, const PlotOptions& o) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("plot: series x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (o.log_y && !(s.y[i] > 0.0)) continue;
      const double y = o.log_y ? std::log10(s.y[i]) : s.y[i];
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) throw std::invalid_argument("plot: no drawable points");
  if (x1 == x0) { x0 -= 0.5; x1 += 0.5; }
  if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }
  const double pad = 0.05 * (y1 - y0);
  return {x0, x1, y0 - pad, y1 + pad, 70, 150, 40, 50, o.width, o.height, o.log_y};
}

void header(std::ostringstream& os, const Frame& f, const PlotOptions& o) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
     << f.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(f.width / 2.0) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(o.title) << "</text>\n";
  const double xa = f.left, xb = f.width - f.right, ya = f.top, yb = f.height - f.bottom;
  os << "<rect x=\"" << num(xa) << "\" y=\"" << num(ya) << "\" width=\"" << num(xb - xa)
     << "\" height=\"" << num(yb - ya) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double xp = f.px(xv);
    const double yp = f.height - f.bottom - (yv - f.y0) / (f.y1 - f.y0) * (f.height - f.top - f.bottom);
    os << "<text x=\"" << num(xp) << "\" y=\"" << num(yb + 15) << "\" text-anchor=\"middle\">"
       << tick_label(xv) << "</text>\n";
    os << "<text x=\"" << num(xa - 5) << "\" y=\"" << num(yp + 4) << "\" text-anchor=\"end\">"
       << tick_label(f.log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
  }
  os << "<text x=\"" << num((xa + xb) / 2) << "\" y=\"" << num(f.height - 12.0)
     << "\" text-anchor=\"middle\">" << escape(o.x_label) << "</text>\n";
  os << "<text x=\"15\" y=\"" << num((ya + yb) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << num((ya + yb) / 2) << ")\">" << escape(o.y_label) << "</text>\n";
}

void legend(std::ostringstream& os, const Frame& f, const std::vector<Series>& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = f.top + 10 + 18.0 * static_cast<double>(i);
    const double x = f.width - f.right + 12;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 8) << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[i % kPalette.size()] << "\"/>\n";
    os << "<text x=\"" << num(x + 16) << "\" y=\"" << num(y + 1) << "\">" << escape(series[i].label)
       << "</text>\n";
  }
}

bool drawable(const Series& s, std::size_t i, bool log_y) {
  return std::isfinite(s.x[i]) && std::isfinite(s.y[i]) && (!log_y || s.y[i] > 0.0);
}

}  // namespace

std::string line_plot_svg(const std::vector<Series>& series, const PlotOptions& options) {
  const Frame f = fit_frame(series, options);
  std::ostringstream os;
  header(os, f, options);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[k % kPalette.size()]
       << "\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!drawable(s, i, options.log_y)) continue;
      os << (first ? "" : " ") << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
  }
  legend(os, f, series);
  os << "</svg>\n";
  return os.str();
}

std::string scatter_plot_svg(const std::vector<Series>& series, const PlotOptions& options) {
  const Frame f = fit_frame(series, options);
  std::ostringstream os;
  header(os, f, options);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    os << "<g fill=\"" << kPalette[k % kPalette.size()] << "\" fill-opacity=\"0.6\">\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!drawable(s, i, options.log_y)) continue;
      os << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i]))
         << "\" r=\"1.8\"/>\n";
    }
    os << "</g>\n";
  }
  legend(os, f, series);
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace fdl
