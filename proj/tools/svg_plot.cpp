#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pivotnmt::tools {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 160, kTop = 20, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

template <typename... Args>
std::string fmt(const char* pattern, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
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

}  // namespace

std::string render_line_chart(const std::vector<Series>& series, const std::string& x_label,
                              const std::string& y_label) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  y0 = std::min(y0, 0.0);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream svg;
  svg << fmt(R"(<svg xmlns="http://www.w3.org/2000/svg" width="%.0f" height="%.0f" font-family="sans-serif" font-size="12">)",
             kWidth, kHeight)
      << '\n';
  svg << fmt(R"(<rect width="%.0f" height="%.0f" fill="white"/>)", kWidth, kHeight) << '\n';
  svg << fmt(R"(<line x1="%.1f" y1="%.1f" x2="%.1f" y2="%.1f" stroke="black"/>)", kLeft, kTop + ph, kLeft + pw, kTop + ph)
      << '\n';
  svg << fmt(R"(<line x1="%.1f" y1="%.1f" x2="%.1f" y2="%.1f" stroke="black"/>)", kLeft, kTop, kLeft, kTop + ph) << '\n';
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    svg << fmt(R"(<text x="%.1f" y="%.1f" text-anchor="middle">%.4g</text>)", px(xv), kTop + ph + 16, xv) << '\n';
    svg << fmt(R"(<text x="%.1f" y="%.1f" text-anchor="end">%.4g</text>)", kLeft - 6, py(yv) + 4, yv) << '\n';
  }
  svg << fmt(R"(<text x="%.1f" y="%.1f" text-anchor="middle">)", kLeft + pw / 2, kHeight - 12) << escape(x_label)
      << "</text>\n";
  svg << fmt(R"svg(<text x="16" y="%.1f" text-anchor="middle" transform="rotate(-90 16 %.1f)">)svg", kTop + ph / 2,
             kTop + ph / 2)
      << escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (const auto& [x, y] : series[i].points) pts += fmt("%.1f,%.1f ", px(x), py(y));
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(i);
    svg << fmt(R"(<line x1="%.1f" y1="%.1f" x2="%.1f" y2="%.1f" stroke="%s" stroke-width="2"/>)", kLeft + pw + 10, ly,
               kLeft + pw + 30, ly, color)
        << '\n';
    svg << fmt(R"(<text x="%.1f" y="%.1f">)", kLeft + pw + 36, ly + 4) << escape(series[i].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace pivotnmt::tools
