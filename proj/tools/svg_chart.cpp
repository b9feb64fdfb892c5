#include "svg_chart.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace densecap::tools {

namespace {

constexpr double kWidth = 520;
constexpr double kPanel = 150;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 36;
constexpr double kGap = 26;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(4);
  o << v;
  return o.str();
}

}  // namespace

std::string render_chart(const std::string& title, const std::vector<Series>& series) {
  const double height = kTop + static_cast<double>(series.size()) * (kPanel + kGap) + 10;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  double y0 = kTop;
  for (const auto& s : series) {
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kPanel - 30;
    const double top = y0 + 18;
    svg << "<text x=\"" << kLeft << "\" y=\"" << y0 + 12 << "\">" << escape(s.name) << "</text>\n"
        << "<rect x=\"" << kLeft << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : s.points) {
      if (std::isfinite(p.second)) pts.push_back(p);
    }
    if (!pts.empty()) {
      auto [xmin_it, xmax_it] = std::minmax_element(pts.begin(), pts.end());
      double xmin = xmin_it->first, xmax = xmax_it->first;
      double ymin = pts[0].second, ymax = pts[0].second;
      for (const auto& p : pts) {
        ymin = std::min(ymin, p.second);
        ymax = std::max(ymax, p.second);
      }
      if (xmax == xmin) xmax = xmin + 1;
      if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
      }
      auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
      auto sy = [&](double y) { return top + plot_h - (y - ymin) / (ymax - ymin) * plot_h; };
      svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
      for (const auto& p : pts) svg << sx(p.first) << "," << sy(p.second) << " ";
      svg << "\"/>\n";
      for (const auto& p : pts) {
        svg << "<circle cx=\"" << sx(p.first) << "\" cy=\"" << sy(p.second) << "\" r=\"2\" fill=\"#1f77b4\"/>\n";
      }
      svg << "<text x=\"" << kLeft - 4 << "\" y=\"" << top + 8 << "\" text-anchor=\"end\">" << fmt(ymax)
          << "</text>\n"
          << "<text x=\"" << kLeft - 4 << "\" y=\"" << top + plot_h << "\" text-anchor=\"end\">" << fmt(ymin)
          << "</text>\n"
          << "<text x=\"" << kLeft << "\" y=\"" << top + plot_h + 12 << "\">" << fmt(xmin) << "</text>\n"
          << "<text x=\"" << kLeft + plot_w << "\" y=\"" << top + plot_h + 12 << "\" text-anchor=\"end\">epoch "
          << fmt(xmax) << "</text>\n";
    }
    y0 += kPanel + kGap;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace densecap::tools
