#include "svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include "mmcirt/csv.hpp"
#include "mmcirt/error.hpp"

namespace mmcirt::cli {

namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 60, kRight = 130, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 8> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                             "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

void write_curve_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::vector<Curve>& curves) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& c : curves)
    for (double x : c.x) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!(hi > lo)) hi = lo + 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - lo) / (hi - lo) * pw; };
  const auto sy = [&](double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };

  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kLeft) << "\" y=\"24\" font-size=\"15\" font-family=\"sans-serif\">" << escape(title)
      << "</text>\n";
  out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = k / 4.0;
    out << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(sy(y) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" << num(y) << "</text>\n";
    const double x = lo + (hi - lo) * k / 4.0;
    out << "<text x=\"" << num(sx(x)) << "\" y=\"" << num(kTop + ph + 16)
        << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">" << num(x) << "</text>\n";
  }
  out << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12)
      << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">" << escape(x_label) << "</text>\n";

  for (std::size_t s = 0; s < curves.size(); ++s) {
    const auto& c = curves[s];
    const char* color = kColors[s % kColors.size()];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) out << (i ? " " : "") << num(sx(c.x[i])) << ',' << num(sy(c.y[i]));
    out << "\"/>\n";
    for (std::size_t i = 0; i < c.dot_x.size(); ++i)
      out << "<circle cx=\"" << num(sx(c.dot_x[i])) << "\" cy=\"" << num(sy(c.dot_y[i])) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(s);
    out << "<line x1=\"" << num(kLeft + pw + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(kLeft + pw + 32)
        << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(kLeft + pw + 38) << "\" y=\"" << num(ly)
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << escape(c.label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace mmcirt::cli
