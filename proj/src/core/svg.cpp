#include "core/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "core/error.hpp"

namespace fmnet {

namespace {

constexpr double kWidth = 640.0, kHeight = 400.0;
constexpr double kLeft = 64.0, kRight = 24.0, kTop = 40.0, kBottom = 48.0;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  require(!series.empty(), ErrorCode::kInvalidArgument,
          "write_line_plot: no series");
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  size_t total = 0;
  for (const PlotSeries& s : series)
    for (auto [x, y] : s.points) {
      ++total;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  require(total > 0, ErrorCode::kInvalidArgument,
          "write_line_plot: no points");
  if (x_max == x_min) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (y_max == y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  // headroom so lines do not hug the frame
  const double y_pad = 0.06 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * plot_w;
  };
  auto py = [&](double y) {
    return kTop + (y_max - y) / (y_max - y_min) * plot_h;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"400\" viewBox=\"0 0 640 400\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">" + escape(title) + "</text>\n";

  // frame
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" +
         num(plot_w) + "\" height=\"" + num(plot_h) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";

  // endpoint ticks
  auto tick_text = [&](double x, double y, const std::string& anchor,
                       const std::string& text) {
    svg += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" +
           anchor + "\" font-size=\"11\" font-family=\"sans-serif\">" +
           escape(text) + "</text>\n";
  };
  tick_text(kLeft, kHeight - kBottom + 16, "middle", num(x_min));
  tick_text(kWidth - kRight, kHeight - kBottom + 16, "middle", num(x_max));
  tick_text(kLeft - 6, kHeight - kBottom + 4, "end", num(y_min + y_pad));
  tick_text(kLeft - 6, kTop + 10, "end", num(y_max - y_pad));

  // axis labels
  tick_text((kLeft + kWidth - kRight) / 2, kHeight - 12, "middle", x_label);
  svg += "<text x=\"16\" y=\"" + num((kTop + kHeight - kBottom) / 2) +
         "\" text-anchor=\"middle\" font-size=\"12\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 16 " +
         num((kTop + kHeight - kBottom) / 2) + ")\">" + escape(y_label) +
         "</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % 6];
    std::string pts;
    for (auto [x, y] : series[i].points) {
      if (!pts.empty()) pts += " ";
      pts += num(px(x)) + "," + num(py(y));
    }
    if (series[i].points.size() == 1) {
      auto [x, y] = series[i].points[0];
      svg += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) +
             "\" r=\"3\" fill=\"" + color + "\"/>\n";
    } else {
      svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
             color + "\" stroke-width=\"1.5\"/>\n";
    }
    for (auto [x, y] : series[i].points)
      svg += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) +
             "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
    const double ly = kTop + 16.0 + 16.0 * static_cast<double>(i);
    svg += "<rect x=\"" + num(kWidth - kRight - 150) + "\" y=\"" +
           num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" + color +
           "\"/>\n";
    tick_text(kWidth - kRight - 136, ly, "start", series[i].label);
  }
  svg += "</svg>\n";

  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, ErrorCode::kIo, "cannot write " + path);
  std::fwrite(svg.data(), 1, svg.size(), f);
  std::fclose(f);
}

}  // namespace fmnet
