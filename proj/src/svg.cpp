#include "plaid/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plaid/csv.hpp"
#include "plaid/error.hpp"

namespace plaid {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string color(std::size_t i) { return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))]; }

std::string esc(const std::string& s) {
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

std::string num(double v) { return format_number(std::round(v * 100.0) / 100.0); }

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + esc(title) +
         "</text>\n";
}

std::string axes(const Frame& f, const std::string& x_label, const std::string& y_label, bool x_ticks) {
  std::string s;
  const double xl = kLeft, xr = kWidth - kRight, yb = kHeight - kBottom, yt = kTop;
  s += "<path d=\"M" + num(xl) + " " + num(yt) + " V" + num(yb) + " H" + num(xr) + "\" stroke=\"black\" fill=\"none\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = f.y0 + (f.y1 - f.y0) * k / 4.0;
    s += "<text x=\"" + num(xl - 6) + "\" y=\"" + num(f.py(v) + 4) + "\" text-anchor=\"end\">" + format_number(std::round(v * 1000) / 1000) + "</text>\n";
    s += "<line x1=\"" + num(xl) + "\" x2=\"" + num(xr) + "\" y1=\"" + num(f.py(v)) + "\" y2=\"" + num(f.py(v)) + "\" stroke=\"#ddd\"/>\n";
    if (x_ticks) {
      const double x = f.x0 + (f.x1 - f.x0) * k / 4.0;
      s += "<text x=\"" + num(f.px(x)) + "\" y=\"" + num(yb + 16) + "\" text-anchor=\"middle\">" + format_number(std::round(x)) + "</text>\n";
    }
  }
  s += "<text x=\"" + num((xl + xr) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" + esc(x_label) + "</text>\n";
  s += "<text transform=\"translate(16 " + num((yt + yb) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" + esc(y_label) + "</text>\n";
  return s;
}

std::string legend(const std::vector<std::string>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kTop + 10 + 18.0 * double(i);
    const double x = kWidth - kRight + 12;
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"12\" fill=\"" + color(i) + "\"/>\n";
    s += "<text x=\"" + num(x + 18) + "\" y=\"" + num(y + 1) + "\">" + esc(labels[i]) + "</text>\n";
  }
  return s;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.mean.size() || (!s.std.empty() && s.std.size() != s.mean.size())) {
      throw ShapeError("series " + s.label + " has mismatched lengths");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double sd = s.std.empty() ? 0.0 : s.std[i];
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.mean[i] - sd);
      y1 = std::max(y1, s.mean[i] + sd);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};

  std::string out = header(title) + axes(f, x_label, y_label, true);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    labels.push_back(s.label);
    if (s.x.empty()) continue;
    if (!s.std.empty()) {
      std::string band = "M";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        band += (i ? " L" : "") + num(f.px(s.x[i])) + " " + num(f.py(s.mean[i] + s.std[i]));
      }
      for (std::size_t i = s.x.size(); i-- > 0;) band += " L" + num(f.px(s.x[i])) + " " + num(f.py(s.mean[i] - s.std[i]));
      out += "<path d=\"" + band + " Z\" fill=\"" + color(k) + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) pts += (i ? " " : "") + num(f.px(s.x[i])) + "," + num(f.py(s.mean[i]));
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color(k) + "\" stroke-width=\"1.5\"/>\n";
  }
  return out + legend(labels) + "</svg>\n";
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<BarGroup>& groups) {
  double y0 = 0.0, y1 = 0.0;
  for (const auto& g : groups) {
    if (g.values.size() != categories.size()) throw ShapeError("bar group " + g.label + " has the wrong length");
    for (double v : g.values) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  widen(y0, y1);
  const Frame f{0.0, double(std::max<std::size_t>(categories.size(), 1)), y0, y1};
  std::string out = header(title) + axes(f, "", "", false);
  const double slot = (kWidth - kLeft - kRight) / double(std::max<std::size_t>(categories.size(), 1));
  const double bar = slot * 0.8 / double(std::max<std::size_t>(groups.size(), 1));
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double left = kLeft + slot * double(c) + slot * 0.1;
    out += "<text x=\"" + num(kLeft + slot * (double(c) + 0.5)) + "\" y=\"" + num(kHeight - kBottom + 16) +
           "\" text-anchor=\"middle\">" + esc(categories[c]) + "</text>\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double v = groups[g].values[c];
      const double top = f.py(std::max(v, 0.0)), bottom = f.py(std::min(v, 0.0));
      out += "<rect x=\"" + num(left + bar * double(g)) + "\" y=\"" + num(top) + "\" width=\"" + num(bar) +
             "\" height=\"" + num(bottom - top) + "\" fill=\"" + color(g) + "\"/>\n";
    }
  }
  out += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kWidth - kRight) + "\" y1=\"" + num(f.py(0)) + "\" y2=\"" +
         num(f.py(0)) + "\" stroke=\"black\"/>\n";
  for (const auto& g : groups) labels.push_back(g.label);
  return out + legend(labels) + "</svg>\n";
}

Series aggregate_series(const std::string& label, const std::vector<double>& x,
                        const std::vector<std::vector<double>>& runs) {
  Series s{label, x, std::vector<double>(x.size(), 0.0), std::vector<double>(x.size(), 0.0)};
  if (runs.empty()) return s;
  for (const auto& r : runs) {
    if (r.size() != x.size()) throw ShapeError("runs of " + label + " differ in length");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    double m = 0.0;
    for (const auto& r : runs) m += r[i];
    m /= double(runs.size());
    double v = 0.0;
    for (const auto& r : runs) v += (r[i] - m) * (r[i] - m);
    s.mean[i] = m;
    s.std[i] = std::sqrt(v / double(runs.size()));
  }
  return s;
}

}  // namespace plaid
