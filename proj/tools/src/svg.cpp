#include "streetvae_cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace streetvae::cli {
namespace {

constexpr double kW = 640.0, kH = 400.0, kMargin = 48.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

// Fixed-precision formatting keeps the files byte-stable.
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

std::string open(double w, double h, const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"" + num(w / 2) +
         "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
}

std::string close() { return "</svg>\n"; }

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kMargin + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (kW - 2 * kMargin); }
  double py(double y) const { return kH - kMargin - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (kH - 2 * kMargin); }
};

std::string axes(const Frame& f) {
  std::string s = "<g stroke=\"#444\" fill=\"none\">\n";
  s += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kH - kMargin) + "\" x2=\"" + num(kW - kMargin) + "\" y2=\"" +
       num(kH - kMargin) + "\"/>\n";
  s += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kMargin) + "\" x2=\"" + num(kMargin) + "\" y2=\"" +
       num(kH - kMargin) + "\"/>\n</g>\n";
  s += "<text x=\"" + num(kMargin - 4) + "\" y=\"" + num(kH - kMargin) + "\" text-anchor=\"end\">" + num(f.y0) +
       "</text>\n";
  s += "<text x=\"" + num(kMargin - 4) + "\" y=\"" + num(kMargin + 4) + "\" text-anchor=\"end\">" + num(f.y1) +
       "</text>\n";
  s += "<text x=\"" + num(kMargin) + "\" y=\"" + num(kH - kMargin + 14) + "\" text-anchor=\"middle\">" + num(f.x0) +
       "</text>\n";
  s += "<text x=\"" + num(kW - kMargin) + "\" y=\"" + num(kH - kMargin + 14) + "\" text-anchor=\"middle\">" +
       num(f.x1) + "</text>\n";
  return s;
}

std::string legend(const std::vector<Series>& series) {
  std::string s;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = 34.0 + 14.0 * static_cast<double>(i);
    s += "<rect x=\"" + num(kW - 150) + "\" y=\"" + num(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
         kPalette[i % 7] + "\"/><text x=\"" + num(kW - 135) + "\" y=\"" + num(y) + "\">" +
         escape(series[i].label) + "</text>\n";
  }
  return s;
}

}  // namespace

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
  std::string s = open(kW, kH, title);
  double top = 0.0;
  for (double v : values) top = std::max(top, v);
  const Frame f{0.0, static_cast<double>(values.size()), 0.0, top > 0 ? top : 1.0};
  s += axes(f);
  const double slot = (kW - 2 * kMargin) / std::max<double>(1.0, static_cast<double>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = kMargin + slot * static_cast<double>(i) + slot * 0.1;
    const double y = f.py(values[i]);
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(slot * 0.8) + "\" height=\"" +
         num(kH - kMargin - y) + "\" fill=\"" + kPalette[0] + "\"/>\n";
    if (i < labels.size()) {
      s += "<text x=\"" + num(x + slot * 0.4) + "\" y=\"" + num(kH - kMargin + 26) + "\" text-anchor=\"middle\">" +
           escape(labels[i]) + "</text>\n";
    }
  }
  return s + close();
}

std::string svg_histogram(const std::string& title, const std::vector<double>& edges,
                          const std::vector<Series>& counts) {
  std::string s = open(kW, kH, title);
  double top = 0.0;
  for (const auto& c : counts) {
    for (double v : c.values) top = std::max(top, v);
  }
  const Frame f{edges.empty() ? 0.0 : edges.front(), edges.empty() ? 1.0 : edges.back(), 0.0, top > 0 ? top : 1.0};
  s += axes(f);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    std::string pts = num(f.px(f.x0)) + "," + num(f.py(0));
    for (std::size_t b = 0; b + 1 < edges.size() && b < counts[k].values.size(); ++b) {
      const double y = f.py(counts[k].values[b]);
      pts += " " + num(f.px(edges[b])) + "," + num(y) + " " + num(f.px(edges[b + 1])) + "," + num(y);
    }
    pts += " " + num(f.px(f.x1)) + "," + num(f.py(0));
    s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(kPalette[k % 7]) + "\" points=\"" +
         pts + "\"/>\n";
  }
  return s + legend(counts) + close();
}

std::string svg_line_chart(const std::string& title, const std::vector<double>& x, const std::vector<Series>& ys) {
  std::string s = open(kW, kH, title);
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = x.size();
  for (const auto& y : ys) {
    n = std::max(n, y.values.size());
    for (double v : y.values) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!(lo <= hi)) lo = 0.0, hi = 1.0;
  auto xv = [&](std::size_t i) { return i < x.size() ? x[i] : static_cast<double>(i); };
  const Frame f{n ? xv(0) : 0.0, n ? xv(n - 1) : 1.0, lo, hi};
  s += axes(f);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    std::string pts;
    for (std::size_t i = 0; i < ys[k].values.size(); ++i) {
      if (!std::isfinite(ys[k].values[i])) continue;
      if (!pts.empty()) pts += " ";
      pts += num(f.px(xv(i))) + "," + num(f.py(ys[k].values[i]));
    }
    s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(kPalette[k % 7]) + "\" points=\"" +
         pts + "\"/>\n";
  }
  return s + legend(ys) + close();
}

std::string svg_orientation_rose(const std::string& title, const std::vector<double>& weights) {
  const double size = 320.0, cx = size / 2, cy = size / 2 + 10, r = size / 2 - 30;
  std::string s = open(size, size + 10, title);
  double top = 0.0;
  for (double w : weights) top = std::max(top, w);
  s += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
       "\" fill=\"none\" stroke=\"#bbb\"/>\n";
  const double step = 2.0 * std::numbers::pi / static_cast<double>(std::max<std::size_t>(weights.size(), 1));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0 || top <= 0.0) continue;
    const double len = r * weights[i] / top;
    // Bin i is centred on bearing 10*i degrees, clockwise from north.
    const double a0 = (static_cast<double>(i) - 0.5) * step, a1 = (static_cast<double>(i) + 0.5) * step;
    s += "<path fill=\"" + std::string(kPalette[0]) + "\" fill-opacity=\"0.8\" d=\"M" + num(cx) + "," + num(cy) +
         " L" + num(cx + len * std::sin(a0)) + "," + num(cy - len * std::cos(a0)) + " A" + num(len) + "," +
         num(len) + " 0 0 1 " + num(cx + len * std::sin(a1)) + "," + num(cy - len * std::cos(a1)) + " Z\"/>\n";
  }
  s += "<text x=\"" + num(cx) + "\" y=\"" + num(cy - r - 4) + "\" text-anchor=\"middle\">N</text>\n";
  return s + close();
}

std::string svg_graph(const std::string& title, const StreetGraph& g) {
  const double size = 480.0, pad = 24.0;
  std::string s = open(size, size + 20, title);
  if (g.node_count() == 0) return s + close();
  const auto box = bounding_box(g.nodes());
  const double span = std::max({box.max.x - box.min.x, box.max.y - box.min.y, 1e-9});
  const double k = (size - 2 * pad) / span;
  auto px = [&](PointXY p) { return num(pad + (p.x - box.min.x) * k); };
  auto py = [&](PointXY p) { return num(size + 20 - pad - (p.y - box.min.y) * k); };
  s += "<g stroke=\"#222\" stroke-width=\"1.2\" fill=\"none\">\n";
  for (const auto& e : g.edges()) {
    std::string pts;
    for (const auto& p : g.edge_polyline(e)) {
      if (!pts.empty()) pts += " ";
      pts += px(p) + "," + py(p);
    }
    s += "<polyline points=\"" + pts + "\"/>\n";
  }
  s += "</g>\n<g fill=\"#d62728\">\n";
  for (const auto& p : g.nodes()) s += "<circle cx=\"" + px(p) + "\" cy=\"" + py(p) + "\" r=\"2\"/>\n";
  return s + "</g>\n" + close();
}

}  // namespace streetvae::cli
