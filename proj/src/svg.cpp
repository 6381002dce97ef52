#include "pedpred/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace pedpred {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                                    "#8c564b", "#e377c2", "#17becf", "#bcbd22"};

struct Frame {
  double min_x, max_y, scale;
  double px(double x) const { return (x - min_x) * scale; }
  double py(double y) const { return (max_y - y) * scale; }
};

}  // namespace

std::string render_prediction_svg(const RoadGraph& graph, const PredictionTree& tree,
                                  const SvgOptions& options) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double lo_x = inf, lo_y = inf, hi_x = -inf, hi_y = -inf;
  auto grow = [&](const Vec2& p) {
    lo_x = std::min(lo_x, p.x());
    lo_y = std::min(lo_y, p.y());
    hi_x = std::max(hi_x, p.x());
    hi_y = std::max(hi_y, p.y());
  };
  for (const Node& n : graph.nodes()) grow(n.position);
  for (const Branch& b : tree.branches) {
    for (const BeliefStep& s : b.beliefs) grow(s.belief.mean.position());
  }
  for (const Goal& g : options.goals) grow(g.position);
  if (!std::isfinite(lo_x)) lo_x = lo_y = hi_x = hi_y = 0.0;
  lo_x -= options.margin;
  lo_y -= options.margin;
  hi_x += options.margin;
  hi_y += options.margin;
  const Frame f{lo_x, hi_y, options.pixels_per_m};

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (hi_x - lo_x) * f.scale
     << "\" height=\"" << (hi_y - lo_y) * f.scale << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  os << "<g id=\"edges\" stroke=\"#999\" stroke-width=\"1\">\n";
  std::set<std::pair<NodeId, NodeId>> drawn;
  for (const Edge& e : graph.edges()) {
    const auto key = std::minmax(e.from_node, e.to_node);
    if (!drawn.insert(key).second) continue;
    os << "<line x1=\"" << f.px(e.start.x()) << "\" y1=\"" << f.py(e.start.y()) << "\" x2=\""
       << f.px(e.end.x()) << "\" y2=\"" << f.py(e.end.y()) << "\"/>\n";
  }
  os << "</g>\n";

  os << "<g id=\"branches\" fill=\"none\">\n";
  for (const Branch& b : tree.branches) {
    const char* color = kPalette[b.id % std::size(kPalette)];
    os << "<polyline data-branch=\"" << b.id << "\" data-edge=\"" << b.edge << "\" stroke=\""
       << color << "\" stroke-width=\"2\" points=\"";
    for (const BeliefStep& s : b.beliefs) {
      os << f.px(s.belief.mean.x) << ',' << f.py(s.belief.mean.y) << ' ';
    }
    os << "\"/>\n";
    for (const BeliefStep& s : b.beliefs) {
      const bool last = &s == &b.beliefs.back();
      if (options.ellipse_every <= 0 || (s.step % options.ellipse_every != 0 && !last)) continue;
      const ConfidenceEllipse el = confidence_ellipse(s.belief.cov.topLeftCorner<2, 2>(),
                                                      options.percentile);
      // SVG rotates clockwise in screen space, where y is flipped.
      os << "<ellipse cx=\"" << f.px(s.belief.mean.x) << "\" cy=\"" << f.py(s.belief.mean.y)
         << "\" rx=\"" << std::max(el.semi_major * f.scale, 0.01) << "\" ry=\""
         << std::max(el.semi_minor * f.scale, 0.01) << "\" transform=\"rotate("
         << -el.orientation * 180.0 / kPi << ' ' << f.px(s.belief.mean.x) << ' '
         << f.py(s.belief.mean.y) << ")\" stroke=\"" << color
         << "\" stroke-opacity=\"0.6\" stroke-width=\"1\"/>\n";
    }
  }
  os << "</g>\n";

  os << "<g id=\"goals\" fill=\"red\">\n";
  for (const Goal& g : options.goals) {
    os << "<circle data-goal=\"" << g.id << "\" cx=\"" << f.px(g.position.x()) << "\" cy=\""
       << f.py(g.position.y()) << "\" r=\"4\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

std::string render_runtime_svg(const std::vector<TimingRow>& rows) {
  std::vector<int> taus;
  std::vector<std::string> methods;
  std::map<std::pair<std::string, int>, double> ms;
  for (const TimingRow& r : rows) {
    if (std::find(taus.begin(), taus.end(), r.tau) == taus.end()) taus.push_back(r.tau);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    ms[{r.method, r.tau}] = r.mean_ms;
  }
  double lo = 1e-3, hi = 1.0;
  for (const auto& [_, v] : ms) hi = std::max(hi, v);
  const double decades = std::log10(hi / lo) + 0.5;
  const double width = 80.0 + 120.0 * static_cast<double>(taus.size());
  const double height = 300.0;
  const double plot_h = 240.0;
  auto bar_h = [&](double v) {
    return std::clamp(std::log10(std::max(v, lo) / lo) / decades, 0.0, 1.0) * plot_h;
  };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double bar_w = 90.0 / std::max<std::size_t>(1, methods.size());
  for (std::size_t t = 0; t < taus.size(); ++t) {
    const double x0 = 60.0 + 120.0 * static_cast<double>(t);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto it = ms.find({methods[m], taus[t]});
      if (it == ms.end()) continue;
      const double h = bar_h(it->second);
      os << "<rect data-method=\"" << methods[m] << "\" data-tau=\"" << taus[t]
         << "\" data-ms=\"" << it->second << "\" x=\"" << x0 + bar_w * m << "\" y=\""
         << 20.0 + plot_h - h << "\" width=\"" << bar_w * 0.9 << "\" height=\"" << h
         << "\" fill=\"" << kPalette[m % std::size(kPalette)] << "\"/>\n";
    }
    os << "<text x=\"" << x0 + 30.0 << "\" y=\"" << 20.0 + plot_h + 20.0
       << "\" font-size=\"12\">tau=" << taus[t] << "</text>\n";
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    os << "<text x=\"5\" y=\"" << 15.0 + 14.0 * m << "\" font-size=\"12\" fill=\""
       << kPalette[m % std::size(kPalette)] << "\">" << methods[m] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pedpred
