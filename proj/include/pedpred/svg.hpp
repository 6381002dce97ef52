#pragma once

#include <string>
#include <vector>

#include "pedpred/evaluation.hpp"
#include "pedpred/map_document.hpp"
#include "pedpred/predictor.hpp"
#include "pedpred/roadgraph.hpp"

namespace pedpred {

struct SvgOptions {
  double percentile = 0.99;
  int ellipse_every = 10;    // steps between drawn ellipses
  double pixels_per_m = 12.0;
  double margin = 2.0;       // m
  std::vector<Goal> goals;
};

/// Edges as grey references, branch means as lines, confidence ellipses,
/// goals as red dots. World y points up.
std::string render_prediction_svg(const RoadGraph& graph, const PredictionTree& tree,
                                  const SvgOptions& options = {});

/// Grouped bar chart of mean runtime per horizon (log scale).
std::string render_runtime_svg(const std::vector<TimingRow>& rows);

}  // namespace pedpred
