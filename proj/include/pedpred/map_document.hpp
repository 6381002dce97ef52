#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedpred/roadgraph.hpp"

namespace pedpred {

enum class CellClass : std::uint8_t { kObstacle = 0, kRoad = 1, kSidewalk = 2, kCrosswalk = 3 };

CellClass cell_class_from_string(const std::string& s);
std::string to_string(CellClass c);

struct Goal {
  std::int64_t id = 0;
  Vec2 position = Vec2::Zero();
};

/// Explicit semantic polygon (any simple polygon, vertices in order).
struct Region {
  CellClass cls = CellClass::kRoad;
  std::vector<Vec2> polygon;
};

/// Rasterization settings of a map document (`raster` section).
struct RasterSpec {
  double cell_size = 0.2;  // m
  double margin = 1.0;     // m around the bounding box
  CellClass background = CellClass::kObstacle;
  double sidewalk_width = 2.0;   // m, default strip width around sidewalk edges
  double crosswalk_width = 3.0;  // m
  std::vector<Region> regions;
};

/// Parsed map document: road graph plus the goal and semantic sections used
/// by the grid baseline.
struct MapDocument {
  nlohmann::json source;
  RoadGraph graph;
  std::vector<Goal> goals;
  RasterSpec raster;

  /// Stable 64-bit FNV-1a hash of the canonical document text.
  std::uint64_t content_hash() const;
};

MapDocument parse_map(const nlohmann::json& doc, const BuildOptions& options = {});

/// Reads and parses a map file. Throws Error(kIo) naming the path when it
/// cannot be opened; JSON syntax errors become kMalformedDocument with the
/// parser's byte/line context.
MapDocument load_map(const std::filesystem::path& path, const BuildOptions& options = {});

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace pedpred
