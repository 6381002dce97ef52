#include "pedpred/map_document.hpp"

#include <fstream>

#include "pedpred/error.hpp"

namespace pedpred {

CellClass cell_class_from_string(const std::string& s) {
  if (s == "obstacle") return CellClass::kObstacle;
  if (s == "road") return CellClass::kRoad;
  if (s == "sidewalk") return CellClass::kSidewalk;
  if (s == "crosswalk") return CellClass::kCrosswalk;
  throw Error(ErrorCode::kMalformedDocument, "unknown cell class '" + s + "'");
}

std::string to_string(CellClass c) {
  switch (c) {
    case CellClass::kObstacle: return "obstacle";
    case CellClass::kRoad: return "road";
    case CellClass::kSidewalk: return "sidewalk";
    case CellClass::kCrosswalk: return "crosswalk";
  }
  return "obstacle";
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t MapDocument::content_hash() const { return fnv1a64(source.dump()); }

MapDocument parse_map(const nlohmann::json& doc, const BuildOptions& options) {
  MapDocument map;
  map.source = doc;
  map.graph = build_graph(doc, options);
  try {
    for (const auto& g : doc.value("goals", nlohmann::json::array())) {
      map.goals.push_back(
          Goal{g.at("id").get<std::int64_t>(), Vec2(g.at("x").get<double>(), g.at("y").get<double>())});
    }
    if (doc.contains("raster")) {
      const auto& r = doc.at("raster");
      map.raster.cell_size = r.value("cell_size", map.raster.cell_size);
      map.raster.margin = r.value("margin", map.raster.margin);
      map.raster.background =
          cell_class_from_string(r.value("background", to_string(map.raster.background)));
      map.raster.sidewalk_width = r.value("sidewalk_width", map.raster.sidewalk_width);
      map.raster.crosswalk_width = r.value("crosswalk_width", map.raster.crosswalk_width);
    }
    for (const auto& reg : doc.value("regions", nlohmann::json::array())) {
      Region region;
      region.cls = cell_class_from_string(reg.at("class").get<std::string>());
      for (const auto& v : reg.at("polygon")) {
        region.polygon.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
      }
      if (region.polygon.size() < 3) {
        throw Error(ErrorCode::kMalformedDocument, "region polygon needs >= 3 vertices");
      }
      map.raster.regions.push_back(std::move(region));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kMalformedDocument, ex.what());
  }
  if (!(map.raster.cell_size > 0.0)) {
    throw Error(ErrorCode::kMalformedDocument, "raster cell_size must be positive");
  }
  return map;
}

MapDocument load_map(const std::filesystem::path& path, const BuildOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open map file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(ErrorCode::kMalformedDocument, path.string() + ": " + ex.what());
  }
  try {
    return parse_map(doc, options);
  } catch (const Error& ex) {
    throw Error(ex.code(), path.string() + ": " + ex.detail());
  }
}

}  // namespace pedpred
