#include "pedpred/rl_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "pedpred/error.hpp"

namespace pedpred {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::array<GridAction, 24> make_actions() {
  std::vector<GridAction> acts;
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      if (dx == 0 && dy == 0) continue;
      acts.push_back({dx, dy, std::hypot(dx, dy)});
    }
  }
  auto angle = [](const GridAction& a) {
    double t = std::atan2(a.dy, a.dx);
    return t < 0.0 ? t + 2.0 * kPi : t;
  };
  std::sort(acts.begin(), acts.end(), [&](const GridAction& a, const GridAction& b) {
    const double ta = angle(a), tb = angle(b);
    if (ta != tb) return ta < tb;
    return a.length < b.length;
  });
  std::array<GridAction, 24> out{};
  std::copy(acts.begin(), acts.end(), out.begin());
  return out;
}

// Half-integer midpoints touch two cells; both must be passable.
bool passes_between(const SemanticGrid& g, int x0, int y0, const GridAction& a) {
  if (std::abs(a.dx) < 2 && std::abs(a.dy) < 2) return true;
  const int xs[2] = {x0 + static_cast<int>(std::floor(a.dx / 2.0)),
                     x0 + static_cast<int>(std::ceil(a.dx / 2.0))};
  const int ys[2] = {y0 + static_cast<int>(std::floor(a.dy / 2.0)),
                     y0 + static_cast<int>(std::ceil(a.dy / 2.0))};
  for (int x : xs) {
    for (int y : ys) {
      if (!g.traversable(g.index(x, y))) return false;
    }
  }
  return true;
}

// Successor and reward per (cell, action); -1 marks an invalid move.
struct Transitions {
  std::vector<int> next;
  std::vector<double> reward;

  Transitions(const SemanticGrid& g, const RewardConfig& r) {
    next.assign(static_cast<std::size_t>(g.size()) * 24, -1);
    reward.assign(next.size(), 0.0);
    for (int c = 0; c < g.size(); ++c) {
      if (!g.traversable(c)) continue;
      for (int a = 0; a < 24; ++a) {
        if (auto s = successor(g, c, a)) {
          next[c * 24 + a] = *s;
          reward[c * 24 + a] = r.for_class(g.cells[*s]) * grid_actions()[a].length;
        }
      }
    }
  }
};

double backup(const Transitions& t, double gamma, int cell, const std::vector<double>& v) {
  double best = kNegInf;
  for (int a = 0; a < 24; ++a) {
    const int s = t.next[cell * 24 + a];
    if (s < 0 || v[s] == kNegInf) continue;
    best = std::max(best, t.reward[cell * 24 + a] + gamma * v[s]);
  }
  return best;
}

double sweep(const Transitions& t, const SemanticGrid& g, const RewardConfig& r, int goal,
             std::vector<double>& v, bool reverse) {
  double change = 0.0;
  const int n = g.size();
  for (int i = 0; i < n; ++i) {
    const int c = reverse ? n - 1 - i : i;
    if (c == goal || v[c] == kNegInf) continue;
    const double nv = backup(t, r.gamma, c, v);
    change = std::max(change, std::abs(nv - v[c]));
    v[c] = nv;
  }
  return change;
}

double residual(const Transitions& t, const SemanticGrid& g, const RewardConfig& r, int goal,
                const std::vector<double>& v) {
  double res = std::abs(r.goal / (1.0 - r.gamma) - v[goal]);
  for (int c = 0; c < g.size(); ++c) {
    if (c == goal || v[c] == kNegInf) continue;
    res = std::max(res, std::abs(backup(t, r.gamma, c, v) - v[c]));
  }
  return res;
}

void check_goal(const SemanticGrid& grid, int goal_cell) {
  if (goal_cell < 0 || goal_cell >= grid.size() || !grid.walkable(goal_cell)) {
    throw Error(ErrorCode::kGoalOffWalkable,
                "goal cell " + std::to_string(goal_cell) + " is not a pedestrian area");
  }
}

bool inside_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x()) {
      in = !in;
    }
  }
  return in;
}

double segment_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

constexpr char kMagic[4] = {'P', 'P', 'V', 'F'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

Vec2 SemanticGrid::center(int cell) const {
  return origin + cell_size * Vec2(ix(cell) + 0.5, iy(cell) + 0.5);
}

std::optional<int> SemanticGrid::cell_at(const Vec2& p) const {
  const Vec2 rel = (p - origin) / cell_size;
  const int x = static_cast<int>(std::floor(rel.x()));
  const int y = static_cast<int>(std::floor(rel.y()));
  if (!contains(x, y)) return std::nullopt;
  return index(x, y);
}

std::size_t SemanticGrid::goal_slot(std::int64_t goal_id) const {
  for (std::size_t i = 0; i < goal_ids.size(); ++i) {
    if (goal_ids[i] == goal_id) return i;
  }
  throw Error(ErrorCode::kInvalidParams, "unknown goal id " + std::to_string(goal_id));
}

SemanticGrid SemanticGrid::uniform(int width, int height, CellClass cls, double cell_size,
                                   Vec2 origin) {
  SemanticGrid g;
  g.origin = origin;
  g.cell_size = cell_size;
  g.width = width;
  g.height = height;
  g.cells.assign(static_cast<std::size_t>(width) * height, cls);
  return g;
}

void SemanticGrid::add_goal(std::int64_t id, int cell) {
  check_goal(*this, cell);
  goals.push_back(cell);
  goal_ids.push_back(id);
}

double RewardConfig::for_class(CellClass c) const {
  switch (c) {
    case CellClass::kRoad: return road;
    case CellClass::kSidewalk: return sidewalk;
    case CellClass::kCrosswalk: return crosswalk;
    case CellClass::kObstacle: break;
  }
  return kNegInf;
}

void RewardConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw Error(ErrorCode::kInvalidParams, "gamma must lie in (0, 1)");
  }
  if (road > 0.0 || sidewalk > 0.0 || crosswalk > 0.0) {
    throw Error(ErrorCode::kInvalidParams, "non-goal rewards must be <= 0");
  }
}

SemanticGrid rasterize(const MapDocument& map) {
  const RasterSpec& spec = map.raster;
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  auto extend = [&](const Vec2& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const Node& n : map.graph.nodes()) extend(n.position);
  for (const Region& r : spec.regions)
    for (const Vec2& p : r.polygon) extend(p);
  for (const Goal& g : map.goals) extend(g.position);
  if (!lo.allFinite()) throw Error(ErrorCode::kMalformedDocument, "map has no geometry");
  lo -= Vec2::Constant(spec.margin);
  hi += Vec2::Constant(spec.margin);

  SemanticGrid grid;
  grid.cell_size = spec.cell_size;
  grid.origin = lo;
  grid.width = static_cast<int>(std::ceil((hi.x() - lo.x()) / spec.cell_size - 1e-9));
  grid.height = static_cast<int>(std::ceil((hi.y() - lo.y()) / spec.cell_size - 1e-9));
  grid.cells.assign(static_cast<std::size_t>(grid.size()), spec.background);

  for (int c = 0; c < grid.size(); ++c) {
    const Vec2 p = grid.center(c);
    CellClass best = spec.background;
    for (const Region& r : spec.regions) {
      if (r.cls > best && inside_polygon(r.polygon, p)) best = r.cls;
    }
    for (const Edge& e : map.graph.edges()) {
      const CellClass cls =
          e.kind == EdgeKind::kCrosswalk ? CellClass::kCrosswalk : CellClass::kSidewalk;
      if (cls <= best) continue;
      const double width = e.width.value_or(
          e.kind == EdgeKind::kCrosswalk ? spec.crosswalk_width : spec.sidewalk_width);
      if (segment_distance(e.start, e.end, p) <= 0.5 * width) best = cls;
    }
    grid.cells[c] = best;
  }
  for (const Goal& g : map.goals) {
    const auto cell = grid.cell_at(g.position);
    if (!cell) {
      throw Error(ErrorCode::kGoalOffWalkable, "goal " + std::to_string(g.id) + " off grid");
    }
    try {
      grid.add_goal(g.id, *cell);
    } catch (const Error&) {
      throw Error(ErrorCode::kGoalOffWalkable,
                  "goal " + std::to_string(g.id) + " lies on " + to_string(grid.cells[*cell]));
    }
  }
  return grid;
}

const std::array<GridAction, 24>& grid_actions() {
  static const std::array<GridAction, 24> actions = make_actions();
  return actions;
}

std::optional<int> successor(const SemanticGrid& grid, int cell, int action) {
  const GridAction& a = grid_actions()[action];
  const int x0 = grid.ix(cell), y0 = grid.iy(cell);
  const int x = x0 + a.dx, y = y0 + a.dy;
  if (!grid.contains(x, y)) return std::nullopt;
  const int s = grid.index(x, y);
  if (!grid.traversable(s) || !passes_between(grid, x0, y0, a)) return std::nullopt;
  return s;
}

double value_lower_bound(const RewardConfig& r) {
  const double worst = std::min({r.road, r.sidewalk, r.crosswalk, r.goal});
  return worst * std::sqrt(8.0) / (1.0 - r.gamma);
}

std::vector<char> reachable_from_goal(const SemanticGrid& grid, int goal_cell) {
  std::vector<char> seen(static_cast<std::size_t>(grid.size()), 0);
  std::deque<int> open{goal_cell};
  seen[goal_cell] = 1;
  while (!open.empty()) {
    const int c = open.front();
    open.pop_front();
    for (int a = 0; a < 24; ++a) {
      // Move validity is symmetric, so forward moves enumerate predecessors.
      if (auto s = successor(grid, c, a); s && !seen[*s]) {
        seen[*s] = 1;
        open.push_back(*s);
      }
    }
  }
  return seen;
}

std::vector<double> initial_values(const SemanticGrid& grid, const RewardConfig& rewards,
                                   int goal_cell) {
  check_goal(grid, goal_cell);
  const auto reach = reachable_from_goal(grid, goal_cell);
  const double lower = value_lower_bound(rewards);
  std::vector<double> v(static_cast<std::size_t>(grid.size()), kNegInf);
  for (int c = 0; c < grid.size(); ++c) {
    if (reach[c]) v[c] = lower;
  }
  v[goal_cell] = rewards.goal / (1.0 - rewards.gamma);
  return v;
}

double bellman_sweep(const SemanticGrid& grid, const RewardConfig& rewards, int goal_cell,
                     std::vector<double>& values, bool reverse) {
  const Transitions t(grid, rewards);
  return sweep(t, grid, rewards, goal_cell, values, reverse);
}

double bellman_residual(const SemanticGrid& grid, const RewardConfig& rewards, int goal_cell,
                        const std::vector<double>& values) {
  const Transitions t(grid, rewards);
  return residual(t, grid, rewards, goal_cell, values);
}

ValueFunction value_iteration(const SemanticGrid& grid, const RewardConfig& rewards,
                              std::int64_t goal_id, const ValueIterationOptions& options) {
  rewards.validate();
  const int goal_cell = grid.goals.at(grid.goal_slot(goal_id));
  ValueFunction vf;
  vf.goal_id = goal_id;
  vf.goal_cell = goal_cell;
  vf.values = initial_values(grid, rewards, goal_cell);
  const Transitions t(grid, rewards);
  for (int it = 1; it <= options.max_iter; ++it) {
    const double change = sweep(t, grid, rewards, goal_cell, vf.values, it % 2 == 0);
    if (change < options.tol) {
      vf.residual = residual(t, grid, rewards, goal_cell, vf.values);
      if (vf.residual < options.tol) {
        vf.sweeps = it;
        return vf;
      }
    }
  }
  throw Error(ErrorCode::kNoConvergence,
              "value iteration exceeded " + std::to_string(options.max_iter) + " sweeps");
}

std::array<double, 24> softmax_policy(const SemanticGrid& grid, const RewardConfig& rewards,
                                      const ValueFunction& vf, double alpha, int cell) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidParams, "alpha must be positive");
  std::array<double, 24> q{};
  double best = kNegInf;
  for (int a = 0; a < 24; ++a) {
    q[a] = kNegInf;
    const auto s = successor(grid, cell, a);
    if (!s || vf.values[*s] == kNegInf) continue;
    q[a] = rewards.for_class(grid.cells[*s]) * grid_actions()[a].length +
           rewards.gamma * vf.values[*s];
    best = std::max(best, q[a]);
  }
  if (best == kNegInf) {
    throw Error(ErrorCode::kAllActionsBlocked, "cell " + std::to_string(cell));
  }
  double total = 0.0;
  std::array<double, 24> p{};
  for (int a = 0; a < 24; ++a) {
    p[a] = q[a] == kNegInf ? 0.0 : std::exp(alpha * (q[a] - best));
    total += p[a];
  }
  for (double& x : p) x /= total;
  return p;
}

int snap_to_reachable(const SemanticGrid& grid, const ValueFunction& vf, const Vec2& p) {
  const Vec2 rel = (p - grid.origin) / grid.cell_size;
  const int x0 = std::clamp(static_cast<int>(std::floor(rel.x())), 0, grid.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(rel.y())), 0, grid.height - 1);
  const int max_ring = std::max(grid.width, grid.height);
  for (int ring = 0; ring <= max_ring; ++ring) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int y = y0 - ring; y <= y0 + ring; ++y) {
      for (int x = x0 - ring; x <= x0 + ring; ++x) {
        if (std::max(std::abs(x - x0), std::abs(y - y0)) != ring || !grid.contains(x, y)) continue;
        const int c = grid.index(x, y);
        if (vf.values[c] == kNegInf) continue;
        const double d = (grid.center(c) - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
    }
    if (best >= 0) return best;
  }
  throw Error(ErrorCode::kAllActionsBlocked, "no cell reaches the goal");
}

Rollouts sample_rollouts(const SemanticGrid& grid, const RewardConfig& rewards,
                         const ValueFunction& vf, double alpha, const Vec2& start,
                         const SamplingOptions& options) {
  if (options.samples < 1) throw Error(ErrorCode::kInvalidParams, "need >= 1 sample");
  if (options.horizon < 0) throw Error(ErrorCode::kInvalidParams, "negative horizon");
  const int start_cell = snap_to_reachable(grid, vf, start);
  const double stride = options.speed * options.t_s;

  Rollouts out;
  out.positions.resize(options.samples);
  for (int j = 0; j < options.samples; ++j) {
    std::seed_seq seq{static_cast<std::uint64_t>(options.seed), static_cast<std::uint64_t>(j)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    auto& traj = out.positions[j];
    traj.reserve(options.horizon + 1);
    traj.push_back(start);
    Vec2 pos = start;
    int cell = start_cell;
    Vec2 target = grid.center(cell);
    bool settled = false;  // parked at the goal centre
    for (int k = 1; k <= options.horizon; ++k) {
      double budget = stride;
      while (budget > 0.0 && !settled) {
        const double dist = (target - pos).norm();
        if (dist > budget) {
          pos += (target - pos) * (budget / dist);
          break;
        }
        pos = target;
        budget -= dist;
        if (cell == vf.goal_cell) {
          settled = true;
          break;
        }
        const auto probs = softmax_policy(grid, rewards, vf, alpha, cell);
        const double u = uniform(rng);
        double acc = 0.0;
        int chosen = -1;
        for (int a = 0; a < 24; ++a) {
          if (probs[a] == 0.0) continue;
          acc += probs[a];
          chosen = a;
          if (u < acc) break;
        }
        cell = *successor(grid, cell, chosen);
        target = grid.center(cell);
      }
      traj.push_back(pos);
    }
  }
  return out;
}

SampledPrediction summarize(Rollouts rollouts) {
  SampledPrediction out;
  const std::size_t n = rollouts.positions.size();
  const std::size_t steps = n ? rollouts.positions.front().size() : 0;
  out.mean.assign(steps, Vec2::Zero());
  out.cov.assign(steps, Mat2::Zero());
  for (std::size_t k = 0; k < steps; ++k) {
    Vec2 mean = Vec2::Zero();
    for (const auto& traj : rollouts.positions) mean += traj[k];
    mean /= static_cast<double>(n);
    Mat2 cov = Mat2::Zero();
    if (n > 1) {
      for (const auto& traj : rollouts.positions) {
        const Vec2 d = traj[k] - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(n - 1);
    }
    out.mean[k] = mean;
    out.cov[k] = cov;
  }
  out.rollouts = std::move(rollouts);
  return out;
}

SampledPrediction sample_prediction(const SemanticGrid& grid, const RewardConfig& rewards,
                                    const ValueFunction& vf, double alpha, const Vec2& start,
                                    const SamplingOptions& options) {
  return summarize(sample_rollouts(grid, rewards, vf, alpha, start, options));
}

ValueFunctionStore::ValueFunctionStore(const SemanticGrid& grid, RewardConfig rewards,
                                       std::optional<std::filesystem::path> directory,
                                       ValueIterationOptions options)
    : grid_(grid),
      rewards_(rewards),
      directory_(std::move(directory)),
      options_(options),
      entries_(grid.goals.size()) {
  rewards_.validate();
  std::string bytes;
  auto append = [&bytes](const void* p, std::size_t n) {
    bytes.append(static_cast<const char*>(p), n);
  };
  append(grid.origin.data(), sizeof(double) * 2);
  append(&grid.cell_size, sizeof(double));
  append(&grid.width, sizeof(int));
  append(&grid.height, sizeof(int));
  append(grid.cells.data(), grid.cells.size() * sizeof(CellClass));
  grid_hash_ = fnv1a64(bytes);
}

std::uint64_t ValueFunctionStore::key(std::int64_t goal_id) const {
  std::ostringstream os;
  os.precision(17);
  os << grid_hash_ << '|' << rewards_.road << '|' << rewards_.sidewalk << '|'
     << rewards_.crosswalk << '|' << rewards_.goal << '|' << rewards_.gamma << '|'
     << options_.tol << '|' << grid_.goals.at(grid_.goal_slot(goal_id)) << '|' << goal_id;
  return fnv1a64(os.str());
}

const ValueFunction& ValueFunctionStore::get(std::int64_t goal_id) {
  auto& slot = entries_.at(grid_.goal_slot(goal_id));
  if (slot) return *slot;
  const std::uint64_t k = key(goal_id);
  std::optional<std::filesystem::path> file;
  if (directory_) {
    std::ostringstream name;
    name << "vf_" << std::hex << k << ".bin";
    file = *directory_ / name.str();
    if (auto vf = load_value_function(k, *file);
        vf && vf->values.size() == static_cast<std::size_t>(grid_.size())) {
      slot = std::move(*vf);
      ++loaded_;
      return *slot;
    }
  }
  slot = value_iteration(grid_, rewards_, goal_id, options_);
  ++solved_;
  if (file) {
    std::filesystem::create_directories(*directory_);
    save_value_function(*slot, k, *file);
  }
  return *slot;
}

void save_value_function(const ValueFunction& vf, std::uint64_t key,
                         const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + file.string());
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, key);
  put(os, vf.goal_id);
  put(os, vf.goal_cell);
  put(os, vf.sweeps);
  put(os, vf.residual);
  put(os, static_cast<std::uint64_t>(vf.values.size()));
  os.write(reinterpret_cast<const char*>(vf.values.data()),
           static_cast<std::streamsize>(vf.values.size() * sizeof(double)));
}

std::optional<ValueFunction> load_value_function(std::uint64_t key,
                                                 const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t stored_key = 0, n = 0;
  ValueFunction vf;
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) return std::nullopt;
  if (!get(is, version) || version != kVersion) return std::nullopt;
  if (!get(is, stored_key) || stored_key != key) return std::nullopt;
  if (!get(is, vf.goal_id) || !get(is, vf.goal_cell) || !get(is, vf.sweeps) ||
      !get(is, vf.residual) || !get(is, n)) {
    return std::nullopt;
  }
  vf.values.resize(n);
  if (!is.read(reinterpret_cast<char*>(vf.values.data()),
               static_cast<std::streamsize>(n * sizeof(double)))) {
    return std::nullopt;
  }
  return vf;
}

}  // namespace pedpred
