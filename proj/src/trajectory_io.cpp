#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "pedpred/error.hpp"
#include "pedpred/evaluation.hpp"

namespace pedpred {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& field, int line) {
  const std::string f = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
  if (ec != std::errc() || ptr != f.data() + f.size() || f.empty() || !std::isfinite(value)) {
    throw Error(ErrorCode::kMalformedRow,
                "line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return value;
}

}  // namespace

TrajectoryLabel trajectory_label_from_string(const std::string& s) {
  if (s == "crossing") return TrajectoryLabel::kCrossing;
  if (s == "sidewalk") return TrajectoryLabel::kSidewalk;
  if (s == "unknown" || s.empty()) return TrajectoryLabel::kUnknown;
  throw Error(ErrorCode::kMalformedRow, "unknown label '" + s + "'");
}

std::string to_string(TrajectoryLabel label) {
  switch (label) {
    case TrajectoryLabel::kCrossing: return "crossing";
    case TrajectoryLabel::kSidewalk: return "sidewalk";
    case TrajectoryLabel::kUnknown: break;
  }
  return "unknown";
}

std::vector<Trajectory> load_trajectories(std::istream& in) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split(trim(line), ',');
      break;
    }
  }
  if (header.empty()) return {};
  for (auto& h : header) h = trim(h);
  const bool has_id = header.size() >= 4;
  const bool has_label = header.size() >= 5;
  if (header.size() < 3 || header.size() > 5 || header[0] != "t" || header[1] != "x" ||
      header[2] != "y" || (has_id && header[3] != "id") || (has_label && header[4] != "label")) {
    throw Error(ErrorCode::kMalformedRow, "line " + std::to_string(line_no) +
                                              ": expected header t,x,y[,id,label]");
  }

  std::vector<Trajectory> out;
  std::unordered_map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kMalformedRow, "line " + std::to_string(line_no) + ": expected " +
                                                std::to_string(header.size()) + " fields");
    }
    TrajectorySample s{parse_number(fields[0], line_no), parse_number(fields[1], line_no),
                       parse_number(fields[2], line_no)};
    const std::string id = has_id ? trim(fields[3]) : std::string("0");
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) {
      out.push_back(Trajectory{id, {}, TrajectoryLabel::kUnknown});
      if (has_label) out.back().label = trajectory_label_from_string(trim(fields[4]));
    }
    Trajectory& traj = out[it->second];
    if (!traj.samples.empty() && !(s.t > traj.samples.back().t)) {
      throw Error(ErrorCode::kNonMonotoneTime,
                  "line " + std::to_string(line_no) + ": time " + trim(fields[0]) +
                      " does not increase for trajectory '" + id + "'");
    }
    traj.samples.push_back(s);
  }
  return out;
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIo, "cannot open trajectory file " + file.string());
  try {
    return load_trajectories(in);
  } catch (const Error& ex) {
    throw Error(ex.code(), file.string() + ": " + ex.detail());
  }
}

void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  out << "t,x,y,id,label\n";
  out << std::setprecision(17);
  for (const Trajectory& traj : trajectories) {
    const std::string label = to_string(traj.label);
    for (const TrajectorySample& s : traj.samples) {
      out << s.t << ',' << s.x << ',' << s.y << ',' << traj.id << ',' << label << '\n';
    }
  }
}

std::vector<Vec2> resample_positions(const Trajectory& traj, double t_s) {
  std::vector<Vec2> out;
  if (traj.samples.empty()) return out;
  const double t0 = traj.samples.front().t;
  const double t_end = traj.samples.back().t;
  std::size_t j = 0;
  for (int k = 0;; ++k) {
    const double t = t0 + k * t_s;
    if (t > t_end + 1e-9) break;
    while (j + 1 < traj.samples.size() && traj.samples[j + 1].t < t) ++j;
    if (j + 1 >= traj.samples.size()) {
      out.emplace_back(traj.samples.back().x, traj.samples.back().y);
      continue;
    }
    const auto& a = traj.samples[j];
    const auto& b = traj.samples[j + 1];
    const double w = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
    out.emplace_back(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y));
  }
  return out;
}

StateTrack estimate_states(const Trajectory& traj, double t_s, int window) {
  if (!(t_s > 0.0) || window < 1) {
    throw Error(ErrorCode::kInvalidParams, "t_s must be positive and window >= 1");
  }
  StateTrack track;
  track.id = traj.id;
  track.label = traj.label;
  track.t_s = t_s;
  track.t0 = traj.samples.empty() ? 0.0 : traj.samples.front().t;
  track.positions = resample_positions(traj, t_s);
  const int n = static_cast<int>(track.positions.size());
  if (n < 3) {
    throw Error(ErrorCode::kTooShort, "trajectory '" + traj.id + "' has " + std::to_string(n) +
                                          " samples after resampling");
  }

  const int half = window / 2;
  std::vector<Vec2> smooth(n);
  for (int k = 0; k < n; ++k) {
    const int h = std::min({half, k, n - 1 - k});
    Vec2 acc = Vec2::Zero();
    for (int j = k - h; j <= k + h; ++j) acc += track.positions[j];
    smooth[k] = acc / (2 * h + 1);
  }

  constexpr double kStationary = 1e-6;  // m/s
  track.states.resize(n);
  std::vector<double> raw_heading(n, 0.0);
  std::vector<char> moving(n, 0);
  for (int k = 0; k < n; ++k) {
    const int lo = std::max(0, k - 1);
    const int hi = std::min(n - 1, k + 1);
    const Vec2 vel = (smooth[hi] - smooth[lo]) / ((hi - lo) * t_s);
    const double speed = vel.norm();
    track.states[k].x = track.positions[k].x();
    track.states[k].y = track.positions[k].y();
    track.states[k].v = speed < kStationary ? 0.0 : speed;
    moving[k] = speed >= kStationary;
    raw_heading[k] = std::atan2(vel.y(), vel.x());
  }

  // Unwrap over moving samples; stationary stretches hold the last heading.
  double heading = 0.0;
  bool seen_motion = false;
  for (int k = 0; k < n; ++k) {
    if (moving[k]) {
      heading = seen_motion ? heading + normalize_angle(raw_heading[k] - heading) : raw_heading[k];
      seen_motion = true;
    }
    track.states[k].theta = heading;
  }
  return track;
}

}  // namespace pedpred
