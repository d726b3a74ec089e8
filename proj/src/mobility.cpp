#include "cats/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace cats::mobility {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

Uuid parse_vid(const std::string& s, std::size_t line) {
  try {
    if (s.size() == 36) return Uuid::from_string(s);
    return Uuid::from_u64(std::stoull(s));
  } catch (const std::exception&) {
    throw ParseError("bad vid '" + s + "'", line);
  }
}

double parse_num(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "'", line);
  }
}

// Uniform helpers with pinned bit-level behavior; the standard
// distributions are implementation-defined and would break the
// cross-platform determinism contract.
double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * u01(rng); }
std::uint64_t pick(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

}  // namespace

Trace parse_trace(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,vid,x,y") throw ParseError("expected header t,vid,x,y", lineno);

  Trace trace;
  std::unordered_set<Uuid> seen_in_slot;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_csv(line);
    if (cols.size() != 4) throw ParseError("expected 4 columns", lineno);

    double traw = parse_num(cols[0], lineno);
    auto t = static_cast<std::int64_t>(traw);
    if (static_cast<double>(t) != traw) throw ParseError("non-integer slot time", lineno);
    Uuid vid = parse_vid(cols[1], lineno);
    double x = parse_num(cols[2], lineno);
    double y = parse_num(cols[3], lineno);

    if (trace.empty() || trace.back().t != t) {
      if (!trace.empty() && t < trace.back().t)
        throw NonMonotoneTime("slot time decreases at line " + std::to_string(lineno));
      trace.push_back({t, {}});
      seen_in_slot.clear();
    }
    if (!seen_in_slot.insert(vid).second)
      throw ParseError("duplicate vid in slot", lineno);
    trace.back().entries.push_back({vid, x, y});
  }
  return trace;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

std::string write_trace(const Trace& trace) {
  std::ostringstream out;
  out << "t,vid,x,y\n";
  char num[64];
  for (const auto& slot : trace) {
    for (const auto& e : slot.entries) {
      std::snprintf(num, sizeof num, "%.17g,%.17g", e.x, e.y);
      out << slot.t << ',' << e.vid.to_string() << ',' << num << '\n';
    }
  }
  return out.str();
}

Trace generate_synthetic(const SyntheticParams& params) {
  if (params.n_vehicles < 1) throw std::invalid_argument("n_vehicles >= 1");
  if (params.duration < 1.0) throw std::invalid_argument("duration >= 1");
  std::mt19937_64 rng(params.seed * 0x9e3779b97f4a7c15ULL + 1);

  const double g = params.grid_spacing;
  const auto lanes = std::max<std::int64_t>(1, static_cast<std::int64_t>(params.area / g));

  struct Car {
    Uuid vid;
    std::int64_t ix, iy;  // current intersection
    std::int64_t tx, ty;  // target intersection (adjacent)
    double progress;      // meters along the edge
    double speed;
  };

  auto pick_next = [&](Car& c) {
    // Choose an adjacent intersection, avoiding an immediate U-turn
    // when another option exists.
    std::int64_t px = c.ix, py = c.iy;
    c.ix = c.tx;
    c.iy = c.ty;
    for (int attempt = 0; attempt < 8; ++attempt) {
      static const int dx[4] = {1, -1, 0, 0};
      static const int dy[4] = {0, 0, 1, -1};
      int d = static_cast<int>(pick(rng, 4));
      std::int64_t nx = c.ix + dx[d], ny = c.iy + dy[d];
      if (nx < 0 || ny < 0 || nx > lanes || ny > lanes) continue;
      if (nx == px && ny == py && attempt < 7) continue;
      c.tx = nx;
      c.ty = ny;
      c.progress = 0.0;
      return;
    }
    c.tx = px;  // dead end: turn back
    c.ty = py;
    c.progress = 0.0;
  };

  std::vector<Car> cars;
  cars.reserve(params.n_vehicles);
  for (int i = 0; i < params.n_vehicles; ++i) {
    Car c;
    c.vid = Uuid::from_u64(static_cast<std::uint64_t>(i + 1));
    c.ix = static_cast<std::int64_t>(pick(rng, static_cast<std::uint64_t>(lanes + 1)));
    c.iy = static_cast<std::int64_t>(pick(rng, static_cast<std::uint64_t>(lanes + 1)));
    c.tx = c.ix;
    c.ty = c.iy;
    c.progress = 0.0;
    c.speed = uniform(rng, params.speed_min, params.speed_max);
    pick_next(c);
    cars.push_back(c);
  }

  Trace trace;
  auto slots = static_cast<std::int64_t>(params.duration);
  for (std::int64_t t = 0; t < slots; ++t) {
    TraceSlot slot;
    slot.t = t;
    slot.entries.reserve(cars.size());
    for (auto& c : cars) {
      double x = static_cast<double>(c.ix) * g +
                 (static_cast<double>(c.tx - c.ix)) * c.progress;
      double y = static_cast<double>(c.iy) * g +
                 (static_cast<double>(c.ty - c.iy)) * c.progress;
      slot.entries.push_back({c.vid, x, y});

      double step = c.speed;
      while (step > 0.0) {
        double remaining = g - c.progress;
        if (c.tx == c.ix && c.ty == c.iy) remaining = 0.0;  // degenerate
        if (step < remaining) {
          c.progress += step;
          step = 0.0;
        } else {
          step -= remaining;
          pick_next(c);
          // Never carry more than one intersection per slot; speeds are
          // below grid spacing only when g > speed, so cap the carry.
          if (step >= g) step = std::fmod(step, g);
        }
      }
    }
    trace.push_back(std::move(slot));
  }
  return trace;
}

std::int64_t SlotIndex::key(double x, double y) const {
  auto cx = static_cast<std::int64_t>(std::floor(x / cell_));
  auto cy = static_cast<std::int64_t>(std::floor(y / cell_));
  return cx * 0x100000001LL + cy;
}

SlotIndex::SlotIndex(const TraceSlot& slot, double cell) : cell_(cell) {
  if (cell_ <= 0.0) throw std::invalid_argument("cell size must be positive");
  pos_.reserve(slot.entries.size());
  for (const auto& e : slot.entries) {
    pos_.emplace(e.vid, std::make_pair(e.x, e.y));
    grid_[key(e.x, e.y)].push_back(e.vid);
  }
}

std::pair<double, double> SlotIndex::position(const Uuid& vid) const {
  auto it = pos_.find(vid);
  if (it == pos_.end()) throw VehicleAbsent("vehicle absent from slot");
  return it->second;
}

std::vector<Uuid> SlotIndex::neighbors_within(const Uuid& vid, double radius) const {
  auto [x, y] = position(vid);
  std::vector<Uuid> out;
  auto reach = static_cast<std::int64_t>(std::ceil(radius / cell_));
  auto cx = static_cast<std::int64_t>(std::floor(x / cell_));
  auto cy = static_cast<std::int64_t>(std::floor(y / cell_));
  for (std::int64_t dx = -reach; dx <= reach; ++dx) {
    for (std::int64_t dy = -reach; dy <= reach; ++dy) {
      auto it = grid_.find((cx + dx) * 0x100000001LL + (cy + dy));
      if (it == grid_.end()) continue;
      for (const auto& other : it->second) {
        if (other == vid) continue;
        auto [ox, oy] = pos_.at(other);
        double ddx = ox - x, ddy = oy - y;
        if (ddx * ddx + ddy * ddy <= radius * radius) out.push_back(other);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Uuid> neighbors_within(const TraceSlot& slot, const Uuid& vid, double radius) {
  return SlotIndex(slot, radius).neighbors_within(vid, radius);
}

NeighborDistribution estimate_neighbor_distribution(const Trace& trace, double radius) {
  if (trace.empty()) throw std::invalid_argument("empty trace");
  std::vector<std::uint64_t> counts;
  std::uint64_t samples = 0;
  for (const auto& slot : trace) {
    SlotIndex index(slot, radius);
    for (const auto& e : slot.entries) {
      auto n = index.neighbors_within(e.vid, radius).size();
      if (counts.size() <= n) counts.resize(n + 1, 0);
      ++counts[n];
      ++samples;
    }
  }
  NeighborDistribution dist;
  dist.p.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    dist.p[i] = static_cast<double>(counts[i]) / static_cast<double>(samples);
  dist.max_n = static_cast<int>(counts.size()) - 1;
  return dist;
}

std::string distribution_csv(const NeighborDistribution& dist) {
  std::ostringstream out;
  out << "n,probability\n";
  char num[64];
  for (std::size_t n = 0; n < dist.p.size(); ++n) {
    std::snprintf(num, sizeof num, "%.17g", dist.p[n]);
    out << n << ',' << num << '\n';
  }
  return out.str();
}

std::unordered_map<Uuid, Lifetime> lifetimes(const Trace& trace) {
  std::unordered_map<Uuid, Lifetime> out;
  for (const auto& slot : trace) {
    for (const auto& e : slot.entries) {
      auto [it, fresh] = out.try_emplace(e.vid, Lifetime{slot.t, slot.t});
      if (!fresh) it->second.last = slot.t;
    }
  }
  return out;
}

}  // namespace cats::mobility
