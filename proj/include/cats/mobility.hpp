#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cats/report.hpp"
#include "cats/uuid.hpp"

namespace cats::mobility {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line(line) {}
  std::size_t line;
};
struct NonMonotoneTime : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VehicleAbsent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TraceEntry {
  Uuid vid;
  double x = 0.0;
  double y = 0.0;
  bool operator==(const TraceEntry&) const = default;
};

struct TraceSlot {
  std::int64_t t = 0;
  std::vector<TraceEntry> entries;
  bool operator==(const TraceSlot&) const = default;
};

using Trace = std::vector<TraceSlot>;

// CSV ingestion: header `t,vid,x,y`. vid is a canonical UUID string;
// bare integers are accepted and mapped through Uuid::from_u64.
Trace load_trace(const std::string& path);
Trace parse_trace(const std::string& csv_text);
std::string write_trace(const Trace& trace);  // canonical CSV

struct SyntheticParams {
  std::uint64_t seed = 1;
  int n_vehicles = 100;
  double area = 2000.0;  // square side, meters
  Seconds duration = 600.0;
  double speed_min = 5.0;
  double speed_max = 37.8;  // 136 km/h
  double grid_spacing = 100.0;
};

// Deterministic grid-road traffic. Same params -> byte-identical trace.
Trace generate_synthetic(const SyntheticParams& params);

// Exact disk query over a uniform spatial hash (cell size = radius).
class SlotIndex {
 public:
  SlotIndex(const TraceSlot& slot, double cell);

  bool contains(const Uuid& vid) const { return pos_.contains(vid); }
  std::pair<double, double> position(const Uuid& vid) const;  // throws VehicleAbsent

  // All other vehicles within `radius` (inclusive) of vid.
  std::vector<Uuid> neighbors_within(const Uuid& vid, double radius) const;
  std::size_t size() const { return pos_.size(); }

 private:
  double cell_;
  std::unordered_map<Uuid, std::pair<double, double>> pos_;
  std::unordered_map<std::int64_t, std::vector<Uuid>> grid_;
  std::int64_t key(double x, double y) const;
};

std::vector<Uuid> neighbors_within(const TraceSlot& slot, const Uuid& vid, double radius);

struct NeighborDistribution {
  std::vector<double> p;  // p[n] = P(n neighbors); sums to 1
  int max_n = 0;
};

NeighborDistribution estimate_neighbor_distribution(const Trace& trace, double radius);

// CSV export: header "n,probability".
std::string distribution_csv(const NeighborDistribution& dist);

// First/last slot a vid appears in; a vehicle's lifetime.
struct Lifetime {
  std::int64_t first = 0;
  std::int64_t last = 0;
};
std::unordered_map<Uuid, Lifetime> lifetimes(const Trace& trace);

}  // namespace cats::mobility
