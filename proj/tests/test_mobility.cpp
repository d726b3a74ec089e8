#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "cats/mobility.hpp"

using namespace cats;
using namespace cats::mobility;

TEST_CASE("parse_trace on a well-formed file") {
  std::string csv =
      "t,vid,x,y\n"
      "0," + Uuid::from_u64(1).to_string() + ",1.5,2.5\n"
      "0," + Uuid::from_u64(2).to_string() + ",3,4\n"
      "0," + Uuid::from_u64(3).to_string() + ",5,6\n";
  auto trace = parse_trace(csv);
  REQUIRE(trace.size() == 1);
  CHECK(trace[0].t == 0);
  CHECK(trace[0].entries.size() == 3);
  CHECK(trace[0].entries[0].x == 1.5);
}

TEST_CASE("parse_trace errors") {
  CHECK_THROWS_AS(parse_trace(""), ParseError);
  CHECK_THROWS_AS(parse_trace("oops\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("t,vid,x,y\n0,1,notanumber,2\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("t,vid,x,y\n0,1,1\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("t,vid,x,y\n0,1,1,1\n0,1,2,2\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("t,vid,x,y\n5,1,0,0\n4,1,0,0\n"), NonMonotoneTime);
  // Error reports a line number.
  try {
    parse_trace("t,vid,x,y\n0,1,1,1\n0,2,x,1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }
}

TEST_CASE("trace round trip: write(load(x)) == x for canonical CSV") {
  SyntheticParams p;
  p.seed = 3;
  p.n_vehicles = 20;
  p.duration = 30.0;
  auto trace = generate_synthetic(p);
  auto csv = write_trace(trace);
  CHECK(write_trace(parse_trace(csv)) == csv);
  CHECK(parse_trace(csv) == trace);
}

TEST_CASE("presence gaps keep the vehicle out of intermediate slots") {
  std::string v1 = Uuid::from_u64(1).to_string(), v2 = Uuid::from_u64(2).to_string();
  std::string csv = "t,vid,x,y\n"
                    "0," + v1 + ",0,0\n"
                    "0," + v2 + ",1,1\n"
                    "1," + v2 + ",1,1\n"
                    "2," + v1 + ",0,0\n"
                    "2," + v2 + ",1,1\n";
  auto trace = parse_trace(csv);
  REQUIRE(trace.size() == 3);
  SlotIndex idx(trace[1], 400.0);
  CHECK_FALSE(idx.contains(Uuid::from_u64(1)));
  CHECK_THROWS_AS(idx.neighbors_within(Uuid::from_u64(1), 400.0), VehicleAbsent);
  auto life = lifetimes(trace);
  CHECK(life.at(Uuid::from_u64(1)).first == 0);
  CHECK(life.at(Uuid::from_u64(1)).last == 2);
}

TEST_CASE("synthetic generator determinism") {
  SyntheticParams p;
  p.seed = 42;
  p.n_vehicles = 50;
  p.duration = 60.0;
  auto a = generate_synthetic(p);
  auto b = generate_synthetic(p);
  CHECK(write_trace(a) == write_trace(b));
  p.seed = 43;
  CHECK(write_trace(generate_synthetic(p)) != write_trace(a));
}

TEST_CASE("synthetic speed cap: no displacement above speed_max per slot") {
  SyntheticParams p;
  p.seed = 9;
  p.n_vehicles = 40;
  p.duration = 120.0;
  p.speed_max = 37.8;
  auto trace = generate_synthetic(p);
  std::unordered_map<Uuid, std::pair<double, double>> prev;
  for (const auto& slot : trace) {
    for (const auto& e : slot.entries) {
      auto it = prev.find(e.vid);
      if (it != prev.end()) {
        double dx = e.x - it->second.first, dy = e.y - it->second.second;
        CHECK(std::sqrt(dx * dx + dy * dy) <= 37.8 + 1e-9);
      }
      prev[e.vid] = {e.x, e.y};
    }
  }
}

TEST_CASE("single vehicle has no neighbors") {
  SyntheticParams p;
  p.n_vehicles = 1;
  p.duration = 10.0;
  auto trace = generate_synthetic(p);
  for (const auto& slot : trace)
    CHECK(neighbors_within(slot, slot.entries[0].vid, 400.0).empty());
  auto dist = estimate_neighbor_distribution(trace, 400.0);
  REQUIRE(dist.p.size() == 1);
  CHECK(dist.p[0] == 1.0);
}

TEST_CASE("radius boundary") {
  TraceSlot slot;
  slot.t = 0;
  slot.entries = {{Uuid::from_u64(1), 0.0, 0.0}, {Uuid::from_u64(2), 399.0, 0.0}};
  auto n1 = neighbors_within(slot, Uuid::from_u64(1), 400.0);
  auto n2 = neighbors_within(slot, Uuid::from_u64(2), 400.0);
  REQUIRE(n1.size() == 1);
  CHECK(n1[0] == Uuid::from_u64(2));
  REQUIRE(n2.size() == 1);

  slot.entries[1].x = 401.0;
  CHECK(neighbors_within(slot, Uuid::from_u64(1), 400.0).empty());
}

TEST_CASE("spatial index equals brute-force oracle on 1000 random vehicles") {
  std::mt19937_64 rng(77);
  TraceSlot slot;
  slot.t = 0;
  for (int i = 0; i < 1000; ++i) {
    double x = static_cast<double>(rng() % 500000) / 100.0;
    double y = static_cast<double>(rng() % 500000) / 100.0;
    slot.entries.push_back({Uuid::from_u64(i + 1), x, y});
  }
  const double radius = 400.0;
  SlotIndex idx(slot, radius);
  for (const auto& e : slot.entries) {
    std::vector<Uuid> brute;
    for (const auto& o : slot.entries) {
      if (o.vid == e.vid) continue;
      double dx = o.x - e.x, dy = o.y - e.y;
      if (dx * dx + dy * dy <= radius * radius) brute.push_back(o.vid);
    }
    std::sort(brute.begin(), brute.end());
    CHECK(idx.neighbors_within(e.vid, radius) == brute);
  }
}

TEST_CASE("neighbor graph is symmetric on a synthetic trace") {
  SyntheticParams p;
  p.seed = 5;
  p.n_vehicles = 150;
  p.duration = 5.0;
  auto trace = generate_synthetic(p);
  for (const auto& slot : trace) {
    SlotIndex idx(slot, 150.0);
    for (const auto& e : slot.entries) {
      for (const auto& n : idx.neighbors_within(e.vid, 150.0)) {
        auto back = idx.neighbors_within(n, 150.0);
        CHECK(std::find(back.begin(), back.end(), e.vid) != back.end());
      }
    }
  }
}

TEST_CASE("two vehicles always in range give P(1)=1") {
  TraceSlot s0{0, {{Uuid::from_u64(1), 0, 0}, {Uuid::from_u64(2), 10, 0}}};
  TraceSlot s1{1, {{Uuid::from_u64(1), 0, 0}, {Uuid::from_u64(2), 12, 0}}};
  auto dist = estimate_neighbor_distribution({s0, s1}, 400.0);
  REQUIRE(dist.max_n == 1);
  CHECK(dist.p[0] == 0.0);
  CHECK(dist.p[1] == 1.0);
}

TEST_CASE("neighbor distribution normalizes and exports CSV") {
  SyntheticParams p;
  p.seed = 11;
  p.n_vehicles = 80;
  p.duration = 20.0;
  auto dist = estimate_neighbor_distribution(generate_synthetic(p), 200.0);
  double sum = 0.0;
  for (double v : dist.p) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  auto csv = distribution_csv(dist);
  CHECK(csv.rfind("n,probability\n", 0) == 0);
}
