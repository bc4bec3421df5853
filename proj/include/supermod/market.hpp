// Copyright 2026 The Supermod Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SUPERMOD_MARKET_HPP
#define SUPERMOD_MARKET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace supermod {

using BidderId = int;
using BusId = int;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// All-or-nothing offer: accepted at exactly `quantity` MW for `price` $,
/// or not at all.
struct BlockBid {
  double quantity_mw = 0.0;
  double price = 0.0;
};

/// Menu of all-or-nothing choices (quantity, price). Arises from merging
/// block bids; domain is exactly the listed quantities.
struct MenuBid {
  std::vector<std::pair<double, double>> points;  // sorted by quantity, (0,0) first
};

/// Convex piecewise-linear cost curve. Breakpoints start at (0,0), strictly
/// increasing in quantity, nondecreasing and convex in price.
struct PiecewiseLinearBid {
  std::vector<std::pair<double, double>> breakpoints;
};

/// Cost a*q^2 + b*q on [0, cap].
struct QuadraticBid {
  double a = 0.0;
  double b = 0.0;
  double cap_mw = 0.0;
};

/// Convex piecewise-quadratic curve, as consecutive segments. Segment i
/// covers `len` MW with marginal price `lin + 2*quad*s` at offset s; convex
/// when marginals are nondecreasing across segments. Produced by merging
/// quadratic bids (infimal convolution), accepted everywhere a bid is.
struct PiecewiseQuadraticBid {
  struct Segment {
    double len = 0.0;
    double lin = 0.0;
    double quad = 0.0;
  };
  std::vector<Segment> segments;
};

struct BidFunction {
  std::variant<BlockBid, MenuBid, PiecewiseLinearBid, QuadraticBid,
               PiecewiseQuadraticBid>
      curve;

  static BidFunction block(double quantity_mw, double price) {
    return BidFunction{BlockBid{quantity_mw, price}};
  }
  static BidFunction menu(std::vector<std::pair<double, double>> points) {
    return BidFunction{MenuBid{std::move(points)}};
  }
  static BidFunction piecewise(std::vector<std::pair<double, double>> bps) {
    return BidFunction{PiecewiseLinearBid{std::move(bps)}};
  }
  static BidFunction quadratic(double a, double b, double cap_mw) {
    return BidFunction{QuadraticBid{a, b, cap_mw}};
  }
  static BidFunction piecewise_quadratic(std::vector<PiecewiseQuadraticBid::Segment> segs) {
    return BidFunction{PiecewiseQuadraticBid{std::move(segs)}};
  }

  bool is_discrete() const {
    return std::holds_alternative<BlockBid>(curve) ||
           std::holds_alternative<MenuBid>(curve);
  }

  /// Largest quantity in the bid's domain.
  double max_quantity() const {
    if (auto* b = std::get_if<BlockBid>(&curve)) return b->quantity_mw;
    if (auto* m = std::get_if<MenuBid>(&curve))
      return m->points.empty() ? 0.0 : m->points.back().first;
    if (auto* p = std::get_if<PiecewiseLinearBid>(&curve))
      return p->breakpoints.empty() ? 0.0 : p->breakpoints.back().first;
    if (auto* pq = std::get_if<PiecewiseQuadraticBid>(&curve)) {
      double q = 0.0;
      for (const auto& s : pq->segments) q += s.len;
      return q;
    }
    return std::get<QuadraticBid>(curve).cap_mw;
  }
};

/// Evaluates the bid cost at quantity q. Throws DomainError when q lies
/// outside the bid's domain (beyond cap, or a fractional block/menu point).
inline double eval_bid(const BidFunction& f, double q, double tol = 1e-9) {
  if (q < -tol) throw DomainError("negative quantity");
  if (q <= tol && q >= -tol) q = 0.0;
  if (auto* b = std::get_if<BlockBid>(&f.curve)) {
    if (q == 0.0) return 0.0;
    if (std::abs(q - b->quantity_mw) <= tol) return b->price;
    throw DomainError("block bid accepts only 0 or its full quantity");
  }
  if (auto* m = std::get_if<MenuBid>(&f.curve)) {
    for (const auto& [mq, mp] : m->points)
      if (std::abs(q - mq) <= tol) return mp;
    throw DomainError("quantity not in menu");
  }
  if (auto* p = std::get_if<PiecewiseLinearBid>(&f.curve)) {
    const auto& bps = p->breakpoints;
    if (bps.empty()) {
      if (q == 0.0) return 0.0;
      throw DomainError("empty piecewise bid");
    }
    if (q > bps.back().first + tol) throw DomainError("quantity beyond curve");
    q = std::min(q, bps.back().first);
    for (std::size_t i = 1; i < bps.size(); ++i) {
      if (q <= bps[i].first + tol) {
        double q0 = bps[i - 1].first, c0 = bps[i - 1].second;
        double q1 = bps[i].first, c1 = bps[i].second;
        double t = (q - q0) / (q1 - q0);
        return c0 + t * (c1 - c0);
      }
    }
    return bps.back().second;
  }
  if (auto* pq = std::get_if<PiecewiseQuadraticBid>(&f.curve)) {
    double cost = 0.0, left = q;
    for (const auto& seg : pq->segments) {
      double s = std::min(left, seg.len);
      cost += seg.lin * s + seg.quad * s * s;
      left -= s;
      if (left <= tol) return cost;
    }
    if (left > tol) throw DomainError("quantity beyond curve");
    return cost;
  }
  const auto& quad = std::get<QuadraticBid>(f.curve);
  if (q > quad.cap_mw + tol) throw DomainError("quantity beyond cap");
  q = std::min(q, quad.cap_mw);
  return quad.a * q * q + quad.b * q;
}

struct Bidder {
  BidderId id = 0;
  BusId bus = 0;  // 0 means the single bus of a one-bus market
  BidFunction true_cost;
  int type = 1;
  /// Synthetic shill entries carry the id of the real bidder that owns them.
  std::optional<BidderId> owner;
};

struct BidProfile {
  std::map<BidderId, BidFunction> bids;
  std::string label;

  const BidFunction& at(BidderId l) const {
    auto it = bids.find(l);
    if (it == bids.end()) throw DomainError("no bid for bidder " + std::to_string(l));
    return it->second;
  }
};

struct Line {
  BusId from = 0;
  BusId to = 0;
  double susceptance = 0.0;        // p.u., 1/x
  double limit_mw = 0.0;           // <= 0 means unlimited
  bool limited() const { return limit_mw > 0.0; }
};

struct Bus {
  BusId id = 0;
  double demand_mw = 0.0;
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  BusId reference_bus = 0;
  double base_mva = 100.0;

  double total_demand() const {
    double d = 0.0;
    for (const auto& b : buses) d += b.demand_mw;
    return d;
  }
  const Bus* find_bus(BusId id) const {
    for (const auto& b : buses)
      if (b.id == id) return &b;
    return nullptr;
  }
};

/// Optional linear cost d(x, y): coefficients on bidder allocations (MW) and
/// on bus angles (rad).
struct LinearCost {
  std::map<BidderId, double> on_allocation;
  std::map<BusId, double> on_angle;

  bool empty() const { return on_allocation.empty() && on_angle.empty(); }
};

struct MarketInstance {
  std::vector<Bidder> bidders;
  Network network;   // a single-bus market is a one-bus network with no lines
  LinearCost d_linear;
  int types = 1;
  std::string name;

  const Bidder* find_bidder(BidderId id) const {
    for (const auto& b : bidders)
      if (b.id == id) return &b;
    return nullptr;
  }
  std::vector<BidderId> bidder_ids() const {
    std::vector<BidderId> out;
    out.reserve(bidders.size());
    for (const auto& b : bidders) out.push_back(b.id);
    return out;
  }
};

/// Builds a one-bus market with the given demand.
inline Network single_bus_network(double demand_mw) {
  Network n;
  n.buses.push_back(Bus{1, demand_mw});
  n.reference_bus = 1;
  return n;
}

struct Violation {
  std::string path;
  std::string message;
};

namespace detail {

inline void validate_bid(const BidFunction& f, const std::string& path,
                         std::vector<Violation>& out) {
  if (auto* b = std::get_if<BlockBid>(&f.curve)) {
    if (b->quantity_mw <= 0) out.push_back({path, "block quantity must be > 0"});
    if (b->price < 0) out.push_back({path, "block price must be >= 0"});
    return;
  }
  if (auto* m = std::get_if<MenuBid>(&f.curve)) {
    if (m->points.empty() || m->points.front() != std::pair<double, double>{0.0, 0.0})
      out.push_back({path, "menu must start at (0,0)"});
    for (std::size_t i = 1; i < m->points.size(); ++i) {
      if (m->points[i].first <= m->points[i - 1].first)
        out.push_back({path, "menu quantities must be strictly increasing"});
      if (m->points[i].second < m->points[i - 1].second)
        out.push_back({path, "menu prices must be nondecreasing"});
    }
    return;
  }
  if (auto* p = std::get_if<PiecewiseLinearBid>(&f.curve)) {
    const auto& bps = p->breakpoints;
    if (bps.empty() || bps.front() != std::pair<double, double>{0.0, 0.0}) {
      out.push_back({path, "piecewise curve must start at (0,0)"});
      return;
    }
    double prev_slope = -kInfinity;
    for (std::size_t i = 1; i < bps.size(); ++i) {
      if (bps[i].first <= bps[i - 1].first) {
        out.push_back({path, "breakpoint quantities must be strictly increasing"});
        return;
      }
      if (bps[i].second < bps[i - 1].second)
        out.push_back({path, "breakpoint prices must be nondecreasing"});
      double slope = (bps[i].second - bps[i - 1].second) /
                     (bps[i].first - bps[i - 1].first);
      if (slope < prev_slope - 1e-12)
        out.push_back({path, "non-convex bid: decreasing marginal price"});
      prev_slope = slope;
    }
    return;
  }
  if (auto* pq = std::get_if<PiecewiseQuadraticBid>(&f.curve)) {
    double prev_marginal = 0.0;
    for (const auto& seg : pq->segments) {
      if (seg.len <= 0) out.push_back({path, "segment length must be > 0"});
      if (seg.quad < 0) out.push_back({path, "segment curvature must be >= 0"});
      if (seg.lin < prev_marginal - 1e-9)
        out.push_back({path, "non-convex bid: decreasing marginal price"});
      prev_marginal = seg.lin + 2.0 * seg.quad * seg.len;
    }
    return;
  }
  const auto& q = std::get<QuadraticBid>(f.curve);
  if (q.a < 0) out.push_back({path, "quadratic coefficient a must be >= 0"});
  if (q.b < 0) out.push_back({path, "quadratic coefficient b must be >= 0"});
  if (q.cap_mw <= 0) out.push_back({path, "cap must be > 0"});
}

}  // namespace detail

/// Checks every type invariant; violations are returned as data, not thrown.
inline std::vector<Violation> validate(const MarketInstance& instance) {
  std::vector<Violation> out;
  if (instance.network.buses.empty())
    out.push_back({"network", "at least one bus required"});
  for (const auto& bus : instance.network.buses)
    if (bus.demand_mw < 0)
      out.push_back({"network.bus " + std::to_string(bus.id), "demand must be >= 0"});
  if (!instance.network.buses.empty() &&
      instance.network.find_bus(instance.network.reference_bus) == nullptr)
    out.push_back({"network.reference_bus", "reference bus does not exist"});
  for (std::size_t i = 0; i < instance.network.lines.size(); ++i) {
    const auto& ln = instance.network.lines[i];
    std::string path = "network.line " + std::to_string(i);
    if (instance.network.find_bus(ln.from) == nullptr ||
        instance.network.find_bus(ln.to) == nullptr)
      out.push_back({path, "line endpoint bus does not exist"});
    if (ln.susceptance <= 0) out.push_back({path, "susceptance must be > 0"});
  }
  // Connectivity of the network graph.
  if (!instance.network.buses.empty()) {
    std::map<BusId, std::vector<BusId>> adj;
    for (const auto& ln : instance.network.lines) {
      adj[ln.from].push_back(ln.to);
      adj[ln.to].push_back(ln.from);
    }
    std::vector<BusId> stack{instance.network.buses.front().id};
    std::map<BusId, bool> seen{{stack.front(), true}};
    while (!stack.empty()) {
      BusId b = stack.back();
      stack.pop_back();
      for (BusId n : adj[b])
        if (!seen[n]) {
          seen[n] = true;
          stack.push_back(n);
        }
    }
    for (const auto& b : instance.network.buses)
      if (!seen[b.id]) {
        out.push_back({"network", "graph is not connected"});
        break;
      }
  }
  std::map<BidderId, int> id_count;
  for (std::size_t i = 0; i < instance.bidders.size(); ++i) {
    const auto& b = instance.bidders[i];
    std::string path = "bidders[" + std::to_string(i) + "]";
    ++id_count[b.id];
    if (instance.network.find_bus(b.bus) == nullptr)
      out.push_back({path, "bidder bus does not exist"});
    if (b.type < 1 || b.type > instance.types)
      out.push_back({path, "bidder type out of range"});
    detail::validate_bid(b.true_cost, path + ".true_cost", out);
  }
  for (const auto& [id, n] : id_count)
    if (n > 1)
      out.push_back({"bidders", "duplicate bidder id " + std::to_string(id)});
  for (const auto& [id, coef] : instance.d_linear.on_allocation) {
    (void)coef;
    if (instance.find_bidder(id) == nullptr)
      out.push_back({"d_linear", "coefficient for unknown bidder " + std::to_string(id)});
  }
  for (const auto& [bus, coef] : instance.d_linear.on_angle) {
    (void)coef;
    if (instance.network.find_bus(bus) == nullptr)
      out.push_back({"d_linear", "coefficient for unknown bus " + std::to_string(bus)});
  }
  if (instance.types < 1) out.push_back({"types", "must be >= 1"});
  return out;
}

/// Truthful profile C = {c_l}.
inline BidProfile truthful_profile(const MarketInstance& instance) {
  BidProfile p;
  p.label = "truthful";
  for (const auto& b : instance.bidders) p.bids[b.id] = b.true_cost;
  return p;
}

/// Zero-price bid over the same domain as `f`.
inline BidFunction zero_bid_like(const BidFunction& f) {
  if (auto* b = std::get_if<BlockBid>(&f.curve))
    return BidFunction::block(b->quantity_mw, 0.0);
  if (auto* m = std::get_if<MenuBid>(&f.curve)) {
    auto pts = m->points;
    for (auto& [q, p] : pts) p = 0.0;
    return BidFunction::menu(std::move(pts));
  }
  if (auto* p = std::get_if<PiecewiseLinearBid>(&f.curve)) {
    double cap = p->breakpoints.empty() ? 0.0 : p->breakpoints.back().first;
    return BidFunction::piecewise({{0.0, 0.0}, {cap, 0.0}});
  }
  if (auto* pq = std::get_if<PiecewiseQuadraticBid>(&f.curve)) {
    double cap = 0.0;
    for (const auto& s : pq->segments) cap += s.len;
    return BidFunction::piecewise({{0.0, 0.0}, {cap, 0.0}});
  }
  return BidFunction::quadratic(0.0, 0.0, std::get<QuadraticBid>(f.curve).cap_mw);
}

/// Same curve with every price multiplied by `factor` (>= 0).
inline BidFunction scale_bid_price(const BidFunction& f, double factor) {
  if (auto* b = std::get_if<BlockBid>(&f.curve))
    return BidFunction::block(b->quantity_mw, b->price * factor);
  if (auto* m = std::get_if<MenuBid>(&f.curve)) {
    auto pts = m->points;
    for (auto& [q, p] : pts) p *= factor;
    return BidFunction::menu(std::move(pts));
  }
  if (auto* p = std::get_if<PiecewiseLinearBid>(&f.curve)) {
    auto bps = p->breakpoints;
    for (auto& [q, c] : bps) c *= factor;
    return BidFunction::piecewise(std::move(bps));
  }
  if (auto* pq = std::get_if<PiecewiseQuadraticBid>(&f.curve)) {
    auto segs = pq->segments;
    for (auto& s : segs) {
      s.lin *= factor;
      s.quad *= factor;
    }
    return BidFunction::piecewise_quadratic(std::move(segs));
  }
  const auto& q = std::get<QuadraticBid>(f.curve);
  return BidFunction::quadratic(q.a * factor, q.b * factor, q.cap_mw);
}

/// Shrinks a continuous bid's domain to `factor` of its cap; discrete bids
/// are returned unchanged (their quantities are not divisible).
inline BidFunction truncate_bid(const BidFunction& f, double factor) {
  if (auto* p = std::get_if<PiecewiseLinearBid>(&f.curve)) {
    double cap = p->breakpoints.back().first * factor;
    std::vector<std::pair<double, double>> bps;
    for (const auto& bp : p->breakpoints) {
      if (bp.first < cap - 1e-12) bps.push_back(bp);
      else break;
    }
    BidFunction tmp{*p};
    bps.emplace_back(cap, eval_bid(tmp, cap));
    return BidFunction::piecewise(std::move(bps));
  }
  if (auto* q = std::get_if<QuadraticBid>(&f.curve))
    return BidFunction::quadratic(q->a, q->b, q->cap_mw * factor);
  return f;
}

}  // namespace supermod

#endif  // SUPERMOD_MARKET_HPP
