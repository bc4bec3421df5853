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
//
// JSON serialization: canonical case documents, bid-profile documents, and
// report documents (dispatch, VCG, ratio, core, bounds). Field order is
// fixed so serialize -> parse -> serialize round-trips byte-identically.

#ifndef SUPERMOD_IO_HPP
#define SUPERMOD_IO_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "supermod/cases.hpp"
#include "supermod/coalition.hpp"
#include "supermod/dispatch.hpp"
#include "supermod/market.hpp"
#include "supermod/setfunc.hpp"
#include "supermod/vcg.hpp"

namespace supermod {

using Json = nlohmann::ordered_json;

inline constexpr const char* kCaseSchemaVersion = "1";
inline constexpr const char* kReportSchemaVersion = "1";

// ---------------------------------------------------------------------------
// Bid functions

inline Json bid_to_json(const BidFunction& f) {
  Json j;
  if (auto* b = std::get_if<BlockBid>(&f.curve)) {
    j["kind"] = "block";
    j["quantity_mw"] = b->quantity_mw;
    j["price"] = b->price;
  } else if (auto* m = std::get_if<MenuBid>(&f.curve)) {
    j["kind"] = "menu";
    Json pts = Json::array();
    for (const auto& [q, c] : m->points) pts.push_back(Json::array({q, c}));
    j["points"] = std::move(pts);
  } else if (auto* p = std::get_if<PiecewiseLinearBid>(&f.curve)) {
    j["kind"] = "piecewise_linear";
    Json bps = Json::array();
    for (const auto& [q, c] : p->breakpoints) bps.push_back(Json::array({q, c}));
    j["breakpoints"] = std::move(bps);
  } else if (auto* q = std::get_if<QuadraticBid>(&f.curve)) {
    j["kind"] = "quadratic";
    j["a"] = q->a;
    j["b"] = q->b;
    j["cap_mw"] = q->cap_mw;
  } else {
    const auto& pq = std::get<PiecewiseQuadraticBid>(f.curve);
    j["kind"] = "piecewise_quadratic";
    Json segs = Json::array();
    for (const auto& s : pq.segments)
      segs.push_back(Json::array({s.len, s.lin, s.quad}));
    j["segments"] = std::move(segs);
  }
  return j;
}

inline BidFunction bid_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "block")
    return BidFunction::block(j.at("quantity_mw").get<double>(),
                              j.at("price").get<double>());
  if (kind == "menu") {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : j.at("points"))
      pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return BidFunction::menu(std::move(pts));
  }
  if (kind == "piecewise_linear") {
    std::vector<std::pair<double, double>> bps;
    for (const auto& p : j.at("breakpoints"))
      bps.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return BidFunction::piecewise(std::move(bps));
  }
  if (kind == "quadratic")
    return BidFunction::quadratic(j.at("a").get<double>(), j.at("b").get<double>(),
                                  j.at("cap_mw").get<double>());
  if (kind == "piecewise_quadratic") {
    std::vector<PiecewiseQuadraticBid::Segment> segs;
    for (const auto& s : j.at("segments"))
      segs.push_back({s.at(0).get<double>(), s.at(1).get<double>(),
                      s.at(2).get<double>()});
    return BidFunction::piecewise_quadratic(std::move(segs));
  }
  throw DomainError("unknown bid kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Case documents

inline Json instance_to_json(const MarketInstance& inst) {
  Json j;
  j["meta"]["schema"] = kCaseSchemaVersion;
  j["meta"]["name"] = inst.name;
  j["meta"]["types"] = inst.types;
  j["meta"]["base_mva"] = inst.network.base_mva;
  j["meta"]["reference_bus"] = inst.network.reference_bus;

  Json buses = Json::array();
  for (const auto& b : inst.network.buses) {
    Json jb;
    jb["id"] = b.id;
    jb["demand_mw"] = b.demand_mw;
    buses.push_back(std::move(jb));
  }
  j["buses"] = std::move(buses);

  Json lines = Json::array();
  for (const auto& l : inst.network.lines) {
    Json jl;
    jl["from"] = l.from;
    jl["to"] = l.to;
    jl["susceptance"] = l.susceptance;
    jl["limit_mw"] = l.limit_mw;
    lines.push_back(std::move(jl));
  }
  j["lines"] = std::move(lines);

  Json bidders = Json::array();
  for (const auto& b : inst.bidders) {
    Json jb;
    jb["id"] = b.id;
    jb["bus"] = b.bus;
    jb["type"] = b.type;
    if (b.owner) jb["owner"] = *b.owner;
    jb["true_cost"] = bid_to_json(b.true_cost);
    bidders.push_back(std::move(jb));
  }
  j["bidders"] = std::move(bidders);

  Json dl;
  Json on_alloc = Json::object();
  for (const auto& [id, c] : inst.d_linear.on_allocation)
    on_alloc[std::to_string(id)] = c;
  Json on_angle = Json::object();
  for (const auto& [id, c] : inst.d_linear.on_angle) on_angle[std::to_string(id)] = c;
  dl["on_allocation"] = std::move(on_alloc);
  dl["on_angle"] = std::move(on_angle);
  j["d_linear"] = std::move(dl);
  return j;
}

inline MarketInstance instance_from_json(const Json& j) {
  MarketInstance inst;
  const Json& meta = j.at("meta");
  inst.name = meta.at("name").get<std::string>();
  inst.types = meta.at("types").get<int>();
  inst.network.base_mva = meta.at("base_mva").get<double>();
  inst.network.reference_bus = meta.at("reference_bus").get<BusId>();
  for (const auto& jb : j.at("buses"))
    inst.network.buses.push_back(
        Bus{jb.at("id").get<BusId>(), jb.at("demand_mw").get<double>()});
  for (const auto& jl : j.at("lines"))
    inst.network.lines.push_back(Line{jl.at("from").get<BusId>(),
                                      jl.at("to").get<BusId>(),
                                      jl.at("susceptance").get<double>(),
                                      jl.at("limit_mw").get<double>()});
  for (const auto& jb : j.at("bidders")) {
    Bidder b;
    b.id = jb.at("id").get<BidderId>();
    b.bus = jb.at("bus").get<BusId>();
    b.type = jb.at("type").get<int>();
    if (jb.contains("owner")) b.owner = jb.at("owner").get<BidderId>();
    b.true_cost = bid_from_json(jb.at("true_cost"));
    inst.bidders.push_back(std::move(b));
  }
  const Json& dl = j.at("d_linear");
  for (const auto& [key, val] : dl.at("on_allocation").items())
    inst.d_linear.on_allocation[std::stoll(key)] = val.get<double>();
  for (const auto& [key, val] : dl.at("on_angle").items())
    inst.d_linear.on_angle[std::stoll(key)] = val.get<double>();
  return inst;
}

inline std::string write_case(const MarketInstance& inst) {
  return instance_to_json(inst).dump(2) + "\n";
}

inline MarketInstance read_case(const std::string& text) {
  return instance_from_json(Json::parse(text));
}

// ---------------------------------------------------------------------------
// Bid-profile documents

inline Json profile_to_json(const BidProfile& profile) {
  Json j;
  j["schema"] = kCaseSchemaVersion;
  j["label"] = profile.label;
  Json bids = Json::object();
  for (const auto& [id, f] : profile.bids) bids[std::to_string(id)] = bid_to_json(f);
  j["bids"] = std::move(bids);
  return j;
}

inline BidProfile profile_from_json(const Json& j) {
  BidProfile p;
  p.label = j.at("label").get<std::string>();
  for (const auto& [key, val] : j.at("bids").items())
    p.bids[std::stoll(key)] = bid_from_json(val);
  return p;
}

inline std::string write_profile(const BidProfile& p) {
  return profile_to_json(p).dump(2) + "\n";
}

inline BidProfile read_profile(const std::string& text) {
  return profile_from_json(Json::parse(text));
}

// ---------------------------------------------------------------------------
// Report fragments

inline Json set_to_json(BidderSet s, const MarketInstance& inst) {
  Json ids = Json::array();
  for (int pos : s.positions()) ids.push_back(inst.bidders[pos].id);
  return ids;
}

inline Json dispatch_to_json(const DispatchResult& r) {
  Json j;
  j["status"] = r.status == DispatchStatus::Optimal ? "optimal" : "infeasible";
  if (r.status != DispatchStatus::Optimal) return j;
  j["objective"] = r.objective;
  j["duality_gap"] = r.duality_gap;
  Json alloc = Json::object();
  for (const auto& [id, x] : r.allocation) alloc[std::to_string(id)] = x;
  j["allocation_mw"] = std::move(alloc);
  Json angles = Json::object();
  for (const auto& [bus, th] : r.angles) angles[std::to_string(bus)] = th;
  j["angles_rad"] = std::move(angles);
  return j;
}

inline Json vcg_to_json(const VcgOutcome& o) {
  Json j;
  j["j_full"] = o.j_full;
  Json pay = Json::object(), util = Json::object(), jm = Json::object();
  for (const auto& [id, p] : o.payments) pay[std::to_string(id)] = p;
  for (const auto& [id, u] : o.utilities) util[std::to_string(id)] = u;
  for (const auto& [id, v] : o.j_minus) jm[std::to_string(id)] = v;
  j["payments"] = std::move(pay);
  j["utilities"] = std::move(util);
  j["j_minus"] = std::move(jm);
  j["operator_utility"] = o.operator_utility;
  return j;
}

inline Json ratio_to_json(const RatioReport& r, const MarketInstance& inst) {
  Json j;
  j["gamma"] = r.gamma;
  j["method"] = r.method == RatioMethod::Exhaustive ? "exhaustive"
                                                    : "constraint_generation";
  j["k_feas"] = r.k_feas;
  j["lower_bound"] = r.lower_bound;
  j["upper_estimate"] = r.upper_estimate;
  j["evaluations_used"] = r.evaluations_used;
  j["cg_iterations"] = r.cg_iterations;
  Json ws = Json::array();
  for (const auto& w : r.witnesses) {
    Json jw;
    jw["S"] = set_to_json(w.S, inst);
    jw["K"] = set_to_json(w.K, inst);
    jw["numerator"] = w.numerator;
    jw["denominator"] = w.denominator;
    jw["ratio"] = w.ratio;
    ws.push_back(std::move(jw));
  }
  j["witnesses"] = std::move(ws);
  return j;
}

inline Json core_to_json(const CoreCheck& c, const MarketInstance& inst) {
  Json j;
  j["in_core"] = c.in_core;
  j["equality_residual"] = c.equality_residual;
  Json tight = Json::array();
  for (const auto& [s, slack] : c.blocking) {
    Json t;
    t["S"] = set_to_json(s, inst);
    t["slack"] = slack;
    tight.push_back(std::move(t));
  }
  j["tight_or_violated"] = std::move(tight);
  return j;
}

inline Json bound_to_json(const ManipulationBound& b, const MarketInstance& inst) {
  Json j;
  j["kind"] = b.kind == ManipulationKind::Collusion ? "collusion" : "shill";
  if (b.kind == ManipulationKind::Shill) j["owner"] = b.owner;
  j["actors"] = set_to_json(b.actor, inst);
  j["gamma"] = b.gamma;
  j["bound_worstcase"] = b.bound_worstcase;
  if (b.bound_specific) j["bound_specific"] = *b.bound_specific;
  if (b.achieved) j["achieved"] = *b.achieved;
  return j;
}

}  // namespace supermod

#endif  // SUPERMOD_IO_HPP
