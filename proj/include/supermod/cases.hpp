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
// Instance library: the worked single-bus block-bid example, a MATPOWER
// case-format parser for the IEEE test systems, case overrides (line limits,
// added bidders, demand scaling), and seeded random bid samplers.

#ifndef SUPERMOD_CASES_HPP
#define SUPERMOD_CASES_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "supermod/market.hpp"
#include "supermod/rng.hpp"

namespace supermod {

struct ParseError : std::runtime_error {
  int line = 0;
  int column = 0;
  ParseError(const std::string& msg, int line_, int column_)
      : std::runtime_error(msg + " at line " + std::to_string(line_) + ", column " +
                           std::to_string(column_)),
        line(line_),
        column(column_) {}
};

struct UnsupportedCost : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Single-bus market procuring 800 MW from three block bidders: one 800 MW
/// block at $600 against two 400 MW blocks at $300 + epsilon each.
inline std::pair<MarketInstance, BidProfile> simple_example(double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  MarketInstance inst;
  inst.name = "simple-800mw";
  inst.network = single_bus_network(800.0);
  Bidder b1{1, 1, BidFunction::block(800.0, 600.0), 1, std::nullopt};
  Bidder b2{2, 1, BidFunction::block(400.0, 300.0 + epsilon), 1, std::nullopt};
  Bidder b3{3, 1, BidFunction::block(400.0, 300.0 + epsilon), 1, std::nullopt};
  inst.bidders = {b1, b2, b3};
  return {inst, truthful_profile(inst)};
}

// ---------------------------------------------------------------------------
// MATPOWER case text format

struct MatpowerCase {
  MarketInstance instance;
  std::vector<std::string> warnings;
};

namespace cases_detail {

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;
  int line = 1;
  int column = 1;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  void advance() {
    if (text[pos] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
    ++pos;
  }
  void skip_space_and_comments() {
    while (!done()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == ';') {
        advance();
      } else if (c == '%') {
        while (!done() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }
};

inline double read_number(Cursor& cur) {
  cur.skip_space_and_comments();
  int line = cur.line, col = cur.column;
  std::size_t start = cur.pos;
  while (!cur.done()) {
    char c = cur.peek();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
        c == '.' || c == 'e' || c == 'E') {
      cur.advance();
    } else {
      break;
    }
  }
  if (cur.pos == start) throw ParseError("expected a number", line, col);
  try {
    return std::stod(cur.text.substr(start, cur.pos - start));
  } catch (const std::exception&) {
    throw ParseError("malformed number", line, col);
  }
}

/// Reads the matrix body following `mpc.<name> = [`; rows are newline- or
/// semicolon-terminated lists of numbers.
inline std::vector<std::vector<double>> read_matrix(Cursor& cur) {
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  cur.skip_space_and_comments();
  while (!cur.done() && cur.peek() != ']') {
    int line = cur.line;
    row.push_back(read_number(cur));
    // consume inline separators without crossing a row boundary
    while (!cur.done()) {
      char c = cur.peek();
      if (c == ' ' || c == '\t' || c == ',') {
        cur.advance();
      } else if (c == '%') {
        while (!cur.done() && cur.peek() != '\n') cur.advance();
      } else {
        break;
      }
    }
    if (cur.done()) throw ParseError("unterminated matrix", line, cur.column);
    if (cur.peek() == ';' || cur.peek() == '\n') {
      rows.push_back(std::move(row));
      row.clear();
      cur.skip_space_and_comments();
    }
  }
  if (cur.done()) throw ParseError("unterminated matrix", cur.line, cur.column);
  cur.advance();  // ']'
  if (!row.empty()) rows.push_back(std::move(row));
  return rows;
}

inline double require(const std::vector<double>& row, std::size_t idx,
                      const char* what, int line) {
  if (idx >= row.size()) throw ParseError(std::string("missing column ") + what, line, 1);
  return row[idx];
}

}  // namespace cases_detail

/// Parses a MATPOWER case document (bus, branch, gen, gencost matrices plus
/// baseMVA). Generators become quadratic bidders; constant cost terms are
/// dropped and PMIN lower bounds relaxed to zero, both noted in warnings.
inline MatpowerCase parse_matpower_case(const std::string& text) {
  using cases_detail::Cursor;
  Cursor cur{text};
  double base_mva = 100.0;
  std::vector<std::vector<double>> bus, branch, gen, gencost;

  while (!cur.done()) {
    cur.skip_space_and_comments();
    if (cur.done()) break;
    std::size_t start = cur.pos;
    int line = cur.line, col = cur.column;
    if (text.compare(cur.pos, 8, "function") == 0) {
      while (!cur.done() && cur.peek() != '\n') cur.advance();
      continue;
    }
    while (!cur.done() && cur.peek() != '\n' && cur.peek() != '=') cur.advance();
    std::string head = text.substr(start, cur.pos - start);
    while (!head.empty() && std::isspace(static_cast<unsigned char>(head.back())))
      head.pop_back();
    if (cur.done() || cur.peek() != '=') continue;  // e.g. "function mpc = case14"
    cur.advance();  // '='
    cur.skip_space_and_comments();
    if (head == "mpc.baseMVA") {
      base_mva = cases_detail::read_number(cur);
    } else if (head == "mpc.bus" || head == "mpc.branch" || head == "mpc.gen" ||
               head == "mpc.gencost") {
      if (cur.done() || cur.peek() != '[')
        throw ParseError("expected '[' after " + head, cur.line, cur.column);
      cur.advance();
      auto rows = cases_detail::read_matrix(cur);
      if (head == "mpc.bus")
        bus = std::move(rows);
      else if (head == "mpc.branch")
        branch = std::move(rows);
      else if (head == "mpc.gen")
        gen = std::move(rows);
      else
        gencost = std::move(rows);
    } else if (head.rfind("mpc.", 0) == 0) {
      // unknown field: skip its value (scalar, string, or matrix)
      if (!cur.done() && cur.peek() == '[') {
        cur.advance();
        cases_detail::read_matrix(cur);
      } else {
        while (!cur.done() && cur.peek() != ';' && cur.peek() != '\n') cur.advance();
      }
    } else {
      throw ParseError("unrecognized statement '" + head + "'", line, col);
    }
  }

  if (bus.empty()) throw ParseError("missing mpc.bus matrix", 1, 1);
  if (branch.empty()) throw ParseError("missing mpc.branch matrix", 1, 1);
  if (gen.empty()) throw ParseError("missing mpc.gen matrix", 1, 1);
  if (gencost.size() != gen.size())
    throw ParseError("gencost rows do not match gen rows", 1, 1);

  MatpowerCase out;
  MarketInstance& inst = out.instance;
  inst.network.base_mva = base_mva;

  for (const auto& row : bus) {
    Bus b;
    b.id = static_cast<BusId>(cases_detail::require(row, 0, "BUS_I", 1));
    b.demand_mw = cases_detail::require(row, 2, "PD", 1);
    if (b.demand_mw < 0) b.demand_mw = 0;  // negative loads dropped
    int bus_type = static_cast<int>(cases_detail::require(row, 1, "BUS_TYPE", 1));
    if (bus_type == 3) inst.network.reference_bus = b.id;
    inst.network.buses.push_back(b);
  }
  if (inst.network.reference_bus == 0)
    inst.network.reference_bus = inst.network.buses.front().id;

  for (const auto& row : branch) {
    if (row.size() >= 11 && row[10] == 0.0) continue;  // out of service
    Line ln;
    ln.from = static_cast<BusId>(cases_detail::require(row, 0, "F_BUS", 1));
    ln.to = static_cast<BusId>(cases_detail::require(row, 1, "T_BUS", 1));
    double x = cases_detail::require(row, 3, "BR_X", 1);
    if (x == 0.0) throw ParseError("branch with zero reactance", 1, 1);
    ln.susceptance = 1.0 / x;
    ln.limit_mw = row.size() > 5 ? row[5] : 0.0;  // RATE_A, 0 = unlimited
    inst.network.lines.push_back(ln);
  }

  for (std::size_t g = 0; g < gen.size(); ++g) {
    const auto& grow = gen[g];
    const auto& crow = gencost[g];
    if (grow.size() >= 8 && grow[7] == 0.0) continue;  // out of service
    int model = static_cast<int>(cases_detail::require(crow, 0, "MODEL", 1));
    if (model != 2)
      throw UnsupportedCost("gencost model " + std::to_string(model) +
                            " is not polynomial");
    int ncost = static_cast<int>(cases_detail::require(crow, 3, "NCOST", 1));
    if (ncost < 1 || ncost > 3)
      throw UnsupportedCost("polynomial degree " + std::to_string(ncost - 1) +
                            " is not supported");
    double c2 = 0.0, c1 = 0.0, c0 = 0.0;
    if (ncost == 3) {
      c2 = cases_detail::require(crow, 4, "c2", 1);
      c1 = cases_detail::require(crow, 5, "c1", 1);
      c0 = cases_detail::require(crow, 6, "c0", 1);
    } else if (ncost == 2) {
      c1 = cases_detail::require(crow, 4, "c1", 1);
      c0 = cases_detail::require(crow, 5, "c0", 1);
    } else {
      c0 = cases_detail::require(crow, 4, "c0", 1);
    }
    Bidder b;
    b.id = static_cast<BidderId>(g + 1);
    b.bus = static_cast<BusId>(cases_detail::require(grow, 0, "GEN_BUS", 1));
    double pmax = cases_detail::require(grow, 8, "PMAX", 1);
    double pmin = cases_detail::require(grow, 9, "PMIN", 1);
    if (pmin > 0)
      out.warnings.push_back("generator " + std::to_string(b.id) + ": PMIN " +
                             std::to_string(pmin) + " MW relaxed to 0");
    if (c0 != 0.0)
      out.warnings.push_back("generator " + std::to_string(b.id) +
                             ": constant cost term " + std::to_string(c0) +
                             " dropped");
    b.true_cost = BidFunction::quadratic(c2, c1, pmax);
    inst.bidders.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Overrides

struct UnknownLine : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownBus : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CaseOverride {
  std::vector<std::tuple<BusId, BusId, double>> line_limits;  // (from, to, MW)
  std::vector<Bidder> added_bidders;
  double demand_scale = 1.0;
};

inline MarketInstance apply_overrides(const MarketInstance& base,
                                      const CaseOverride& ov) {
  MarketInstance inst = base;
  for (const auto& [from, to, limit] : ov.line_limits) {
    bool found = false;
    for (auto& ln : inst.network.lines) {
      if ((ln.from == from && ln.to == to) || (ln.from == to && ln.to == from)) {
        ln.limit_mw = limit;
        found = true;
      }
    }
    if (!found)
      throw UnknownLine("no line between buses " + std::to_string(from) + " and " +
                        std::to_string(to));
  }
  for (const auto& b : ov.added_bidders) {
    if (inst.network.find_bus(b.bus) == nullptr)
      throw UnknownBus("bus " + std::to_string(b.bus) + " does not exist");
    if (inst.find_bidder(b.id) != nullptr)
      throw DomainError("bidder id " + std::to_string(b.id) + " already in use");
    inst.bidders.push_back(b);
  }
  if (ov.demand_scale != 1.0) {
    for (auto& bus : inst.network.buses) bus.demand_mw *= ov.demand_scale;
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Random bid profiles

/// Uniform sampler over quadratic bid coefficients. Bidders with discrete
/// true costs get a block of the same size at a sampled price instead.
struct BidSampler {
  double a_lo = 0.005, a_hi = 0.05;
  double b_lo = 10.0, b_hi = 40.0;
  // cap is scaled from the bidder's true capacity; collapse to 1.0/1.0 to
  // keep capacities fixed
  double cap_scale_lo = 1.0, cap_scale_hi = 1.0;
  double block_price_scale_lo = 0.5, block_price_scale_hi = 1.5;
  std::uint64_t seed = 1;
};

inline BidProfile sample_profile(const MarketInstance& instance,
                                 const BidSampler& sampler, std::uint64_t stream = 0) {
  SplitMix64 rng(sampler.seed + 0x9e3779b97f4a7c15ULL * stream);
  BidProfile profile;
  profile.label = "sampled-" + std::to_string(sampler.seed) + "-" +
                  std::to_string(stream);
  for (const auto& b : instance.bidders) {
    double cap = b.true_cost.max_quantity() *
                 rng.uniform(sampler.cap_scale_lo, sampler.cap_scale_hi);
    if (b.true_cost.is_discrete()) {
      double base_price = eval_bid(b.true_cost, b.true_cost.max_quantity());
      profile.bids[b.id] = BidFunction::block(
          b.true_cost.max_quantity(),
          base_price *
              rng.uniform(sampler.block_price_scale_lo, sampler.block_price_scale_hi));
    } else {
      profile.bids[b.id] = BidFunction::quadratic(
          rng.uniform(sampler.a_lo, sampler.a_hi),
          rng.uniform(sampler.b_lo, sampler.b_hi), cap);
    }
  }
  return profile;
}

}  // namespace supermod

#endif  // SUPERMOD_CASES_HPP
