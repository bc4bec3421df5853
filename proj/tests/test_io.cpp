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

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "supermod/io.hpp"

using namespace supermod;

namespace {

bool same_cost(const BidFunction& a, const BidFunction& b) {
  double cap = a.max_quantity();
  if (std::abs(cap - b.max_quantity()) > 1e-12) return false;
  if (a.is_discrete() != b.is_discrete()) return false;
  if (a.is_discrete())
    return eval_bid(a, cap) == eval_bid(b, cap);
  for (double f : {0.2, 0.5, 0.9, 1.0})
    if (std::abs(eval_bid(a, cap * f) - eval_bid(b, cap * f)) > 1e-9) return false;
  return true;
}

}  // namespace

TEST_CASE("every bid kind round-trips through JSON") {
  std::vector<BidFunction> bids = {
      BidFunction::block(400.0, 300.0),
      BidFunction::menu({{0.0, 0.0}, {100.0, 40.0}, {300.0, 150.0}}),
      BidFunction::piecewise({{0.0, 0.0}, {50.0, 100.0}, {150.0, 400.0}}),
      BidFunction::quadratic(0.01, 20.0, 100.0),
      BidFunction::piecewise_quadratic({{50.0, 10.0, 0.1}, {30.0, 20.0, 0.0}})};
  for (const auto& f : bids) {
    BidFunction g = bid_from_json(bid_to_json(f));
    CHECK(same_cost(f, g));
    CHECK(bid_to_json(g) == bid_to_json(f));
  }
  Json bad;
  bad["kind"] = "mystery";
  CHECK_THROWS_AS(bid_from_json(bad), DomainError);
}

TEST_CASE("case documents round-trip byte-identically") {
  auto [simple, truth] = simple_example(0.01);
  MarketInstance networked = testref::random_networked_instance(3, 4);
  networked.d_linear.on_allocation[1] = 0.25;
  networked.d_linear.on_angle[2] = -1.5;
  for (const MarketInstance& inst : {simple, networked}) {
    std::string once = write_case(inst);
    std::string twice = write_case(read_case(once));
    CHECK(once == twice);
  }
}

TEST_CASE("parsed MATPOWER cases survive the canonical format") {
  auto parsed = parse_matpower_case(testref::slurp(testref::data_path("case14.m")));
  std::string once = write_case(parsed.instance);
  MarketInstance back = read_case(once);
  CHECK(write_case(back) == once);
  CHECK(back.network.buses.size() == 14);
  CHECK(back.bidders.size() == 5);
  CHECK(validate(back).empty());
}

TEST_CASE("bid profiles round-trip") {
  auto [inst, truth] = simple_example(0.01);
  truth.label = "example";
  std::string once = write_profile(truth);
  BidProfile back = read_profile(once);
  CHECK(back.label == "example");
  CHECK(write_profile(back) == once);
  CHECK(eval_bid(back.at(1), 800.0) == 600.0);
}

TEST_CASE("owner tags survive serialization") {
  MarketInstance inst;
  inst.network = single_bus_network(100.0);
  Bidder shill{2, 1, BidFunction::quadratic(0.01, 5.0, 60.0)};
  shill.owner = 7;
  inst.bidders = {Bidder{1, 1, BidFunction::block(100.0, 10.0)}, shill};
  MarketInstance back = read_case(write_case(inst));
  REQUIRE(back.bidders.size() == 2);
  CHECK_FALSE(back.bidders[0].owner.has_value());
  REQUIRE(back.bidders[1].owner.has_value());
  CHECK(*back.bidders[1].owner == 7);
}

TEST_CASE("report fragments expose bidder ids, not positions") {
  MarketInstance inst;
  inst.network = single_bus_network(100.0);
  inst.bidders = {Bidder{10, 1, BidFunction::block(100.0, 10.0)},
                  Bidder{20, 1, BidFunction::block(100.0, 12.0)}};
  Json ids = set_to_json(BidderSet::single(1), inst);
  REQUIRE(ids.size() == 1);
  CHECK(ids[0].get<int>() == 20);
}
