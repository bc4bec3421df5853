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
// Command-line driver: dispatch evaluation, full market audits, and
// supermodularity-ratio computation over case files.

#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "supermod/cases.hpp"
#include "supermod/coalition.hpp"
#include "supermod/dispatch.hpp"
#include "supermod/io.hpp"
#include "supermod/market.hpp"
#include "supermod/setfunc.hpp"
#include "supermod/vcg.hpp"

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

supermod::MarketInstance load_case(const std::string& path,
                                   std::vector<std::string>* warnings) {
  std::string text = slurp(path);
  if (path.size() > 2 && path.substr(path.size() - 2) == ".m") {
    auto parsed = supermod::parse_matpower_case(text);
    if (warnings) *warnings = parsed.warnings;
    return parsed.instance;
  }
  return supermod::read_case(text);
}

supermod::BidProfile load_profile(const std::optional<std::string>& path,
                                  const supermod::MarketInstance& inst) {
  if (!path) return supermod::truthful_profile(inst);
  return supermod::read_profile(slurp(*path));
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

supermod::BidderSet parse_set(const std::string& spec,
                              const supermod::MarketInstance& inst) {
  supermod::BidderSet out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    supermod::BidderId id = std::stoi(tok);
    bool found = false;
    for (std::size_t i = 0; i < inst.bidders.size(); ++i) {
      if (inst.bidders[i].id == id) {
        out = out.with(static_cast<int>(i));
        found = true;
      }
    }
    if (!found) throw std::runtime_error("unknown bidder id " + tok);
  }
  return out;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     t0)
        .count();
  }
};

void write_csv(const std::string& dir, const std::string& name,
               const std::string& content) {
  std::ofstream f(dir + "/" + name);
  if (!f) throw std::runtime_error("cannot write " + dir + "/" + name);
  f << content;
}

int cmd_dispatch(const std::string& case_path, const std::optional<std::string>& bids,
                 const std::optional<std::string>& active_spec) {
  auto inst = load_case(case_path, nullptr);
  auto profile = load_profile(bids, inst);
  supermod::BidderSet active =
      active_spec ? parse_set(*active_spec, inst) : supermod::all_bidders(inst);
  auto res = supermod::solve(inst, profile, active);
  if (res.status != supermod::DispatchStatus::Optimal) {
    std::cout << "infeasible\n";
    return 2;
  }
  supermod::Json j = supermod::dispatch_to_json(res);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_ratio(const std::string& case_path, const std::optional<std::string>& bids,
              int samples, std::uint64_t seed, const std::string& method) {
  auto inst = load_case(case_path, nullptr);
  supermod::SetFuncConfig cfg;
  cfg.sample_seed = seed;
  supermod::RatioReport report;
  if (bids || samples <= 1) {
    auto profile = load_profile(bids, inst);
    auto oracle = supermod::make_oracle(inst, profile);
    report = method == "exact"
                 ? supermod::ratio_exhaustive(oracle, supermod::all_bidders(inst), cfg)
                 : supermod::ratio_constraint_generation(
                       oracle, supermod::all_bidders(inst), cfg);
  } else {
    supermod::BidSampler sampler;
    sampler.seed = seed;
    report = supermod::ratio_market_estimate(
        static_cast<int>(inst.bidders.size()),
        [&](int i) { return supermod::sample_profile(inst, sampler, i); },
        [&](const supermod::BidProfile& p) { return supermod::make_oracle(inst, p); },
        samples, cfg);
  }
  std::cout << supermod::ratio_to_json(report, inst).dump(2) << "\n";
  return 0;
}

int cmd_audit(const std::string& case_path, const std::optional<std::string>& bids,
              int samples, std::uint64_t seed, const std::string& method,
              const std::string& coalitions, const std::optional<std::string>& csv_dir,
              bool with_timings) {
  Timer total;
  std::string case_text = slurp(case_path);
  std::vector<std::string> warnings;
  auto inst = load_case(case_path, &warnings);
  auto profile = load_profile(bids, inst);
  auto truth = supermod::truthful_profile(inst);
  supermod::BidderSet full = supermod::all_bidders(inst);

  supermod::Json report;
  report["schema"] = supermod::kReportSchemaVersion;
  report["tool_version"] = kToolVersion;
  report["seed"] = seed;
  report["case"]["path"] = case_path;
  report["case"]["digest"] = fnv1a(case_text);
  report["case"]["name"] = inst.name;
  report["case"]["bidders"] = inst.bidders.size();
  report["case"]["warnings"] = warnings;
  supermod::Json errors = supermod::Json::array();
  supermod::Json timings = supermod::Json::object();

  std::optional<supermod::DispatchResult> dispatch;
  {
    Timer t;
    try {
      dispatch = supermod::solve(inst, profile, full);
      report["dispatch"] = supermod::dispatch_to_json(*dispatch);
    } catch (const std::exception& e) {
      errors.push_back(std::string("dispatch: ") + e.what());
    }
    timings["dispatch_ms"] = t.ms();
  }

  std::optional<supermod::VcgOutcome> vcg;
  if (dispatch && dispatch->status == supermod::DispatchStatus::Optimal) {
    Timer t;
    try {
      vcg = supermod::run_vcg(inst, profile, truth);
      report["vcg"] = supermod::vcg_to_json(*vcg);
    } catch (const std::exception& e) {
      errors.push_back(std::string("vcg: ") + e.what());
    }
    timings["vcg_ms"] = t.ms();
  }

  if (vcg && inst.bidders.size() <= 12) {
    Timer t;
    try {
      auto core = supermod::check_core(inst, truth, *vcg);
      report["core"] = supermod::core_to_json(core, inst);
    } catch (const std::exception& e) {
      errors.push_back(std::string("core: ") + e.what());
    }
    timings["core_ms"] = t.ms();
  }

  std::optional<supermod::RatioReport> ratio;
  {
    Timer t;
    try {
      supermod::SetFuncConfig cfg;
      cfg.sample_seed = seed;
      if (samples <= 1) {
        auto oracle = supermod::make_oracle(inst, profile);
        ratio = method == "exact"
                    ? supermod::ratio_exhaustive(oracle, full, cfg)
                    : supermod::ratio_constraint_generation(oracle, full, cfg);
      } else {
        supermod::BidSampler sampler;
        sampler.seed = seed;
        ratio = supermod::ratio_market_estimate(
            static_cast<int>(inst.bidders.size()),
            [&](int i) { return supermod::sample_profile(inst, sampler, i); },
            [&](const supermod::BidProfile& p) {
              return supermod::make_oracle(inst, p);
            },
            samples, cfg);
      }
      if (ratio->k_feas == 0) {
        ratio->k_feas = supermod::k_feas_capacity(inst, profile);
        ratio->lower_bound = ratio->k_feas > 0 ? 1.0 / ratio->k_feas : 1.0;
      }
      report["ratio"] = supermod::ratio_to_json(*ratio, inst);
    } catch (const std::exception& e) {
      errors.push_back(std::string("ratio: ") + e.what());
    }
    timings["ratio_ms"] = t.ms();
  }

  if (vcg && ratio && ratio->gamma > 0.0) {
    Timer t;
    supermod::Json bounds = supermod::Json::array();
    // Losing coalitions: all subsets of zero-allocation bidders up to size 3
    // unless an explicit list is given.
    std::vector<int> losers;
    for (std::size_t i = 0; i < inst.bidders.size(); ++i)
      if (vcg->dispatch.allocation.at(inst.bidders[i].id) <= 1e-9)
        losers.push_back(static_cast<int>(i));
    std::vector<supermod::BidderSet> targets;
    if (coalitions == "auto") {
      for (std::size_t i = 0; i < losers.size(); ++i) {
        targets.push_back(supermod::BidderSet::single(losers[i]));
        for (std::size_t j = i + 1; j < losers.size(); ++j) {
          targets.push_back(supermod::BidderSet::single(losers[i]).with(losers[j]));
          for (std::size_t k = j + 1; k < losers.size(); ++k)
            targets.push_back(supermod::BidderSet::single(losers[i])
                                  .with(losers[j])
                                  .with(losers[k]));
        }
      }
    } else {
      targets.push_back(parse_set(coalitions, inst));
    }
    for (auto k : targets) {
      try {
        supermod::BidProfile others = truth;
        for (int pos : k.positions()) others.bids.erase(inst.bidders[pos].id);
        auto bound = supermod::collusion_bound(inst, others, k, ratio->gamma);
        bounds.push_back(supermod::bound_to_json(bound, inst));
      } catch (const std::exception& e) {
        errors.push_back(std::string("bound ") + supermod::to_string(k) + ": " +
                         e.what());
      }
    }
    report["bounds"] = std::move(bounds);
    timings["bounds_ms"] = t.ms();
  }

  report["errors"] = std::move(errors);
  timings["total_ms"] = total.ms();
  if (with_timings) report["timings"] = std::move(timings);

  if (csv_dir) {
    if (dispatch && dispatch->status == supermod::DispatchStatus::Optimal) {
      std::string rows = "bidder,allocation_mw\n";
      for (const auto& [id, x] : dispatch->allocation)
        rows += std::to_string(id) + "," + std::to_string(x) + "\n";
      write_csv(*csv_dir, "allocation.csv", rows);
    }
    if (vcg) {
      std::string rows = "bidder,payment,utility\n";
      for (const auto& [id, p] : vcg->payments)
        rows += std::to_string(id) + "," + std::to_string(p) + "," +
                std::to_string(vcg->utilities.at(id)) + "\n";
      write_csv(*csv_dir, "vcg.csv", rows);
    }
  }

  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reverse-auction market analysis"};
  app.require_subcommand(1);

  std::string case_path, active_spec, method = "cg", coalitions = "auto";
  std::optional<std::string> bids_path, csv_dir;
  int samples = 1;
  std::uint64_t seed = 1;
  bool with_timings = false;

  auto* dispatch = app.add_subcommand("dispatch", "evaluate the market objective");
  dispatch->add_option("case", case_path, "case file (.m or .json)")->required();
  dispatch->add_option("--bids", bids_path, "bid profile document (default truthful)");
  dispatch->add_option("--active", active_spec,
                       "comma-separated bidder ids (default all)");

  auto* ratio = app.add_subcommand("ratio", "supermodularity ratio");
  ratio->add_option("case", case_path)->required();
  ratio->add_option("--bids", bids_path);
  ratio->add_option("--samples", samples, "sampled bid profiles when no --bids");
  ratio->add_option("--seed", seed);
  ratio->add_option("--method", method)->check(CLI::IsMember({"exact", "cg"}));

  auto* audit = app.add_subcommand("audit", "full dispatch/VCG/ratio/bounds audit");
  audit->add_option("case", case_path)->required();
  audit->add_option("--bids", bids_path);
  audit->add_option("--samples", samples);
  audit->add_option("--seed", seed);
  audit->add_option("--method", method)->check(CLI::IsMember({"exact", "cg"}));
  audit->add_option("--coalitions", coalitions, "'auto' or comma-separated ids");
  audit->add_option("--csv", csv_dir, "directory for CSV tables");
  audit->add_flag("--timings", with_timings, "include timings in the report");

  CLI11_PARSE(app, argc, argv);
  try {
    if (dispatch->parsed())
      return cmd_dispatch(case_path, bids_path,
                          active_spec.empty()
                              ? std::nullopt
                              : std::optional<std::string>(active_spec));
    if (ratio->parsed()) return cmd_ratio(case_path, bids_path, samples, seed, method);
    return cmd_audit(case_path, bids_path, samples, seed, method, coalitions, csv_dir,
                     with_timings);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
