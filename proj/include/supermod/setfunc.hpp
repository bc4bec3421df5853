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
// Set-function analytics over the market objective S -> J(B_S):
// supermodularity check, supermodularity ratio (exhaustive and constraint
// generation), and the k_feas feasibility count behind the 1/k_feas lower
// bound on the ratio.
//
// Infeasible subsets (J = +inf) are excluded from ratio pairs; pairs whose
// denominator vanishes together with the numerator are vacuously satisfied
// and contribute ratio 1; a vanishing denominator with positive numerator
// is skipped. This mirrors the four-case split behind the 1/k_feas bound.

#ifndef SUPERMOD_SETFUNC_HPP
#define SUPERMOD_SETFUNC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "supermod/bidderset.hpp"
#include "supermod/market.hpp"
#include "supermod/oracle.hpp"
#include "supermod/rng.hpp"

namespace supermod {

struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SetFuncConfig {
  int exhaustive_cap = 12;
  double tol_ratio = 1e-9;
  // Relative floor under which a pair's denominator counts as zero. Must sit
  // above the dispatch solver's certified gap, or noise-level differences of
  // J masquerade as near-zero ratios.
  double tol_denominator = 1e-6;
  int max_cg_iterations = 1000;
  // Sampled separation (only used when |L| exceeds exhaustive_cap).
  int sample_pairs = 2000;
  int sample_k_max = 3;
  std::uint64_t sample_seed = 1;
};

struct RatioWitness {
  BidderSet S;
  BidderSet K;
  double numerator = 0.0;    // J(S_-K) - J(S)
  double denominator = 0.0;  // sum_l J(S_-l) - J(S)
  double ratio = 1.0;
};

enum class RatioMethod { Exhaustive, ConstraintGeneration };

struct RatioReport {
  double gamma = 1.0;
  std::vector<RatioWitness> witnesses;
  RatioMethod method = RatioMethod::Exhaustive;
  int k_feas = 0;               // 0 when not computed (|L| beyond cap)
  double lower_bound = 0.0;     // 1/k_feas when k_feas is known
  long evaluations_used = 0;
  bool upper_estimate = false;  // true when separation was sampled or budget ran out
  int cg_iterations = 0;
};

struct SupermodularityCounterexample {
  BidderSet S;
  BidderSet R;
  int bidder = 0;  // position, member of S
};

namespace setfunc_detail {

/// Classified (S, K) pair for the ratio inequality. `valid` means the pair
/// constrains gamma (denominator > 0 and finite values throughout).
struct Pair {
  double num = 0.0;
  double den = 0.0;
  bool valid = false;
};

inline Pair classify(const ObjectiveOracle& oracle, BidderSet s, BidderSet k,
                     double den_floor) {
  Pair out;
  double js = oracle.evaluate(s);
  if (!std::isfinite(js)) return out;
  double jsk = oracle.evaluate(s.minus(k));
  if (!std::isfinite(jsk)) return out;
  double den = 0.0;
  for (int l : k.positions()) den += oracle.evaluate(s.without(l)) - js;
  double num = std::max(jsk - js, 0.0);
  den = std::max(den, 0.0);
  double zero = den_floor * (1.0 + std::abs(js));
  if (den <= zero) return out;  // vacuous (num ~ 0) or the impossible case (3)
  out.num = num;
  out.den = den;
  out.valid = true;
  return out;
}

template <typename Fn>
void for_each_pair(BidderSet full, Fn&& fn) {
  for_each_subset(full, [&](BidderSet s) {
    if (s.is_empty()) return;
    for_each_subset(s, [&](BidderSet k) {
      if (k.is_empty()) return;
      fn(s, k);
    });
  });
}

inline void push_witness(std::vector<RatioWitness>& ws, BidderSet s, BidderSet k,
                         const Pair& p) {
  if (ws.size() >= 16) return;
  ws.push_back(RatioWitness{s, k, p.num, p.den, p.num / p.den});
}

}  // namespace setfunc_detail

/// Maximum k such that some K with |K| = k can be removed from L leaving a
/// feasible problem (existential reading). Returns 0 when removing any
/// single bidder is infeasible.
inline int k_feas(const ObjectiveOracle& oracle, BidderSet full) {
  int n = full.size();
  for (int keep = 0; keep <= n; ++keep) {
    bool found = false;
    for_each_subset(full, [&](BidderSet t) {
      if (found || t.size() != keep) return;
      if (std::isfinite(oracle.evaluate(t))) found = true;
    });
    if (found) return n - keep;
  }
  return 0;
}

/// Upper bound on k_feas from capacity arithmetic alone: the network
/// constraints are dropped, so any set that covers total demand by quantity
/// counts as feasible. min-keep sizes can only shrink under the relaxation,
/// hence the returned value dominates k_feas and 1/k_hat lower-bounds
/// 1/k_feas.
inline int k_feas_capacity(const MarketInstance& instance, const BidProfile& profile) {
  std::vector<double> caps;
  for (const auto& b : instance.bidders)
    caps.push_back(profile.at(b.id).max_quantity());
  std::sort(caps.begin(), caps.end(), std::greater<double>());
  double need = instance.network.total_demand();
  double have = 0.0;
  int used = 0;
  for (double c : caps) {
    if (have >= need) break;
    have += c;
    ++used;
  }
  if (have < need) return 0;  // nothing feasible even with everyone
  return static_cast<int>(caps.size()) - used;
}

/// Definition-level supermodularity test by full enumeration of
/// (S, R, l) with S subset of R; quadruples touching an infinite value are
/// skipped (infeasible sets carry no increment information).
inline std::optional<SupermodularityCounterexample> is_supermodular(
    const ObjectiveOracle& oracle, BidderSet full, const SetFuncConfig& cfg = {}) {
  if (full.size() > cfg.exhaustive_cap)
    throw CapExceeded("set too large for exhaustive supermodularity check");
  std::optional<SupermodularityCounterexample> counterexample;
  for_each_subset(full, [&](BidderSet r) {
    if (counterexample) return;
    double jr = oracle.evaluate(r);
    if (!std::isfinite(jr)) return;
    for_each_subset(r, [&](BidderSet s) {
      if (counterexample || s.is_empty()) return;
      double js = oracle.evaluate(s);
      if (!std::isfinite(js)) return;
      for (int l : s.positions()) {
        double jsl = oracle.evaluate(s.without(l));
        double jrl = oracle.evaluate(r.without(l));
        if (!std::isfinite(jsl) || !std::isfinite(jrl)) continue;
        double tol = cfg.tol_denominator * (1.0 + std::abs(js) + std::abs(jr));
        if (js - jsl > jr - jrl + tol) {
          counterexample = SupermodularityCounterexample{s, r, l};
          return;
        }
      }
    });
  });
  return counterexample;
}

/// Exact supermodularity ratio by enumerating every (S, K) pair.
inline RatioReport ratio_exhaustive(const ObjectiveOracle& oracle, BidderSet full,
                                    const SetFuncConfig& cfg = {}) {
  if (full.size() > cfg.exhaustive_cap)
    throw CapExceeded("set too large for exhaustive ratio computation");
  RatioReport report;
  report.method = RatioMethod::Exhaustive;
  setfunc_detail::for_each_pair(full, [&](BidderSet s, BidderSet k) {
    auto pair = setfunc_detail::classify(oracle, s, k, cfg.tol_denominator);
    if (!pair.valid) return;
    double ratio = pair.num / pair.den;
    if (ratio < report.gamma - cfg.tol_ratio) {
      report.gamma = ratio;
      report.witnesses.clear();
      setfunc_detail::push_witness(report.witnesses, s, k, pair);
    } else if (ratio <= report.gamma + cfg.tol_ratio) {
      setfunc_detail::push_witness(report.witnesses, s, k, pair);
    }
  });
  report.gamma = std::clamp(report.gamma, 0.0, 1.0);
  report.k_feas = k_feas(oracle, full);
  report.lower_bound = report.k_feas > 0 ? 1.0 / report.k_feas : 1.0;
  report.evaluations_used = oracle.eval_count();
  return report;
}

/// Iterative computation of the ratio: start at gamma = 1, repeatedly find
/// the most violated inequality, add it, and reset gamma to the largest
/// value satisfying all generated constraints. Separation is exact
/// (enumeration over memoized values) up to the exhaustive cap and sampled
/// beyond it, in which case the result is flagged as an upper estimate.
inline RatioReport ratio_constraint_generation(const ObjectiveOracle& oracle,
                                               BidderSet full,
                                               const SetFuncConfig& cfg = {}) {
  RatioReport report;
  report.method = RatioMethod::ConstraintGeneration;
  const bool exact = full.size() <= cfg.exhaustive_cap;
  report.upper_estimate = !exact;

  // Candidate pairs for sampled separation, drawn once, deterministic.
  std::vector<std::pair<BidderSet, BidderSet>> sampled;
  if (!exact) {
    SplitMix64 rng(cfg.sample_seed);
    auto add = [&](BidderSet s, BidderSet k) {
      if (!k.is_empty() && k.subset_of(s)) sampled.emplace_back(s, k);
    };
    std::vector<int> pos = full.positions();
    for (int l : pos) add(full, BidderSet::single(l));
    for (std::size_t i = 0; i < pos.size(); ++i)
      for (std::size_t j = i + 1; j < pos.size(); ++j)
        add(full, BidderSet::single(pos[i]).with(pos[j]));
    for (int t = 0; t < cfg.sample_pairs; ++t) {
      BidderSet s = full;
      int drop = static_cast<int>(rng.next() % 4);
      for (int i = 0; i < drop; ++i)
        s = s.without(pos[rng.next() % pos.size()]);
      int ksz = 1 + static_cast<int>(rng.next() % cfg.sample_k_max);
      BidderSet k;
      auto spos = s.positions();
      if (spos.empty()) continue;
      for (int i = 0; i < ksz; ++i) k = k.with(spos[rng.next() % spos.size()]);
      add(s, k);
    }
  }

  auto separate = [&](double gamma) {
    double worst = 0.0;
    std::optional<std::pair<BidderSet, BidderSet>> arg;
    setfunc_detail::Pair arg_pair;
    auto visit = [&](BidderSet s, BidderSet k) {
      auto pair = setfunc_detail::classify(oracle, s, k, cfg.tol_denominator);
      if (!pair.valid) return;
      double violation = gamma * pair.den - pair.num;
      if (violation > worst) {
        worst = violation;
        arg = std::make_pair(s, k);
        arg_pair = pair;
      }
    };
    if (exact)
      setfunc_detail::for_each_pair(full, visit);
    else
      for (const auto& [s, k] : sampled) visit(s, k);
    return std::make_tuple(worst, arg, arg_pair);
  };

  double gamma = 1.0;
  std::vector<RatioWitness> witnesses;
  bool converged = false;
  for (int iter = 0; iter < cfg.max_cg_iterations; ++iter) {
    report.cg_iterations = iter + 1;
    auto [violation, arg, pair] = separate(gamma);
    double scale = 1.0 + (arg ? pair.den : 1.0);
    if (!arg || violation <= cfg.tol_ratio * scale) {
      converged = true;
      break;
    }
    witnesses.push_back(RatioWitness{arg->first, arg->second, pair.num, pair.den,
                                     pair.num / pair.den});
    gamma = 1.0;
    for (const auto& w : witnesses) gamma = std::min(gamma, w.ratio);
  }
  if (!converged) report.upper_estimate = true;  // budget exhausted

  report.gamma = std::clamp(gamma, 0.0, 1.0);
  // Keep only the binding witnesses.
  for (const auto& w : witnesses)
    if (w.ratio <= report.gamma + cfg.tol_ratio && report.witnesses.size() < 16)
      report.witnesses.push_back(w);
  if (exact) {
    report.k_feas = k_feas(oracle, full);
    report.lower_bound = report.k_feas > 0 ? 1.0 / report.k_feas : 1.0;
  }
  report.evaluations_used = oracle.eval_count();
  return report;
}

/// Market-level ratio: minimum of the per-profile ratio over sampled bid
/// profiles. `make_profile(i)` must be deterministic in i.
inline RatioReport ratio_market_estimate(
    int n_bidders, const std::function<BidProfile(int)>& make_profile,
    const std::function<ObjectiveOracle(const BidProfile&)>& make_oracle_fn,
    int n_profiles, const SetFuncConfig& cfg = {}) {
  if (n_profiles < 1) throw std::invalid_argument("n_profiles must be >= 1");
  BidderSet full = BidderSet::full(n_bidders);
  RatioReport best;
  best.gamma = kInfinity;
  long evals = 0;
  for (int i = 0; i < n_profiles; ++i) {
    BidProfile profile = make_profile(i);
    ObjectiveOracle oracle = make_oracle_fn(profile);
    RatioReport r = ratio_constraint_generation(oracle, full, cfg);
    evals += r.evaluations_used;
    if (r.gamma < best.gamma) {
      long keep = evals;
      best = r;
      best.evaluations_used = keep;
    } else {
      best.evaluations_used = evals;
      best.upper_estimate = best.upper_estimate || r.upper_estimate;
    }
  }
  best.method = RatioMethod::ConstraintGeneration;
  return best;
}

}  // namespace supermod

#endif  // SUPERMOD_SETFUNC_HPP
