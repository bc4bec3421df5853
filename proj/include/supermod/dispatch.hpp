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
// Economic dispatch: evaluates the market objective J(B_S) as the global
// minimum of aggregate bid cost plus the linear extra cost d, subject to
// DC power-flow balance, line limits, and bid domains, with every bidder
// outside the active set forced to zero.
//
// Angle variables are eliminated: flows on limited lines are expressed
// through PTDF rows, leaving a single balance equality over allocations.
// All-or-nothing blocks and menus are handled by exact enumeration or
// branch-and-bound over acceptance patterns; each pattern solves a
// continuous convex subproblem with a certified duality gap. Ties among
// optimal allocations are broken by a second pass minimizing sum(l * x_l)
// over the optimal face.

#ifndef SUPERMOD_DISPATCH_HPP
#define SUPERMOD_DISPATCH_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "supermod/bidderset.hpp"
#include "supermod/market.hpp"
#include "supermod/oracle.hpp"
#include "supermod/solver.hpp"

namespace supermod {

enum class DispatchStatus { Optimal, Infeasible };

struct DispatchResult {
  DispatchStatus status = DispatchStatus::Infeasible;
  double objective = kInfinity;
  std::map<BidderId, double> allocation;     // x*, covers all instance bidders
  std::map<BusId, double> angles;            // y*, radians, reference fixed 0
  double duality_gap = 0.0;
  std::map<BidderId, double> block_pattern;  // accepted discrete quantities
};

enum class PatternSearch { Auto, Enumerate, BranchAndBound };

struct DispatchOptions {
  double tol_feas = 1e-7;
  double tol_opt_rel = 1e-7;  // certified gap, relative to 1 + |J|
  PatternSearch pattern_search = PatternSearch::Auto;
  int enumerate_cap = 12;     // Auto enumerates up to this many discrete bids
};

namespace dispatch_detail {

struct LimitRow {
  Eigen::VectorXd bus_coef;  // flow MW = bus_coef . injection MW
  double limit = 0.0;
};

struct NetworkModel {
  std::vector<BusId> bus_ids;
  std::map<BusId, int> bus_index;
  int ref = 0;
  Eigen::VectorXd load;  // MW, by bus index
  double total_load = 0.0;
  std::vector<LimitRow> limits;
  Eigen::VectorXd d_inj_coef;  // d-on-angle folded into per-bus injection cost
  double d_const = 0.0;        // load part of the d-on-angle term
  Eigen::MatrixXd lred_inv;    // reduced Laplacian inverse, for angle recovery
  std::vector<int> nonref;
};

inline NetworkModel build_network(const MarketInstance& inst) {
  const Network& net = inst.network;
  NetworkModel m;
  for (const auto& bus : net.buses) {
    m.bus_index[bus.id] = static_cast<int>(m.bus_ids.size());
    m.bus_ids.push_back(bus.id);
  }
  const int n = static_cast<int>(m.bus_ids.size());
  m.ref = m.bus_index.at(net.reference_bus);
  m.load = Eigen::VectorXd::Zero(n);
  for (const auto& bus : net.buses) m.load(m.bus_index.at(bus.id)) = bus.demand_mw;
  m.total_load = m.load.sum();
  m.d_inj_coef = Eigen::VectorXd::Zero(n);

  if (n > 1) {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& ln : net.lines) {
      int i = m.bus_index.at(ln.from), j = m.bus_index.at(ln.to);
      lap(i, i) += ln.susceptance;
      lap(j, j) += ln.susceptance;
      lap(i, j) -= ln.susceptance;
      lap(j, i) -= ln.susceptance;
    }
    for (int i = 0; i < n; ++i)
      if (i != m.ref) m.nonref.push_back(i);
    Eigen::MatrixXd lred(n - 1, n - 1);
    for (int a = 0; a < n - 1; ++a)
      for (int b = 0; b < n - 1; ++b) lred(a, b) = lap(m.nonref[a], m.nonref[b]);
    m.lred_inv = lred.fullPivLu().inverse();

    // PTDF rows for limited lines: flow = susceptance * (theta_i - theta_j),
    // theta = Lred^-1 * injection; the MVA base cancels.
    auto lred_row = [&](int bus) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
      if (bus == m.ref) return r;
      int a = static_cast<int>(std::find(m.nonref.begin(), m.nonref.end(), bus) -
                               m.nonref.begin());
      for (int b = 0; b < n - 1; ++b) r(m.nonref[b]) = m.lred_inv(a, b);
      return r;
    };
    for (const auto& ln : net.lines) {
      if (!ln.limited()) continue;
      LimitRow row;
      row.bus_coef = ln.susceptance * (lred_row(m.bus_index.at(ln.from)) -
                                       lred_row(m.bus_index.at(ln.to)));
      row.limit = ln.limit_mw;
      m.limits.push_back(std::move(row));
    }

    if (!inst.d_linear.on_angle.empty()) {
      Eigen::VectorXd da = Eigen::VectorXd::Zero(n - 1);
      for (const auto& [bus, coef] : inst.d_linear.on_angle) {
        int idx = m.bus_index.at(bus);
        if (idx == m.ref) continue;
        int a = static_cast<int>(std::find(m.nonref.begin(), m.nonref.end(), idx) -
                                 m.nonref.begin());
        da(a) = coef;
      }
      Eigen::VectorXd w = m.lred_inv.transpose() * da;
      for (int a = 0; a < n - 1; ++a)
        m.d_inj_coef(m.nonref[a]) = w(a) / net.base_mva;
      m.d_const = -m.d_inj_coef.dot(m.load);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Continuous subproblems

struct VarInfo {
  BidderId bidder = 0;  // owning bidder id (tie-break weight)
  int bus = 0;          // bus index
  double quad = 0.0;
  double lin = 0.0;     // segment slope plus linear d coefficients
  double len = 0.0;
  int discrete_index = -1;  // >= 0 when this var relaxes a discrete bid
};

struct ContModel {
  std::vector<VarInfo> vars;
  double const_cost = 0.0;
  double fixed_gen = 0.0;          // MW of discrete quantities fixed on
  Eigen::VectorXd fixed_inj;       // per-bus fixed injection minus load
};

struct ContResult {
  bool feasible = false;
  double objective = kInfinity;    // includes const_cost
  Eigen::VectorXd x;
  double gap = 0.0;
  double lin_value = 0.0;          // c . x of the model's linear part
};

inline ContResult solve_continuous(const ContModel& cm, const NetworkModel& net,
                                   const DispatchOptions& opt) {
  ContResult out;
  const int n = static_cast<int>(cm.vars.size());
  const double bal_rhs = net.total_load - cm.fixed_gen;
  if (n == 0) {
    double tol_bal = opt.tol_feas * (1.0 + net.total_load);
    if (std::abs(bal_rhs) > tol_bal) return out;
    for (const auto& lim : net.limits) {
      double flow = lim.bus_coef.dot(cm.fixed_inj);
      if (std::abs(flow) > lim.limit + opt.tol_feas * (1.0 + lim.limit)) return out;
    }
    out.feasible = true;
    out.objective = cm.const_cost;
    out.x = Eigen::VectorXd();
    return out;
  }

  qp::Problem p;
  p.quad = Eigen::VectorXd(n);
  p.c = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) {
    p.quad(i) = cm.vars[i].quad;
    p.c(i) = cm.vars[i].lin;
  }
  p.A = Eigen::MatrixXd::Ones(1, n);
  p.b = Eigen::VectorXd::Constant(1, bal_rhs);
  const int nl = static_cast<int>(net.limits.size());
  p.G = Eigen::MatrixXd::Zero(2 * n + 2 * nl, n);
  p.h = Eigen::VectorXd::Zero(2 * n + 2 * nl);
  for (int i = 0; i < n; ++i) {
    p.G(2 * i, i) = 1.0;
    p.h(2 * i) = cm.vars[i].len;
    p.G(2 * i + 1, i) = -1.0;
    p.h(2 * i + 1) = 0.0;
  }
  for (int r = 0; r < nl; ++r) {
    const auto& lim = net.limits[r];
    double fixed_flow = lim.bus_coef.dot(cm.fixed_inj);
    for (int i = 0; i < n; ++i) {
      double coef = lim.bus_coef(cm.vars[i].bus);
      p.G(2 * n + 2 * r, i) = coef;
      p.G(2 * n + 2 * r + 1, i) = -coef;
    }
    p.h(2 * n + 2 * r) = lim.limit - fixed_flow;
    p.h(2 * n + 2 * r + 1) = lim.limit + fixed_flow;
  }

  qp::Options qopt;
  qopt.tol_feas = std::min(1e-9, opt.tol_feas);
  qopt.tol_gap = 1e-9;  // relative; well inside tol_opt_rel certification
  p.elastic_tail = 2 * nl;
  if (nl == 0) {
    // Without flow limits feasibility is pure capacity arithmetic: the box
    // and the balance equality admit a point iff 0 <= rhs <= sum of lengths.
    double cap = 0.0;
    for (const auto& v : cm.vars) cap += v.len;
    double tol_bal = opt.tol_feas * (1.0 + net.total_load);
    if (bal_rhs < -tol_bal || bal_rhs > cap + tol_bal) return out;
    if (bal_rhs <= tol_bal || bal_rhs >= cap - tol_bal) {
      // Degenerate box (single feasible point); solved by inspection.
      out.feasible = true;
      out.x = Eigen::VectorXd::Zero(n);
      double lin = 0.0, quad_cost = 0.0;
      if (bal_rhs >= cap - tol_bal) {
        for (int i = 0; i < n; ++i) out.x(i) = cm.vars[i].len;
        for (int i = 0; i < n; ++i) {
          lin += cm.vars[i].lin * out.x(i);
          quad_cost += cm.vars[i].quad * out.x(i) * out.x(i);
        }
      }
      out.objective = quad_cost + lin + cm.const_cost;
      out.lin_value = lin;
      return out;
    }
    p.b(0) = std::clamp(bal_rhs, 0.0, cap);
    qopt.assume_feasible = true;
  }
  qp::Solution sol = qp::solve(p, qopt);
  if (sol.status == qp::Status::Infeasible) return out;
  if (sol.status != qp::Status::Optimal)
    throw qp::NumericalFailure("continuous subproblem did not converge");
  out.feasible = true;
  out.x = sol.x;
  // Clamp tiny bound violations so reported allocations stay in-domain.
  for (int i = 0; i < n; ++i)
    out.x(i) = std::clamp(out.x(i), 0.0, cm.vars[i].len);
  out.objective = sol.objective + cm.const_cost;
  out.gap = sol.gap;
  out.lin_value = p.c.dot(sol.x);
  return out;
}

// ---------------------------------------------------------------------------
// Bid decomposition

struct ContinuousBidder {
  BidderId id = 0;
  int bus = 0;
  std::vector<VarInfo> segs;
};

struct DiscreteBidder {
  BidderId id = 0;
  int bus = 0;
  std::vector<std::pair<double, double>> points;  // sorted, (0,0) first
};

inline std::vector<VarInfo> bid_segments(BidderId id, int bus, const BidFunction& f) {
  std::vector<VarInfo> segs;
  if (auto* q = std::get_if<QuadraticBid>(&f.curve)) {
    segs.push_back(VarInfo{id, bus, q->a, q->b, q->cap_mw, -1});
    return segs;
  }
  if (auto* pq = std::get_if<PiecewiseQuadraticBid>(&f.curve)) {
    for (const auto& s : pq->segments)
      segs.push_back(VarInfo{id, bus, s.quad, s.lin, s.len, -1});
    return segs;
  }
  const auto& bps = std::get<PiecewiseLinearBid>(f.curve).breakpoints;
  for (std::size_t i = 1; i < bps.size(); ++i) {
    double len = bps[i].first - bps[i - 1].first;
    double slope = (bps[i].second - bps[i - 1].second) / len;
    segs.push_back(VarInfo{id, bus, 0.0, slope, len, -1});
  }
  return segs;
}

inline std::vector<std::pair<double, double>> discrete_points(const BidFunction& f) {
  if (auto* b = std::get_if<BlockBid>(&f.curve))
    return {{0.0, 0.0}, {b->quantity_mw, b->price}};
  return std::get<MenuBid>(f.curve).points;
}

/// Lower convex hull of menu points, as consecutive hull vertices.
inline std::vector<std::pair<double, double>> lower_hull(
    const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::pair<double, double>> hull;
  for (const auto& pt : pts) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      double cross = (b.first - a.first) * (pt.second - a.second) -
                     (pt.first - a.first) * (b.second - a.second);
      if (cross <= 0) hull.pop_back();
      else break;
    }
    hull.push_back(pt);
  }
  return hull;
}

// ---------------------------------------------------------------------------
// Pattern search

struct Candidate {
  std::vector<int> assignment;  // point index per discrete bidder
  ContResult cont;
};

struct ModelContext {
  const MarketInstance* inst = nullptr;
  NetworkModel net;
  std::vector<ContinuousBidder> continuous;
  std::vector<DiscreteBidder> discrete;
  DispatchOptions opt;

  double d_alloc(BidderId id) const {
    auto it = inst->d_linear.on_allocation.find(id);
    return it == inst->d_linear.on_allocation.end() ? 0.0 : it->second;
  }

  /// Builds the continuous model for a (possibly partial) pattern. Entries
  /// of `assignment` that are -1 are relaxed to the lower convex envelope of
  /// the points in `allowed`.
  ContModel make_model(const std::vector<int>& assignment,
                       const std::vector<std::vector<int>>* allowed) const {
    ContModel cm;
    cm.fixed_inj = -net.load;
    cm.const_cost = net.d_const;
    for (const auto& cb : continuous) {
      for (auto v : cb.segs) {
        v.lin += d_alloc(cb.id) + net.d_inj_coef(cb.bus);
        cm.vars.push_back(v);
      }
    }
    for (std::size_t k = 0; k < discrete.size(); ++k) {
      const auto& db = discrete[k];
      double unit_extra = d_alloc(db.id) + net.d_inj_coef(db.bus);
      if (assignment[k] >= 0) {
        auto [q, cost] = db.points[assignment[k]];
        cm.const_cost += cost + unit_extra * q;
        cm.fixed_gen += q;
        cm.fixed_inj(db.bus) += q;
      } else {
        std::vector<std::pair<double, double>> pts;
        for (int pi : (*allowed)[k]) pts.push_back(db.points[pi]);
        auto hull = lower_hull(pts);
        // Base of the envelope is the smallest allowed point, fixed on.
        cm.const_cost += hull.front().second + unit_extra * hull.front().first;
        cm.fixed_gen += hull.front().first;
        cm.fixed_inj(db.bus) += hull.front().first;
        for (std::size_t i = 1; i < hull.size(); ++i) {
          double len = hull[i].first - hull[i - 1].first;
          double slope = (hull[i].second - hull[i - 1].second) / len;
          cm.vars.push_back(VarInfo{db.id, db.bus, 0.0, slope + unit_extra, len,
                                    static_cast<int>(k)});
        }
      }
    }
    return cm;
  }
};

inline double relaxed_quantity(const ContModel& cm, const ContResult& res, int k,
                               const ModelContext& ctx,
                               const std::vector<std::vector<int>>& allowed) {
  double q = ctx.discrete[k].points[allowed[k].front()].first;
  for (std::size_t i = 0; i < cm.vars.size(); ++i)
    if (cm.vars[i].discrete_index == k) q += res.x(i);
  return q;
}

inline void search_enumerate(const ModelContext& ctx, std::vector<Candidate>& cands,
                             double& best) {
  std::vector<int> assignment(ctx.discrete.size(), 0);
  while (true) {
    ContModel cm = ctx.make_model(assignment, nullptr);
    // Capacity precheck: continuous vars cannot close a negative remainder.
    if (cm.fixed_gen <= ctx.net.total_load + ctx.opt.tol_feas * (1.0 + ctx.net.total_load)) {
      ContResult res = solve_continuous(cm, ctx.net, ctx.opt);
      if (res.feasible) {
        best = std::min(best, res.objective);
        cands.push_back(Candidate{assignment, std::move(res)});
      }
    }
    int k = static_cast<int>(assignment.size()) - 1;
    for (; k >= 0; --k) {
      if (++assignment[k] < static_cast<int>(ctx.discrete[k].points.size())) break;
      assignment[k] = 0;
    }
    if (k < 0) break;
  }
}

inline void search_branch_and_bound(const ModelContext& ctx,
                                    std::vector<Candidate>& cands, double& best) {
  struct Node {
    std::vector<std::vector<int>> allowed;
  };
  std::vector<Node> stack;
  Node root;
  for (const auto& db : ctx.discrete) {
    std::vector<int> all(db.points.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    root.allowed.push_back(std::move(all));
  }
  stack.push_back(std::move(root));
  long nodes = 0;
  while (!stack.empty()) {
    if (++nodes > 200000)
      throw qp::NumericalFailure("branch-and-bound node budget exhausted");
    Node node = std::move(stack.back());
    stack.pop_back();

    std::vector<int> assignment(ctx.discrete.size(), -1);
    for (std::size_t k = 0; k < node.allowed.size(); ++k)
      if (node.allowed[k].size() == 1) assignment[k] = node.allowed[k][0];

    ContModel relaxed = ctx.make_model(assignment, &node.allowed);
    ContResult rres = solve_continuous(relaxed, ctx.net, ctx.opt);
    if (!rres.feasible) continue;
    double tie_window = 1e-9 * (1.0 + std::abs(best));
    if (rres.objective > best + tie_window) continue;

    int branch_k = -1;
    double branch_q = 0.0;
    std::vector<int> fixed = assignment;
    for (std::size_t k = 0; k < ctx.discrete.size(); ++k) {
      if (assignment[k] >= 0) continue;
      double q = relaxed_quantity(relaxed, rres, static_cast<int>(k), ctx, node.allowed);
      double tol_match = 1e-6 * (1.0 + std::abs(q));
      int match = -1;
      for (int pi : node.allowed[k])
        if (std::abs(ctx.discrete[k].points[pi].first - q) <= tol_match) match = pi;
      if (match >= 0) {
        fixed[k] = match;
      } else {
        branch_k = static_cast<int>(k);
        branch_q = q;
        break;
      }
    }

    if (branch_k < 0) {
      ContModel cm = ctx.make_model(fixed, nullptr);
      ContResult res = solve_continuous(cm, ctx.net, ctx.opt);
      if (res.feasible) {
        best = std::min(best, res.objective);
        cands.push_back(Candidate{fixed, std::move(res)});
      }
      // The relaxation may have matched a non-optimal pattern; split the
      // first undetermined bid so the rest of the node is still explored.
      for (std::size_t k = 0; k < node.allowed.size(); ++k) {
        if (node.allowed[k].size() <= 1) continue;
        for (int pi : node.allowed[k]) {
          if (pi == fixed[k]) continue;
          Node child = node;
          child.allowed[k] = {pi};
          stack.push_back(std::move(child));
        }
        node.allowed[k] = {fixed[k]};
      }
      continue;
    }

    std::vector<int> lower, upper;
    for (int pi : node.allowed[branch_k]) {
      if (ctx.discrete[branch_k].points[pi].first <= branch_q) lower.push_back(pi);
      else upper.push_back(pi);
    }
    if (lower.empty() || upper.empty()) {
      // Degenerate split; halve the point list instead.
      auto& pts = node.allowed[branch_k];
      std::size_t half = pts.size() / 2;
      lower.assign(pts.begin(), pts.begin() + half);
      upper.assign(pts.begin() + half, pts.end());
    }
    Node left = node, right = node;
    left.allowed[branch_k] = std::move(lower);
    right.allowed[branch_k] = std::move(upper);
    stack.push_back(std::move(left));
    stack.push_back(std::move(right));
  }
}

/// Secondary LP over the optimal face: quadratic components and the total
/// linear cost are pinned, then sum(bidder_id * x) is minimized.
inline double tie_break(const ModelContext& ctx, const Candidate& cand,
                        ContResult& refined) {
  ContModel cm = ctx.make_model(cand.assignment, nullptr);
  const int n = static_cast<int>(cm.vars.size());
  double secondary_const = 0.0;
  for (std::size_t k = 0; k < ctx.discrete.size(); ++k)
    secondary_const +=
        ctx.discrete[k].id * ctx.discrete[k].points[cand.assignment[k]].first;
  if (n == 0) {
    refined = cand.cont;
    return secondary_const;
  }

  qp::Problem p;
  p.quad = Eigen::VectorXd::Zero(n);
  p.c = Eigen::VectorXd(n);
  Eigen::VectorXd lin(n);
  for (int i = 0; i < n; ++i) {
    p.c(i) = cm.vars[i].bidder;
    lin(i) = cm.vars[i].lin;
  }
  p.A = Eigen::MatrixXd::Ones(1, n);
  p.b = Eigen::VectorXd::Constant(1, ctx.net.total_load - cm.fixed_gen);

  std::vector<Eigen::VectorXd> grows;
  std::vector<double> gh;
  auto add_row = [&](const Eigen::VectorXd& row, double rhs) {
    grows.push_back(row);
    gh.push_back(rhs);
  };
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(i) = 1.0;
    add_row(e, cm.vars[i].len);
    add_row(-e, 0.0);
    if (cm.vars[i].quad > 0.0) {
      // Strictly convex component: unique on the optimal face.
      double xi = cand.cont.x(i);
      double d = 1e-8 * (1.0 + std::abs(xi));
      add_row(e, xi + d);
      add_row(-e, -(xi - d));
    }
  }
  for (const auto& lim : ctx.net.limits) {
    Eigen::VectorXd row(n);
    for (int i = 0; i < n; ++i) row(i) = lim.bus_coef(cm.vars[i].bus);
    double fixed_flow = lim.bus_coef.dot(cm.fixed_inj);
    add_row(row, lim.limit - fixed_flow);
    add_row(-row, lim.limit + fixed_flow);
  }
  double dc = 1e-9 * (1.0 + std::abs(cand.cont.objective));
  add_row(lin, cand.cont.lin_value + dc);
  add_row(-lin, -(cand.cont.lin_value - dc));

  p.G = Eigen::MatrixXd(static_cast<int>(grows.size()), n);
  p.h = Eigen::VectorXd(static_cast<int>(gh.size()));
  for (std::size_t r = 0; r < grows.size(); ++r) {
    p.G.row(static_cast<int>(r)) = grows[r];
    p.h(static_cast<int>(r)) = gh[r];
  }

  refined = cand.cont;
  try {
    // The face contains cand.cont.x by construction, so phase-1 is skipped.
    qp::Options qopt;
    qopt.assume_feasible = true;
    qp::Solution sol = qp::solve(p, qopt);
    if (sol.status == qp::Status::Optimal) {
      refined.x = sol.x;
      for (int i = 0; i < n; ++i)
        refined.x(i) = std::clamp(refined.x(i), 0.0, cm.vars[i].len);
      return sol.objective + secondary_const;
    }
  } catch (const qp::NumericalFailure&) {
    // fall through to the primary solution
  }
  double val = secondary_const;
  for (int i = 0; i < n; ++i) val += cm.vars[i].bidder * cand.cont.x(i);
  return val;
}

}  // namespace dispatch_detail

/// Total d(x, y) at a dispatch solution, for operator-utility accounting.
inline double eval_d_linear(const MarketInstance& instance, const DispatchResult& res) {
  double d = 0.0;
  for (const auto& [id, coef] : instance.d_linear.on_allocation)
    d += coef * res.allocation.at(id);
  for (const auto& [bus, coef] : instance.d_linear.on_angle)
    d += coef * res.angles.at(bus);
  return d;
}

/// Solves the dispatch problem for the bidders in `active` (positions into
/// instance.bidders). Throws qp::NumericalFailure if a continuous
/// subproblem cannot be solved to tolerance; infeasibility is a result, not
/// an error.
inline DispatchResult solve(const MarketInstance& instance, const BidProfile& profile,
                            BidderSet active, const DispatchOptions& opt = {},
                            const dispatch_detail::NetworkModel* shared_net = nullptr) {
  using namespace dispatch_detail;
  const int n_bidders = static_cast<int>(instance.bidders.size());
  if (!active.subset_of(BidderSet::full(n_bidders)))
    throw DomainError("active set references unknown bidder positions");

  DispatchResult result;
  ModelContext ctx;
  ctx.inst = &instance;
  ctx.opt = opt;
  ctx.net = shared_net ? *shared_net : build_network(instance);

  double capacity = 0.0;
  for (int pos : active.positions()) {
    const Bidder& b = instance.bidders[pos];
    const BidFunction& bid = profile.at(b.id);
    capacity += bid.max_quantity();
    int bus = ctx.net.bus_index.at(b.bus);
    if (bid.is_discrete()) {
      ctx.discrete.push_back(DiscreteBidder{b.id, bus, discrete_points(bid)});
    } else {
      ctx.continuous.push_back(ContinuousBidder{b.id, bus, bid_segments(b.id, bus, bid)});
    }
  }
  if (capacity + opt.tol_feas * (1.0 + ctx.net.total_load) < ctx.net.total_load)
    return result;  // not enough offered quantity; infeasible without solving

  std::vector<Candidate> cands;
  double best = kInfinity;
  bool enumerate = opt.pattern_search == PatternSearch::Enumerate ||
                   (opt.pattern_search == PatternSearch::Auto &&
                    static_cast<int>(ctx.discrete.size()) <= opt.enumerate_cap);
  if (enumerate)
    search_enumerate(ctx, cands, best);
  else
    search_branch_and_bound(ctx, cands, best);
  if (!std::isfinite(best)) return result;

  // Candidate solves are polished to near evaluation precision, so patterns
  // only count as tied when their costs agree to relative 1e-9.
  double tie_tol = 1e-9 * (1.0 + std::abs(best));
  const Candidate* chosen = nullptr;
  ContResult chosen_cont;
  double chosen_secondary = kInfinity;
  bool strictly_convex = ctx.discrete.empty();
  for (const auto& cb : ctx.continuous)
    for (const auto& v : cb.segs) strictly_convex = strictly_convex && v.quad > 0.0;
  if (strictly_convex) {
    // Unique optimum: no tie to break.
    chosen = &cands.front();
    chosen_cont = cands.front().cont;
  }
  for (const auto& cand : cands) {
    if (chosen) break;
    if (cand.cont.objective > best + tie_tol) continue;
    ContResult refined;
    double secondary = tie_break(ctx, cand, refined);
    if (chosen == nullptr || secondary < chosen_secondary - 1e-9 ||
        (secondary < chosen_secondary + 1e-9 && cand.assignment < chosen->assignment)) {
      chosen = &cand;
      chosen_cont = std::move(refined);
      chosen_secondary = secondary;
    }
  }

  result.status = DispatchStatus::Optimal;
  result.objective = best;
  result.duality_gap = chosen_cont.gap;
  for (const auto& b : instance.bidders) result.allocation[b.id] = 0.0;
  ContModel cm = ctx.make_model(chosen->assignment, nullptr);
  // Clean the continuous point so costs evaluated at the allocation match
  // the reported objective: snap bound dust (which bid evaluation treats as
  // exactly-at-bound), then repair the balance equality through variables
  // with interior slack.
  if (!cm.vars.empty()) {
    for (std::size_t i = 0; i < cm.vars.size(); ++i) {
      double& xi = chosen_cont.x(static_cast<int>(i));
      if (xi <= 1e-9) xi = 0.0;
      if (cm.vars[i].len - xi <= 1e-9) xi = cm.vars[i].len;
    }
    double resid = ctx.net.total_load - cm.fixed_gen - chosen_cont.x.sum();
    for (int margin_pass = 0; margin_pass < 2 && resid != 0.0; ++margin_pass) {
      double margin = margin_pass == 0 ? 1e-6 : 0.0;
      for (std::size_t i = 0; i < cm.vars.size() && resid != 0.0; ++i) {
        double& xi = chosen_cont.x(static_cast<int>(i));
        if (std::min(xi, cm.vars[i].len - xi) <= margin) continue;
        double step = std::clamp(resid, -xi, cm.vars[i].len - xi);
        xi += step;
        resid -= step;
      }
    }
  }
  for (std::size_t i = 0; i < cm.vars.size(); ++i)
    result.allocation[cm.vars[i].bidder] += chosen_cont.x(static_cast<int>(i));
  for (std::size_t k = 0; k < ctx.discrete.size(); ++k) {
    double q = ctx.discrete[k].points[chosen->assignment[k]].first;
    result.allocation[ctx.discrete[k].id] += q;
    if (q > 0.0) result.block_pattern[ctx.discrete[k].id] = q;
  }

  // Recover bus angles from the final injections.
  const int nb = static_cast<int>(ctx.net.bus_ids.size());
  Eigen::VectorXd inj = -ctx.net.load;
  for (const auto& b : instance.bidders)
    inj(ctx.net.bus_index.at(b.bus)) += result.allocation.at(b.id);
  for (int i = 0; i < nb; ++i) result.angles[ctx.net.bus_ids[i]] = 0.0;
  if (nb > 1) {
    Eigen::VectorXd inj_red(nb - 1);
    for (int a = 0; a < nb - 1; ++a) inj_red(a) = inj(ctx.net.nonref[a]);
    Eigen::VectorXd theta = ctx.net.lred_inv * (inj_red / instance.network.base_mva);
    for (int a = 0; a < nb - 1; ++a)
      result.angles[ctx.net.bus_ids[ctx.net.nonref[a]]] = theta(a);
  }

  // Report the objective evaluated at the final point: payment arithmetic
  // downstream mixes bid values at the allocation with J, and the two must
  // agree to evaluation precision.
  double jval = eval_d_linear(instance, result);
  for (int pos : active.positions()) {
    const Bidder& b = instance.bidders[pos];
    jval += eval_bid(profile.at(b.id), result.allocation.at(b.id));
  }
  result.objective = jval;
  return result;
}

inline BidderSet all_bidders(const MarketInstance& instance) {
  return BidderSet::full(static_cast<int>(instance.bidders.size()));
}

/// Oracle over S -> solve(instance, profile, S).objective, memoized.
inline ObjectiveOracle make_oracle(const MarketInstance& instance,
                                   const BidProfile& profile,
                                   const DispatchOptions& opt = {}) {
  auto net = std::make_shared<dispatch_detail::NetworkModel>(
      dispatch_detail::build_network(instance));
  return ObjectiveOracle(
      [&instance, profile, opt, net](BidderSet s) {
        return solve(instance, profile, s, opt, net.get()).objective;
      },
      static_cast<int>(instance.bidders.size()));
}

}  // namespace supermod

#endif  // SUPERMOD_DISPATCH_HPP
