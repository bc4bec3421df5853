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
// Dense primal-dual interior-point solver for small convex QPs
//
//   minimize    x' diag(quad) x + c' x
//   subject to  A x  = b
//               G x <= h
//
// with quad >= 0 elementwise (LP when quad = 0). Infeasibility is decided
// by a phase-1 elastic LP, so an Infeasible status is a certificate that no
// point satisfies the constraints (within tol_feas), not a solver giveup.

#ifndef SUPERMOD_SOLVER_HPP
#define SUPERMOD_SOLVER_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef SUPERMOD_SOLVER_TRACE
#include <cstdio>
#endif

namespace supermod::qp {

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Status { Optimal, Infeasible, MaxIterations };

struct Problem {
  Eigen::VectorXd quad;  // diagonal quadratic coefficients, cost quad[i]*x[i]^2
  Eigen::VectorXd c;
  Eigen::MatrixXd A;     // equalities A x = b (may have 0 rows)
  Eigen::VectorXd b;
  Eigen::MatrixXd G;     // inequalities G x <= h (must have >= 1 row)
  Eigen::VectorXd h;
  // Number of trailing G rows that can make the problem infeasible and get
  // phase-1 elastics (-1: all rows). Leading rows must be feasible on their
  // own (e.g. variable boxes) and stay hard in phase-1.
  int elastic_tail = -1;

  int n() const { return static_cast<int>(c.size()); }
};

struct Solution {
  Status status = Status::MaxIterations;
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // equality multipliers
  Eigen::VectorXd z;  // inequality multipliers (>= 0)
  double objective = 0.0;
  double gap = 0.0;   // complementarity s'z at termination
  double primal_residual = 0.0;
  int iterations = 0;
};

struct Options {
  double tol_feas = 1e-9;
  double tol_gap = 1e-10;
  double tol_infeasible = 1e-7;  // phase-1 objective threshold
  // Skip phase-1 when the caller has certified feasibility by other means.
  bool assume_feasible = false;
  int max_iterations = 200;
};

namespace detail {

inline double eval_objective(const Problem& p, const Eigen::VectorXd& x) {
  return x.cwiseProduct(p.quad).dot(x) + p.c.dot(x);
}

/// One Mehrotra predictor-corrector run on a problem known (or assumed)
/// to be feasible. Returns false if it fails to reach the tolerances.
inline bool solve_pdip(const Problem& p, const Options& opt, Solution& out) {
  const int n = p.n();
  const int me = static_cast<int>(p.b.size());
  const int mi = static_cast<int>(p.h.size());
  const Eigen::VectorXd q2 = 2.0 * p.quad;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(mi);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(mi);
  // Start with slacks sized to the constraint violation at x = 0.
  for (int i = 0; i < mi; ++i)
    s(i) = std::max(1.0, std::abs(p.h(i)));

  const double scale_b = 1.0 + (me > 0 ? p.b.lpNorm<Eigen::Infinity>() : 0.0);
  const double scale_h = 1.0 + p.h.lpNorm<Eigen::Infinity>();
  const double scale_c = 1.0 + p.c.lpNorm<Eigen::Infinity>();

  Eigen::MatrixXd kkt(n + me, n + me);
  Eigen::VectorXd rhs(n + me), dxy(n + me);

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    Eigen::VectorXd rd = q2.cwiseProduct(x) + p.c + p.G.transpose() * z;
    if (me > 0) rd += p.A.transpose() * y;
    Eigen::VectorXd rp = me > 0 ? Eigen::VectorXd(p.A * x - p.b) : Eigen::VectorXd();
    Eigen::VectorXd rc = p.G * x + s - p.h;
    double mu = s.dot(z) / mi;

    double pres = std::max(me > 0 ? rp.lpNorm<Eigen::Infinity>() : 0.0,
                           rc.lpNorm<Eigen::Infinity>());
    double dres = rd.lpNorm<Eigen::Infinity>();
    double obj = eval_objective(p, x);
#ifdef SUPERMOD_SOLVER_TRACE
    std::printf("it=%3d pres=%.3e dres=%.3e mu=%.3e obj=%.6e\n", iter, pres,
                dres, mu, obj);
#endif
    // A degenerate step can blow the iterate up to NaN; keep the last
    // finite one so the polish step can still recover the face from it.
    if (!std::isfinite(mu) || !std::isfinite(pres) || !std::isfinite(dres) ||
        !std::isfinite(obj))
      return false;
    out.iterations = iter;
    out.x = x;
    out.y = y;
    out.z = z;
    out.objective = obj;
    out.gap = s.dot(z);
    out.primal_residual = pres;
    if (pres <= opt.tol_feas * std::max(scale_b, scale_h) &&
        dres <= opt.tol_feas * scale_c &&
        s.dot(z) <= opt.tol_gap * (1.0 + std::abs(obj))) {
      out.status = Status::Optimal;
      out.x = x;
      out.y = y;
      out.z = z;
      out.objective = obj;
      out.gap = s.dot(z);
      return true;
    }

    // Normal equations block:  [Q + G' (Z/S) G   A'] [dx] = rhs
    //                          [A                0 ] [dy]
    Eigen::VectorXd zs = z.cwiseQuotient(s);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = p.G.transpose() * zs.asDiagonal() * p.G;
    kkt.topLeftCorner(n, n).diagonal() += q2;
    if (me > 0) {
      kkt.topRightCorner(n, me) = p.A.transpose();
      kkt.bottomLeftCorner(me, n) = p.A;
      // Tiny dual regularization keeps the LU stable on redundant equalities.
      kkt.bottomRightCorner(me, me).diagonal().setConstant(-1e-12);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

    auto solve_step = [&](const Eigen::VectorXd& rs) {
      // rs is the target for the complementarity residual: S z -> rs.
      rhs.head(n) = -rd - p.G.transpose() * ((rs + z.cwiseProduct(rc)).cwiseQuotient(s));
      if (me > 0) rhs.tail(me) = -rp;
      dxy = lu.solve(rhs);
      // One step of iterative refinement.
      Eigen::VectorXd resid = rhs - kkt * dxy;
      dxy += lu.solve(resid);
    };

    auto step_lengths = [&](const Eigen::VectorXd& ds, const Eigen::VectorXd& dz) {
      double ap = 1.0, ad = 1.0;
      for (int i = 0; i < mi; ++i) {
        if (ds(i) < 0) ap = std::min(ap, -s(i) / ds(i));
        if (dz(i) < 0) ad = std::min(ad, -z(i) / dz(i));
      }
      return std::pair<double, double>(ap, ad);
    };

    // Affine (predictor) direction.
    Eigen::VectorXd rs_aff = -s.cwiseProduct(z);
    solve_step(rs_aff);
    Eigen::VectorXd dx = dxy.head(n);
    Eigen::VectorXd ds = -rc - p.G * dx;
    Eigen::VectorXd dz = (rs_aff - z.cwiseProduct(ds)).cwiseQuotient(s);
    auto [ap_aff, ad_aff] = step_lengths(ds, dz);
    double mu_aff = (s + ap_aff * ds).dot(z + ad_aff * dz) / mi;
    double sigma = std::pow(mu_aff / mu, 3);
    sigma = std::clamp(sigma, 1e-8, 0.99);

    // Corrector direction.
    Eigen::VectorXd rs_cor =
        sigma * mu * Eigen::VectorXd::Ones(mi) - s.cwiseProduct(z) - ds.cwiseProduct(dz);
    solve_step(rs_cor);
    dx = dxy.head(n);
    Eigen::VectorXd dy = me > 0 ? Eigen::VectorXd(dxy.tail(me)) : Eigen::VectorXd();
    ds = -rc - p.G * dx;
    dz = (rs_cor - z.cwiseProduct(ds)).cwiseQuotient(s);

    auto [ap, ad] = step_lengths(ds, dz);
    // Damp the fraction-to-boundary late in the run: the aggressive factor
    // can lock the iteration into a limit cycle near degenerate optima.
    double tau = iter < 60 ? 0.995 : 0.9;
    double alpha_p = std::min(1.0, tau * ap);
    double alpha_d = std::min(1.0, tau * ad);
    // Once primal-feasible, keep complementarity from growing: backtrack
    // both steps until the new mu is at most a modest increase over the
    // current one. (With an infeasible iterate mu may legitimately rise
    // while the residuals shrink, so the safeguard stays off.)
    if (pres <= 1e-8 * std::max(scale_b, scale_h)) {
      for (int bt = 0; bt < 40; ++bt) {
        double mu_new = (s + alpha_p * ds).dot(z + alpha_d * dz) / mi;
        if (mu_new <= std::max(1.2 * mu, opt.tol_gap)) break;
        alpha_p *= 0.7;
        alpha_d *= 0.7;
      }
    }
    if (alpha_p < 1e-10 && alpha_d < 1e-10) return false;  // stalled
    x += alpha_p * dx;
    s += alpha_p * ds;
    if (me > 0) y += alpha_d * dy;
    z += alpha_d * dz;
  }
  return false;
}

/// Elastic phase-1: minimize total constraint violation. Equalities and the
/// elastic tail of G get slack variables; leading G rows stay hard. Optimal
/// value ~0 iff the original constraints are feasible.
inline Problem make_phase1(const Problem& p) {
  const int n = p.n();
  const int me = static_cast<int>(p.b.size());
  const int mi = static_cast<int>(p.h.size());
  const int mel = p.elastic_tail < 0 ? mi : p.elastic_tail;
  const int hard = mi - mel;
  // Variables: [x, pe, qe, r] with A x + pe - qe = b, elastic rows
  // G x - r <= h, pe, qe, r >= 0; objective 1'pe + 1'qe + 1'r.
  Problem ph;
  const int N = n + 2 * me + mel;
  ph.quad = Eigen::VectorXd::Zero(N);
  ph.c = Eigen::VectorXd::Zero(N);
  ph.c.segment(n, 2 * me + mel).setOnes();
  ph.A = Eigen::MatrixXd::Zero(me, N);
  ph.A.leftCols(n) = p.A;
  ph.A.block(0, n, me, me) = Eigen::MatrixXd::Identity(me, me);
  ph.A.block(0, n + me, me, me) = -Eigen::MatrixXd::Identity(me, me);
  ph.b = p.b;
  ph.G = Eigen::MatrixXd::Zero(mi + 2 * me + mel, N);
  ph.h = Eigen::VectorXd::Zero(mi + 2 * me + mel);
  ph.G.topLeftCorner(mi, n) = p.G;
  ph.G.block(hard, n + 2 * me, mel, mel) = -Eigen::MatrixXd::Identity(mel, mel);
  ph.h.head(mi) = p.h;
  ph.G.block(mi, n, 2 * me + mel, 2 * me + mel) =
      -Eigen::MatrixXd::Identity(2 * me + mel, 2 * me + mel);
  return ph;
}

/// Active-set polish: takes the interior-point iterate, guesses the active
/// inequalities from the multiplier/slack split, and re-solves the resulting
/// equality-constrained KKT system directly. On success the solution is
/// accurate to linear-solve precision rather than the barrier tolerance.
/// Returns false (leaving `sol` untouched) if the guess does not verify.
inline bool polish(const Problem& p, Solution& sol) {
  const int n = p.n();
  const int me = static_cast<int>(p.b.size());
  const int mi = static_cast<int>(p.h.size());
  if (sol.x.size() != n || sol.z.size() != mi) return false;

  const double scale_b = 1.0 + (me > 0 ? p.b.lpNorm<Eigen::Infinity>() : 0.0);
  const double scale_h = 1.0 + p.h.lpNorm<Eigen::Infinity>();
  const double scale_c = 1.0 + p.c.lpNorm<Eigen::Infinity>();

  Eigen::VectorXd slack = p.h - p.G * sol.x;
  std::vector<char> act(mi, 0);
  for (int i = 0; i < mi; ++i) act[i] = sol.z(i) > std::abs(slack(i));

  for (int round = 0; round < 40; ++round) {
    std::vector<int> active;
    for (int i = 0; i < mi; ++i)
      if (act[i]) active.push_back(i);
    const int na = static_cast<int>(active.size());

    // KKT for the guessed face:  [2Q  A'  Ga'] [x]    [-c ]
    //                            [A   0   0  ] [y]  = [ b ]
    //                            [Ga  0   0  ] [za]   [ ha]
    const int N = n + me + na;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd rhs(N);
    kkt.topLeftCorner(n, n).diagonal() = 2.0 * p.quad;
    rhs.head(n) = -p.c;
    if (me > 0) {
      kkt.block(n, 0, me, n) = p.A;
      kkt.block(0, n, n, me) = p.A.transpose();
      rhs.segment(n, me) = p.b;
    }
    for (int k = 0; k < na; ++k) {
      kkt.row(n + me + k).head(n) = p.G.row(active[k]);
      kkt.col(n + me + k).head(n) = p.G.row(active[k]).transpose();
      rhs(n + me + k) = p.h(active[k]);
    }
    // Minimum-norm solve tolerates redundant active rows.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
    Eigen::VectorXd sol_vec = cod.solve(rhs);
    Eigen::VectorXd x = sol_vec.head(n);
    Eigen::VectorXd y =
        me > 0 ? Eigen::VectorXd(sol_vec.segment(n, me)) : Eigen::VectorXd();
    Eigen::VectorXd za = sol_vec.tail(na);

    // Accept the face once it verifies: primal feasibility across all
    // constraints, stationarity, and nonnegative active multipliers — the
    // KKT certificate of global optimality for the convex problem.
    Eigen::VectorXd viol = p.G * x - p.h;
    double pres = viol.maxCoeff();
    if (me > 0) pres = std::max(pres, (p.A * x - p.b).lpNorm<Eigen::Infinity>());
    Eigen::VectorXd rd = 2.0 * p.quad.cwiseProduct(x) + p.c;
    if (me > 0) rd += p.A.transpose() * y;
    for (int k = 0; k < na; ++k) rd += za(k) * p.G.row(active[k]).transpose();
    double zscale = 1.0 + (na > 0 ? za.lpNorm<Eigen::Infinity>() : 0.0);
    double za_min = na > 0 ? za.minCoeff() : 0.0;
    if (pres <= 1e-9 * std::max(scale_b, scale_h) &&
        rd.lpNorm<Eigen::Infinity>() <= 1e-8 * scale_c &&
        za_min >= -1e-7 * zscale) {
      sol.x = x;
      sol.y = y;
      sol.z = Eigen::VectorXd::Zero(mi);
      for (int k = 0; k < na; ++k) sol.z(active[k]) = std::max(0.0, za(k));
      sol.objective = eval_objective(p, x);
      sol.gap = std::abs(sol.z.dot(p.h - p.G * x));
      sol.primal_residual = std::max(0.0, pres);
      sol.status = Status::Optimal;
      return true;
    }

    // Adjust the guess: pick up violated rows; if none, release the row
    // whose multiplier is most negative (one at a time, as in a primal
    // active-set sweep, to avoid add/drop cycling).
    bool changed = false;
    for (int i = 0; i < mi; ++i)
      if (!act[i] && viol(i) > 1e-11 * scale_h) {
        act[i] = 1;
        changed = true;
      }
    if (!changed && na > 0 && za_min < -1e-9 * zscale) {
      int worst = 0;
      for (int k = 1; k < na; ++k)
        if (za(k) < za(worst)) worst = k;
      act[active[worst]] = 0;
      changed = true;
    }
    if (!changed) return false;  // stable guess that does not verify
  }
  return false;
}

}  // namespace detail

/// Solves the QP. Runs phase-1 first to decide feasibility, then the main
/// predictor-corrector. Throws NumericalFailure if neither pass converges.
inline Solution solve(const Problem& p, const Options& opt = {}) {
  if (p.h.size() == 0)
    throw NumericalFailure("problem must have at least one inequality");
  if (!opt.assume_feasible) {
    Solution phase1_sol;
    Problem ph = detail::make_phase1(p);
    Options ph_opt = opt;
    ph_opt.tol_gap = 1e-9;
    bool converged = detail::solve_pdip(ph, ph_opt, phase1_sol) ||
                     detail::polish(ph, phase1_sol);
    double scale = 1.0 + p.b.lpNorm<1>() + p.h.lpNorm<1>();
    double threshold = opt.tol_infeasible * scale;
    if (!converged) {
      // A stalled phase-1 can still decide feasibility when its iterate is
      // primal-feasible for the elastic problem and the violation mass is
      // far from the threshold on either side.
      bool iterate_ok = phase1_sol.primal_residual <= 1e-6 * scale;
      bool clearly_feasible = phase1_sol.objective <= 0.1 * threshold;
      // The iterate objective only upper-bounds the violation; certifying
      // infeasibility also needs the duality gap to be comparatively small.
      bool clearly_infeasible = phase1_sol.objective > 10.0 * threshold &&
                                phase1_sol.gap <= 0.5 * phase1_sol.objective;
      if (!iterate_ok || (!clearly_feasible && !clearly_infeasible))
        throw NumericalFailure("phase-1 LP did not converge");
    }
    if (phase1_sol.objective > threshold) {
      Solution out;
      out.status = Status::Infeasible;
      out.objective = std::numeric_limits<double>::infinity();
      return out;
    }
  }
  Solution out;
  if (!detail::solve_pdip(p, opt, out)) {
    // A stalled run may still sit next to the optimal face; polishing from
    // the last iterate recovers it exactly when the active set is right.
    if (detail::polish(p, out)) return out;
    // Retry once with a looser gap before declaring failure.
    Options relaxed = opt;
    relaxed.tol_gap = 1e-8;
    relaxed.tol_feas = 1e-8;
    if (!detail::solve_pdip(p, relaxed, out))
      throw NumericalFailure("interior-point iteration did not converge");
  }
  // Best-effort refinement to linear-solve precision.
  detail::polish(p, out);
  return out;
}

}  // namespace supermod::qp

#endif  // SUPERMOD_SOLVER_HPP
