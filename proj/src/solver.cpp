#include "plsec/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <boost/math/tools/roots.hpp>

#include "plsec/errors.hpp"

namespace plsec {

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kMaxIter: return "max-iter";
  }
  return "unknown";
}

double ConeProgram::objective(const RVector& x) const {
  double f = 0.5 * quad_weight * x.squaredNorm();
  for (const auto& t : norms) f += t.weight * (t.A * x).norm();
  return f;
}

double stationarity_residual(const ConeProgram& prog, const RVector& x,
                             const RVector& multipliers) {
  RVector grad = prog.quad_weight * x;
  for (const auto& t : prog.norms) {
    const RVector ax = t.A * x;
    const double nrm = ax.norm();
    if (nrm > 0.0) grad += t.weight * (t.A.transpose() * ax) / nrm;
  }
  if (prog.G.rows() > 0) grad += prog.G.transpose() * multipliers;
  return grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void fill_feasibility(const RMatrix& G, const RVector& h, CqpResult& r) {
  r.primal_residual = 0.0;
  r.complementarity = 0.0;
  if (G.rows() == 0) return;
  const RVector slack = G * r.x - h;
  r.primal_residual = std::max(0.0, slack.maxCoeff());
  r.complementarity = (r.multipliers.array() * slack.array().abs()).maxCoeff();
}

bool within(const CqpResult& r, double tol) {
  return r.primal_residual < tol && r.dual_residual < tol &&
         r.complementarity < tol;
}

struct Givens {
  double c = 1.0;
  double s = 0.0;
  double r = 0.0;
  Givens(double a, double b) : r(std::hypot(a, b)) {
    if (r > 0.0) {
      c = a / r;
      s = b / r;
    }
  }
  // Rotates the pair (u, v) so that (a, b) would map to (r, 0).
  void apply(double& u, double& v) const {
    const double nu = c * u + s * v;
    v = -s * u + c * v;
    u = nu;
  }
};

void rotate_columns(RMatrix& J, Eigen::Index i, Eigen::Index j, const Givens& g) {
  for (Eigen::Index k = 0; k < J.rows(); ++k) g.apply(J(k, i), J(k, j));
}

struct DualActiveSetOutcome {
  RVector x;
  RVector lambda;
  std::vector<int> active;
  SolveStatus status = SolveStatus::kMaxIter;
  int iterations = 0;
};

// Goldfarb-Idnani dual active-set method for
//   min (1/2) x^T Q x  s.t.  G x <= h,
// given J0 with J0^T Q J0 = I. Invariant: J^T N = [R; 0] where N holds the
// inward normals -G_i^T of the active rows.
DualActiveSetOutcome dual_active_set(const RMatrix& J0, const RMatrix& G,
                                     const RVector& h, int max_iterations) {
  const Eigen::Index n = J0.rows();
  const Eigen::Index m = G.rows();
  DualActiveSetOutcome out;
  out.x = RVector::Zero(n);
  out.lambda = RVector::Zero(m);

  RMatrix J = J0;
  RMatrix R = RMatrix::Zero(n, n);
  RVector u = RVector::Zero(n);
  std::vector<int> active;
  std::vector<char> is_active(static_cast<std::size_t>(m), 0);
  RVector row_norm(m);
  for (Eigen::Index i = 0; i < m; ++i) row_norm[i] = G.row(i).norm();
  RVector& x = out.x;
  RVector d(n), z(n);

  auto drop = [&](Eigen::Index l) {
    const auto q = static_cast<Eigen::Index>(active.size());
    is_active[active[l]] = 0;
    active.erase(active.begin() + l);
    for (Eigen::Index j = l; j + 1 < q; ++j) {
      R.col(j) = R.col(j + 1);
      u[j] = u[j + 1];
    }
    R.col(q - 1).setZero();
    u[q - 1] = 0.0;
    // R is now upper Hessenberg from column l on; restore triangular form.
    for (Eigen::Index j = l; j + 1 < q; ++j) {
      const Givens g(R(j, j), R(j + 1, j));
      if (g.r == 0.0) continue;
      for (Eigen::Index k = j; k < q - 1; ++k) g.apply(R(j, k), R(j + 1, k));
      R(j + 1, j) = 0.0;
      rotate_columns(J, j, j + 1, g);
    }
  };

  while (true) {
    // Most violated inactive constraint, normalised by its row norm.
    Eigen::Index p = -1;
    double worst = 0.0;
    const double xnorm = x.norm();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (is_active[i] || row_norm[i] == 0.0) continue;
      const double s = h[i] - G.row(i).dot(x);
      const double scale = 1.0 + std::abs(h[i]) + row_norm[i] * xnorm;
      if (s < -1e-13 * scale && s / row_norm[i] < worst) {
        worst = s / row_norm[i];
        p = i;
      }
    }
    if (p < 0) {
      // Zero rows with negative h can never be satisfied.
      for (Eigen::Index i = 0; i < m; ++i) {
        if (row_norm[i] == 0.0 && h[i] < 0.0) {
          out.status = SolveStatus::kInfeasible;
          out.active = active;
          return out;
        }
      }
      out.status = SolveStatus::kOptimal;
      break;
    }
    const RVector np = -G.row(p).transpose();
    double up = 0.0;

    while (true) {
      if (++out.iterations > max_iterations) {
        out.status = SolveStatus::kMaxIter;
        out.active = active;
        return out;
      }
      const auto q = static_cast<Eigen::Index>(active.size());
      d.noalias() = J.transpose() * np;
      const double d2 = d.tail(n - q).squaredNorm();
      z.noalias() = J.rightCols(n - q) * d.tail(n - q);
      RVector r = R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

      double t1 = kInf;
      Eigen::Index l = -1;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (r[j] > 0.0) {
          const double ratio = u[j] / r[j];
          if (ratio < t1) {
            t1 = ratio;
            l = j;
          }
        }
      }
      double t2 = kInf;
      if (d2 > 1e-14 * d.squaredNorm() && d2 > 0.0) {
        const double slack = np.dot(x) + h[p];  // (n_p^T x - b_p), < 0
        t2 = std::max(0.0, -slack / d2);
      }

      if (t1 == kInf && t2 == kInf) {
        out.status = SolveStatus::kInfeasible;
        out.active = active;
        return out;
      }
      if (t2 == kInf) {
        u.head(q) -= t1 * r;
        up += t1;
        drop(l);
        continue;
      }
      const double t = std::min(t1, t2);
      x += t * z;
      u.head(q) -= t * r;
      up += t;
      if (t2 <= t1) {
        for (Eigen::Index i = n - 1; i > q; --i) {
          if (d[i] == 0.0) continue;
          const Givens g(d[i - 1], d[i]);
          d[i - 1] = g.r;
          d[i] = 0.0;
          rotate_columns(J, i - 1, i, g);
        }
        R.col(q).head(q + 1) = d.head(q + 1);
        u[q] = up;
        active.push_back(static_cast<int>(p));
        is_active[p] = 1;
        break;
      }
      drop(l);
    }
  }

  for (std::size_t j = 0; j < active.size(); ++j) {
    out.lambda[active[j]] = std::max(0.0, u[static_cast<Eigen::Index>(j)]);
  }
  out.active = active;
  return out;
}

CqpResult package_qp(const RMatrix& Q, const RMatrix& G, const RVector& h,
                     DualActiveSetOutcome&& o, const SolverOptions& opts) {
  CqpResult r;
  r.x = std::move(o.x);
  r.multipliers = std::move(o.lambda);
  r.iterations = o.iterations;
  r.objective = 0.5 * r.x.dot(Q * r.x);
  fill_feasibility(G, h, r);
  RVector grad = Q * r.x;
  if (G.rows() > 0) grad += G.transpose() * r.multipliers;
  r.dual_residual = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (o.status == SolveStatus::kOptimal) {
    r.status = within(r, opts.tolerance) ? SolveStatus::kOptimal
                                         : SolveStatus::kMaxIter;
  } else {
    r.status = o.status;
  }
  return r;
}

}  // namespace

CqpResult solve_qp(const RMatrix& Q, const RMatrix& G, const RVector& h,
                   const SolverOptions& opts) {
  if (Q.rows() != Q.cols() || G.cols() != Q.rows() || G.rows() != h.size()) {
    throw DimensionError("solve_qp: inconsistent dimensions");
  }
  if (!G.allFinite() || !h.allFinite()) throw InputError("solve_qp: non-finite data");
  Eigen::LLT<RMatrix> llt(Q);
  if (llt.info() != Eigen::Success) {
    throw DomainError("solve_qp: Q is not positive definite");
  }
  const RMatrix J0 = llt.matrixU().solve(RMatrix::Identity(Q.rows(), Q.cols()));
  return package_qp(Q, G, h, dual_active_set(J0, G, h, opts.max_iterations), opts);
}

CqpResult solve_ldp(const RMatrix& G, const RVector& h, const SolverOptions& opts) {
  if (G.rows() != h.size()) throw DimensionError("solve_ldp: inconsistent dimensions");
  if (!G.allFinite() || !h.allFinite()) throw InputError("solve_ldp: non-finite data");
  const auto n = G.cols();
  const RMatrix I = RMatrix::Identity(n, n);
  return package_qp(I, G, h, dual_active_set(I, G, h, opts.max_iterations), opts);
}

CqpResult solve_cqp(const ConeProgram& prog, const SolverOptions& opts) {
  if (prog.G.rows() != prog.h.size()) {
    throw DimensionError("solve_cqp: G and h disagree");
  }
  if (prog.norms.empty()) {
    if (!(prog.quad_weight > 0.0)) {
      throw ConfigError("solve_cqp: quadratic-only program needs quad_weight > 0");
    }
    const auto n = prog.dim();
    const RMatrix Q = prog.quad_weight * RMatrix::Identity(n, n);
    return solve_qp(Q, prog.G, prog.h, opts);
  }
  return solve_cqp_barrier(prog, opts);
}

// ---------------------------------------------------------------------------
// Log-barrier interior point on the epigraph form.

CqpResult solve_cqp_barrier(const ConeProgram& prog, const SolverOptions& opts) {
  const auto n = static_cast<Eigen::Index>(prog.dim());
  const auto m = prog.G.rows();
  const auto nc = static_cast<Eigen::Index>(prog.norms.size());
  for (const auto& t : prog.norms) {
    if (t.A.cols() != n) throw DimensionError("solve_cqp: norm term width");
    if (!(t.weight > 0.0)) throw ConfigError("solve_cqp: norm weights must be > 0");
  }
  if (!(prog.quad_weight >= 0.0)) throw ConfigError("solve_cqp: quad_weight < 0");

  CqpResult res;
  res.multipliers = RVector::Zero(m);

  // Strictly feasible start: least-distance point of a tightened polytope.
  RVector x0 = RVector::Zero(n);
  if (m > 0) {
    const auto plain = solve_ldp(prog.G, prog.h, opts);
    if (plain.status == SolveStatus::kInfeasible) {
      res.x = plain.x;
      res.status = SolveStatus::kInfeasible;
      res.iterations = plain.iterations;
      return res;
    }
    const double scale = 1.0 + prog.h.cwiseAbs().maxCoeff();
    bool found = false;
    for (double margin = 1e-2 * scale; margin > 1e-10 * scale; margin *= 1e-2) {
      const RVector tight = prog.h.array() - margin;
      const auto r = solve_ldp(prog.G, tight, opts);
      if (r.status == SolveStatus::kOptimal) {
        x0 = r.x;
        found = true;
        break;
      }
    }
    if (!found) {
      // No strict interior: nothing the barrier can do.
      res.x = plain.x;
      res.status = SolveStatus::kMaxIter;
      return res;
    }
  }

  const Eigen::Index nz = n + nc;
  RVector z(nz);
  z.head(n) = x0;
  for (Eigen::Index j = 0; j < nc; ++j) {
    z[n + j] = (prog.norms[j].A * x0).norm() + 1.0;
  }

  auto in_domain = [&](const RVector& v) {
    if (m > 0 && ((prog.h - prog.G * v.head(n)).array() <= 0.0).any()) return false;
    for (Eigen::Index j = 0; j < nc; ++j) {
      const double t = v[n + j];
      if (t <= 0.0 || t * t - (prog.norms[j].A * v.head(n)).squaredNorm() <= 0.0) {
        return false;
      }
    }
    return true;
  };
  auto f0 = [&](const RVector& v) {
    double f = 0.5 * prog.quad_weight * v.head(n).squaredNorm();
    for (Eigen::Index j = 0; j < nc; ++j) f += prog.norms[j].weight * v[n + j];
    return f;
  };
  auto phi = [&](const RVector& v, double t) {
    double val = t * f0(v);
    if (m > 0) val -= (prog.h - prog.G * v.head(n)).array().log().sum();
    for (Eigen::Index j = 0; j < nc; ++j) {
      const double tj = v[n + j];
      val -= std::log(tj * tj - (prog.norms[j].A * v.head(n)).squaredNorm());
    }
    return val;
  };

  const double barrier_count = static_cast<double>(m + 2 * nc);
  double t = 1.0;
  int iterations = 0;
  bool capped = false;
  RVector grad(nz);
  RMatrix hess(nz, nz);
  while (true) {
    for (int newton = 0; newton < 100; ++newton) {
      if (++iterations > opts.max_iterations) {
        capped = true;
        break;
      }
      const RVector x = z.head(n);
      grad.setZero();
      hess.setZero();
      grad.head(n) = t * prog.quad_weight * x;
      hess.topLeftCorner(n, n).diagonal().array() += t * prog.quad_weight;
      if (m > 0) {
        const RVector inv_s = (prog.h - prog.G * x).cwiseInverse();
        grad.head(n) += prog.G.transpose() * inv_s;
        hess.topLeftCorner(n, n) +=
            prog.G.transpose() * inv_s.cwiseAbs2().asDiagonal() * prog.G;
      }
      for (Eigen::Index j = 0; j < nc; ++j) {
        const RMatrix& A = prog.norms[j].A;
        const double tj = z[n + j];
        const RVector uvec = A * x;
        const double D = tj * tj - uvec.squaredNorm();
        grad[n + j] += t * prog.norms[j].weight - 2.0 * tj / D;
        grad.head(n) += A.transpose() * (2.0 / D * uvec);
        hess(n + j, n + j) += -2.0 / D + 4.0 * tj * tj / (D * D);
        const RVector cross = A.transpose() * (-4.0 * tj / (D * D) * uvec);
        hess.block(0, n + j, n, 1) += cross;
        hess.block(n + j, 0, 1, n) += cross.transpose();
        const RVector atu = A.transpose() * uvec;
        hess.topLeftCorner(n, n) += (2.0 / D) * (A.transpose() * A) +
                                    (4.0 / (D * D)) * atu * atu.transpose();
      }
      const RVector step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (!(decrement > 1e-12)) break;
      double alpha = 1.0;
      if (decrement < 1e-6) {
        // Inside the quadratic-convergence region the barrier value is
        // dominated by rounding of t f0; take the pure Newton step.
        const RVector cand = z + step;
        if (in_domain(cand)) {
          z = cand;
          continue;
        }
      }
      const double phi0 = phi(z, t);
      while (alpha > 1e-16) {
        const RVector cand = z + alpha * step;
        if (in_domain(cand) && phi(cand, t) <= phi0 - 0.25 * alpha * decrement) {
          z = cand;
          break;
        }
        alpha *= 0.5;
      }
      if (alpha <= 1e-16) break;
    }
    if (capped || barrier_count / t < 1e-10 || barrier_count == 0.0) break;
    t *= 10.0;
  }

  res.x = z.head(n);
  res.iterations = iterations;

  // 1/(t s_i) loses digits to cancellation in s_i near the boundary, so the
  // barrier estimate only picks the support. Multipliers, and subgradients of
  // norm terms sitting at their kink, come from a least-squares fit of
  // stationarity on that support.
  std::vector<Eigen::Index> support;
  if (m > 0) {
    const RVector estimate = (t * (prog.h - prog.G * res.x).array()).inverse().matrix();
    const double cut = 1e-6 * std::max(1.0, estimate.maxCoeff());
    for (Eigen::Index i = 0; i < m; ++i) {
      if (estimate[i] > cut) support.push_back(i);
    }
  }
  RVector g0 = prog.quad_weight * res.x;
  std::vector<Eigen::Index> kinked;
  Eigen::Index extra = 0;
  for (Eigen::Index j = 0; j < nc; ++j) {
    const auto& term = prog.norms[j];
    const RVector ax = term.A * res.x;
    const double nrm = ax.norm();
    if (nrm <= 1e-7 * std::max(1.0, term.A.norm() * res.x.norm())) {
      kinked.push_back(j);
      extra += term.A.rows();
    } else {
      g0 += term.weight * (term.A.transpose() * ax) / nrm;
    }
  }
  const auto ns = static_cast<Eigen::Index>(support.size());
  RMatrix M(n, ns + extra);
  for (Eigen::Index i = 0; i < ns; ++i) M.col(i) = prog.G.row(support[i]).transpose();
  for (Eigen::Index c = ns; const auto j : kinked) {
    const auto& term = prog.norms[j];
    M.middleCols(c, term.A.rows()) = term.weight * term.A.transpose();
    c += term.A.rows();
  }
  RVector sol = RVector::Zero(M.cols());
  if (M.cols() > 0) sol = M.colPivHouseholderQr().solve(-g0);
  res.multipliers = RVector::Zero(m);
  for (Eigen::Index i = 0; i < ns; ++i) {
    sol[i] = std::max(0.0, sol[i]);
    res.multipliers[support[i]] = sol[i];
  }
  for (Eigen::Index c = ns; const auto j : kinked) {
    const auto rows = prog.norms[j].A.rows();
    const double nrm = sol.segment(c, rows).norm();
    if (nrm > 1.0) sol.segment(c, rows) /= nrm;
    c += rows;
  }
  res.objective = prog.objective(res.x);
  fill_feasibility(prog.G, prog.h, res);
  const RVector resid = g0 + M * sol;
  res.dual_residual = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
  res.status = !capped && within(res, opts.tolerance) ? SolveStatus::kOptimal
                                                      : SolveStatus::kMaxIter;
  return res;
}

// ---------------------------------------------------------------------------
// Sum of two norms via the weighted-QP family.

struct TwoNormSolver::Eval {
  RVector x;
  RVector lambda;
  SolveStatus status = SolveStatus::kMaxIter;
  int iterations = 0;
};

TwoNormSolver::TwoNormSolver(RMatrix A, double w1, double w2)
    : A_(std::move(A)), w1_(w1), w2_(w2) {
  if (!(w1_ > 0.0) || !(w2_ > 0.0)) {
    throw ConfigError("TwoNormSolver: weights must be positive");
  }
  const auto n = A_.cols();
  ata_ = A_.transpose() * A_;
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(ata_);
  V_ = eig.eigenvectors();
  lambda_ = eig.eigenvalues().cwiseMax(0.0);
  const double top = lambda_.size() ? lambda_.maxCoeff() : 0.0;
  Eigen::Index k = 0;
  while (k < n && lambda_[k] <= 1e-10 * std::max(top, 1e-300)) ++k;
  null_basis_ = V_.leftCols(k);
  at_qr_.compute(A_.transpose());
}

TwoNormSolver::Eval TwoNormSolver::evaluate(const RMatrix& GV, const RVector& h,
                                            double rho, std::vector<int>* warm,
                                            const SolverOptions& opts) const {
  const RVector inv_sqrt =
      (1.0 + rho * lambda_.array()).sqrt().inverse().matrix();
  const RMatrix Gt = GV * inv_sqrt.asDiagonal();
  Eval e;

  // Warm start: re-solve on the previous active set and verify KKT exactly.
  if (warm && !warm->empty() &&
      static_cast<Eigen::Index>(warm->size()) <= Gt.cols()) {
    const auto q = static_cast<Eigen::Index>(warm->size());
    RMatrix Gs(q, Gt.cols());
    RVector hs(q);
    for (Eigen::Index i = 0; i < q; ++i) {
      Gs.row(i) = Gt.row((*warm)[i]);
      hs[i] = h[(*warm)[i]];
    }
    Eigen::LDLT<RMatrix> ldlt(Gs * Gs.transpose());
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const RVector lam = -ldlt.solve(hs);
      const RVector y = -Gs.transpose() * lam;
      const RVector slack = Gt * y - h;
      const double scale = 1.0 + h.cwiseAbs().maxCoeff();
      if (lam.allFinite() && lam.minCoeff() >= 0.0 &&
          slack.maxCoeff() <= 1e-12 * scale) {
        e.x = V_ * inv_sqrt.cwiseProduct(y);
        e.lambda = RVector::Zero(h.size());
        for (Eigen::Index i = 0; i < q; ++i) e.lambda[(*warm)[i]] = lam[i];
        e.status = SolveStatus::kOptimal;
        e.iterations = 1;
        return e;
      }
    }
  }

  const RMatrix I = RMatrix::Identity(Gt.cols(), Gt.cols());
  auto o = dual_active_set(I, Gt, h, opts.max_iterations);
  e.x = V_ * inv_sqrt.cwiseProduct(o.x);
  e.lambda = std::move(o.lambda);
  e.status = o.status;
  e.iterations = o.iterations;
  if (warm) *warm = std::move(o.active);
  return e;
}

CqpResult TwoNormSolver::finish(const RMatrix& G, const RVector& h, RVector x,
                                RVector lambda, int iterations) const {
  CqpResult r;
  r.x = std::move(x);
  r.multipliers = std::move(lambda);
  r.iterations = iterations;
  r.objective = w1_ * r.x.norm() + w2_ * (A_ * r.x).norm();
  fill_feasibility(G, h, r);
  return r;
}

CqpResult TwoNormSolver::solve_weighted(const RMatrix& G, const RVector& h,
                                        double rho,
                                        const SolverOptions& opts) const {
  if (G.cols() != A_.cols() || G.rows() != h.size()) {
    throw DimensionError("TwoNormSolver: inconsistent dimensions");
  }
  const RMatrix GV = G * V_;
  auto e = evaluate(GV, h, rho, nullptr, opts);
  CqpResult r;
  r.x = e.x;
  r.multipliers = e.lambda;
  r.iterations = e.iterations;
  r.objective = 0.5 * (r.x.squaredNorm() + rho * (A_ * r.x).squaredNorm());
  fill_feasibility(G, h, r);
  const RVector grad = r.x + rho * (ata_ * r.x) + G.transpose() * r.multipliers;
  r.dual_residual = grad.cwiseAbs().maxCoeff();
  r.status = e.status == SolveStatus::kOptimal
                 ? (within(r, opts.tolerance) ? SolveStatus::kOptimal
                                              : SolveStatus::kMaxIter)
                 : e.status;
  return r;
}

CqpResult TwoNormSolver::solve(const RMatrix& G, const RVector& h,
                               const SolverOptions& opts) const {
  if (G.cols() != A_.cols() || G.rows() != h.size()) {
    throw DimensionError("TwoNormSolver: inconsistent dimensions");
  }
  const double kappa = w2_ / w1_;
  const RMatrix GV = G * V_;
  std::vector<int> warm;
  int iterations = 0;

  auto base = evaluate(GV, h, 0.0, &warm, opts);
  iterations += base.iterations;
  if (base.status != SolveStatus::kOptimal) {
    CqpResult r = finish(G, h, base.x, base.lambda, iterations);
    r.status = base.status;
    return r;
  }
  const double xnorm0 = base.x.norm();
  if (xnorm0 == 0.0) {
    // Origin is feasible and optimal.
    CqpResult r = finish(G, h, base.x, base.lambda, iterations);
    r.multipliers.setZero();
    r.dual_residual = 0.0;
    r.status = within(r, opts.tolerance) ? SolveStatus::kOptimal : SolveStatus::kMaxIter;
    return r;
  }

  // Candidate with A x = 0, certified when a subgradient of ||A x|| of norm
  // at most one closes the stationarity condition.
  auto certify_null = [&](const RVector& x0, const RVector& lam0) -> std::pair<bool, double> {
    const double xn = x0.norm();
    const RVector target = x0 + G.transpose() * lam0;  // = A^T v
    const RVector v = at_qr_.rank() > 0 ? RVector(at_qr_.solve(target))
                                        : RVector::Zero(A_.rows());
    const RVector g = (w1_ / xn) * (target - A_.transpose() * v);
    const bool ok = kappa * xn >= v.norm();
    return {ok, g.cwiseAbs().maxCoeff()};
  };
  if ((A_ * base.x).norm() <= 1e-14 * xnorm0 * std::max(1.0, std::sqrt(lambda_.maxCoeff()))) {
    auto [ok, resid] = certify_null(base.x, base.lambda);
    CqpResult r = finish(G, h, base.x, base.lambda * (w1_ / xnorm0), iterations);
    r.dual_residual = resid;
    r.status = ok && within(r, opts.tolerance) ? SolveStatus::kOptimal : SolveStatus::kMaxIter;
    return r;
  }
  if (null_basis_.cols() > 0) {
    const RMatrix GN = G * null_basis_;
    const RMatrix In = RMatrix::Identity(GN.cols(), GN.cols());
    auto o = dual_active_set(In, GN, h, opts.max_iterations);
    iterations += o.iterations;
    if (o.status == SolveStatus::kOptimal) {
      const RVector x0 = null_basis_ * o.x;
      if (x0.norm() > 0.0) {
        auto [ok, resid] = certify_null(x0, o.lambda);
        if (ok) {
          CqpResult r = finish(G, h, x0, o.lambda * (w1_ / x0.norm()), iterations);
          r.dual_residual = resid;
          r.status = within(r, opts.tolerance) ? SolveStatus::kOptimal
                                               : SolveStatus::kMaxIter;
          return r;
        }
      }
    }
  }

  // Root of g(rho) = rho - kappa ||x(rho)|| / ||A x(rho)|| on a bracket.
  Eval last;
  auto g = [&](double rho) {
    last = evaluate(GV, h, rho, &warm, opts);
    iterations += last.iterations;
    if (last.status != SolveStatus::kOptimal) return std::numeric_limits<double>::quiet_NaN();
    const double ax = (A_ * last.x).norm();
    if (ax == 0.0) return -std::numeric_limits<double>::max();
    return rho - kappa * last.x.norm() / ax;
  };
  double lo = 0.0;
  double glo = -kappa * xnorm0 / (A_ * base.x).norm();
  double hi = -glo;
  double ghi = g(hi);
  int doublings = 0;
  while (ghi < 0.0 && doublings < 200) {
    lo = hi;
    glo = ghi;
    hi *= 2.0;
    ghi = g(hi);
    ++doublings;
  }
  if (!(ghi >= 0.0)) {
    CqpResult r = finish(G, h, last.x, last.lambda, iterations);
    r.status = std::isnan(ghi) ? last.status : SolveStatus::kMaxIter;
    return r;
  }
  double root = hi;
  if (ghi > 0.0) {
    std::uintmax_t max_iter = 200;
    auto tol = [](double a, double b) {
      return std::abs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() *
                                    std::max(std::abs(a), std::abs(b));
    };
    auto bracket = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, max_iter);
    // Report the end with the smaller |g|.
    const double ga = std::abs(g(bracket.first));
    const double gb = std::abs(g(bracket.second));
    root = ga <= gb ? bracket.first : bracket.second;
  }
  last = evaluate(GV, h, root, &warm, opts);
  iterations += last.iterations;
  const double xn = last.x.norm();
  CqpResult r = finish(G, h, last.x, last.lambda * (w1_ / xn), iterations);
  ConeProgram prog;
  prog.quad_weight = 0.0;
  prog.norms = {NormTerm{w1_, RMatrix::Identity(A_.cols(), A_.cols())}, NormTerm{w2_, A_}};
  prog.G = G;
  prog.h = h;
  r.dual_residual = stationarity_residual(prog, r.x, r.multipliers);
  r.status = last.status == SolveStatus::kOptimal && within(r, opts.tolerance)
                 ? SolveStatus::kOptimal
                 : (last.status == SolveStatus::kOptimal ? SolveStatus::kMaxIter
                                                         : last.status);
  return r;
}

}  // namespace plsec
