#pragma once

// Small dense convex solvers over real vectors:
//
//   minimise  (q/2) ||x||^2 + sum_j w_j ||A_j x||   subject to  G x <= h.
//
// Pure quadratic programs go through a dual active-set method (Goldfarb and
// Idnani), which is exact up to rounding and certifies infeasibility. Programs
// with norm terms are solved on their epigraph form, one extra variable t_j
// per norm with the cone constraint ||A_j x|| <= t_j, by a primal log-barrier
// interior-point method. TwoNormSolver handles the special case
// w1 ||x|| + w2 ||A x|| much faster by reducing it to a one-dimensional root
// search over a family of exactly solved quadratic programs.

#include <string_view>
#include <vector>

#include "plsec/numerics.hpp"

namespace plsec {

enum class SolveStatus { kOptimal, kInfeasible, kMaxIter };

std::string_view to_string(SolveStatus s);

struct NormTerm {
  double weight = 1.0;
  RMatrix A;
};

struct ConeProgram {
  double quad_weight = 1.0;  ///< q in (q/2)||x||^2; may be 0 with norm terms.
  std::vector<NormTerm> norms;
  RMatrix G;  ///< m x n, may have zero rows.
  RVector h;  ///< m

  int dim() const { return static_cast<int>(G.cols()); }
  double objective(const RVector& x) const;
};

struct SolverOptions {
  double tolerance = 1e-6;   ///< KKT residual bound for kOptimal.
  int max_iterations = 10000;
};

struct CqpResult {
  RVector x;
  RVector multipliers;  ///< One per row of G, >= 0.
  double objective = 0.0;
  SolveStatus status = SolveStatus::kMaxIter;
  double primal_residual = 0.0;   ///< max(0, max_i (Gx - h)_i)
  double dual_residual = 0.0;     ///< inf-norm of the stationarity residual
  double complementarity = 0.0;   ///< max_i lambda_i |(Gx - h)_i|
  int iterations = 0;
};

/// Solves a ConeProgram. Quadratic-only programs require quad_weight > 0.
CqpResult solve_cqp(const ConeProgram& prog, const SolverOptions& opts = {});

/// min (1/2) x^T Q x s.t. G x <= h with Q symmetric positive definite.
CqpResult solve_qp(const RMatrix& Q, const RMatrix& G, const RVector& h,
                   const SolverOptions& opts = {});

/// min (1/2)||x||^2 s.t. G x <= h (least-distance program).
CqpResult solve_ldp(const RMatrix& G, const RVector& h,
                    const SolverOptions& opts = {});

/// Epigraph log-barrier route for programs with norm terms.
CqpResult solve_cqp_barrier(const ConeProgram& prog,
                            const SolverOptions& opts = {});

/// Stationarity residual of prog at (x, multipliers); for norm terms with
/// A_j x == 0 the subgradient is taken as zero.
double stationarity_residual(const ConeProgram& prog, const RVector& x,
                             const RVector& multipliers);

/// Solves min w1 ||x|| + w2 ||A x|| s.t. G x <= h for many (G, h) sharing A.
///
/// For a fixed ratio rho the program min (1/2) x^T (I + rho A^T A) x has a
/// unique solution x(rho); the sum-of-norms optimum is x(rho*) with
/// rho* = (w2/w1) ||x(rho*)|| / ||A x(rho*)||, located by a bracketed root
/// search. Optima with A x = 0 are detected up front through the null space
/// of A and certified by a subgradient bound.
class TwoNormSolver {
 public:
  TwoNormSolver(RMatrix A, double w1 = 1.0, double w2 = 1.0);

  CqpResult solve(const RMatrix& G, const RVector& h,
                  const SolverOptions& opts = {}) const;

  /// Solution of the quadratic member of the family at ratio rho.
  CqpResult solve_weighted(const RMatrix& G, const RVector& h, double rho,
                           const SolverOptions& opts = {}) const;

  const RMatrix& A() const { return A_; }

 private:
  struct Eval;
  Eval evaluate(const RMatrix& GV, const RVector& h, double rho,
                std::vector<int>* warm, const SolverOptions& opts) const;
  CqpResult finish(const RMatrix& G, const RVector& h, RVector x,
                   RVector lambda, int iterations) const;

  RMatrix A_;
  double w1_;
  double w2_;
  RMatrix ata_;
  RMatrix V_;          // eigenvectors of A^T A
  RVector lambda_;     // eigenvalues, ascending
  RMatrix null_basis_;
  Eigen::ColPivHouseholderQR<RMatrix> at_qr_;  // QR of A^T
};

}  // namespace plsec
