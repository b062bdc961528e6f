#ifndef EWI_LINALG_HPP
#define EWI_LINALG_HPP

#include <Eigen/Core>
#include <cstdint>

namespace ewi {

// Options for the multiplicative-update solvers.
struct SolverOptions {
  int max_iters = 500;
  double rel_tol = 1e-4;      // stop when the relative objective change drops below this
  std::uint64_t seed = 0;
  double denom_floor = 1e-12; // clamp for denominators and reweighting radicands
};

// Non-negative factorization X ~ W * H.
struct FactorPair {
  Eigen::MatrixXd W;  // M x k basis, columns are basis networks
  Eigen::MatrixXd H;  // k x T encodings, columns are daily representations
  int k = 0;
  double lambda = 0.0;
  int iterations = 0;      // update rounds actually run
  double objective = 0.0;  // final value of the fitted objective
};

// Thin SVD A = U * diag(S) * Vt with S sorted descending.
struct SvdResult {
  Eigen::MatrixXd U;
  Eigen::VectorXd S;
  Eigen::MatrixXd Vt;
};

// L2,1 norm with the per-column convention: sum over columns of the column
// Euclidean norm. Columns are the day snapshots throughout this codebase.
template <typename Derived>
double norm_l21(const Eigen::MatrixBase<Derived>& a) {
  return a.colwise().norm().sum();
}

// ||X - WH||_21 + lambda * ||H||_21. Throws std::invalid_argument on
// dimension mismatch.
double nmf_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                     const Eigen::MatrixXd& h, double lambda);

// One alternating round of the reweighted multiplicative updates: the H
// update followed by the W update, with the diagonal column weights
// d1 = 1/sqrt(residual column sumsq) and d2 = 1/sqrt(H column sumsq)
// refreshed before each half-step. Keeps W, H entrywise non-negative and
// does not increase the objective beyond clamp-scale noise.
void nmf_step(const Eigen::MatrixXd& x, Eigen::MatrixXd& w, Eigen::MatrixXd& h,
              double lambda, double denom_floor);

// Full solver: W, H start i.i.d. uniform scaled by sqrt(mean(X)/k), then
// nmf_step until the relative objective change falls below opts.rel_tol or
// opts.max_iters rounds. Deterministic given opts.seed.
FactorPair robust_nmf(const Eigen::MatrixXd& x, int k, double lambda,
                      const SolverOptions& opts);

// Solves min_{H>=0} ||V - WH||_21 + lambda*||H||_21 for a fixed basis W by
// iterating only the H half-step. Used to encode holdout snapshots against
// a trained basis.
Eigen::MatrixXd encode_fixed_basis(const Eigen::MatrixXd& v,
                                   const Eigen::MatrixXd& w, double lambda,
                                   const SolverOptions& opts);

SvdResult svd(const Eigen::MatrixXd& a);

// Rank estimate: index (1-based) minimising S[i+1]/S[i] over singular values
// above a relative floor of 1e-10 * S[0]; ties resolve to the smallest
// index. Throws when fewer than two singular values clear the floor.
int estimate_rank(const Eigen::MatrixXd& a);

// (||X|| - ||X - WH||) / ||X|| in the L2,1 norm; 1 at exact reconstruction.
// Throws when ||X|| is zero.
double reconstruction_score(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                            const Eigen::MatrixXd& h);

}  // namespace ewi

#endif  // EWI_LINALG_HPP
