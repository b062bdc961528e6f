#ifndef EWI_INDICATOR_HPP
#define EWI_INDICATOR_HPP

#include <Eigen/Core>
#include <vector>

#include "ewi/day_series.hpp"
#include "ewi/linalg.hpp"

namespace ewi {

// Fitted non-negative auto-regressed indicator for one training window:
// eta(t) = sum_j sum_l coeff(j, l) * H(j, t - l), all quantities >= 0.
struct EwiModel {
  Eigen::MatrixXd W;      // M x k basis from the training factorization
  Eigen::MatrixXd coeff;  // k x delta, lag l weights column t - l
  int k = 0;
  int delta = 0;
  double lambda_enc = 0.0;
  double lambda_coeff = 0.0;
};

// Ridge regression over SVD representations, the unconstrained baseline.
struct SvdLrModel {
  Eigen::MatrixXd basis;  // M x k left singular vectors of the training window
  Eigen::VectorXd coef;   // k*delta coefficients in standardized feature space
  double intercept = 0.0;
  Eigen::VectorXd feat_mean;
  Eigen::VectorXd feat_scale;
  int k = 0;
  int delta = 0;
  double ridge = 0.0;
};

// Lagged regression instance: one row per anchor day t with full lag history
// and a finite next-day target. Feature f = j * delta + l holds reps(j, t-l).
struct LaggedDesign {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;            // sigma(t + 1)
  std::vector<int> anchor_cols; // column index t per row
};

// Anchors run from delta-1 to n-2 so every target day stays inside the
// window [first_day, first_day + n - 1]; anchors whose target is missing are
// skipped.
LaggedDesign build_lagged_design(const Eigen::MatrixXd& reps, int first_day,
                                 const DaySeries& sigma, int delta);

// Approximately minimizes 0.5*||Ac - b||^2 + lambda * sum(c) over c >= 0 with
// the multiplicative update c <- c .* max(A'b, 0) ./ (A'A c + lambda), all
// denominators floored. Negative entries of A'b clamp to zero, which drives
// the matching coefficients to zero. Deterministic given opts.seed.
Eigen::VectorXd nnls_sparse(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                            double lambda, const SolverOptions& opts);

// Fit result: the model plus the training-window encoding, whose trailing
// columns seed lag histories when scoring starts right after the window.
struct TrainedEwi {
  EwiModel model;
  Eigen::MatrixXd h_train;  // k x n encoding of the training columns
  double nmf_objective = 0.0;
  int nmf_iterations = 0;
};

// Factorizes the training window with robust_nmf, regresses next-day
// volatility on the delta-lagged encodings with nnls_sparse, and returns the
// (W, c) pair. first_day is the absolute day of column 0.
TrainedEwi train_ewi(const Eigen::MatrixXd& x_train, int first_day,
                     const DaySeries& sigma, int k, int delta, double lambda_enc,
                     double lambda_coeff, const SolverOptions& nmf_opts,
                     const SolverOptions& nnls_opts);

// eta(t) from encoding columns t, t-1, ..., t-delta+1. Requires t >= delta-1.
double eta(const EwiModel& model, const Eigen::MatrixXd& h, int t);

// Thresholded prediction, 1 iff value >= theta (boundary inclusive).
inline int predict(double eta_value, double theta) {
  return eta_value >= theta ? 1 : 0;
}

// Raw-volume baseline. AUC metrics are rank based, so the series itself is
// the score; no fitting happens.
inline DaySeries baseline_volume(const DaySeries& v) { return v; }

// Rank-k SVD of the training window; representations are basis' * X columns
// (the singular-value-scaled right singular rows); ridge fit of sigma(t+1) on
// the delta-lagged, train-standardized representations.
SvdLrModel train_svd_lr(const Eigen::MatrixXd& x_train, int first_day,
                        const DaySeries& sigma, int k, int delta, double ridge);

// Representation of arbitrary snapshot columns under the model's fixed basis.
Eigen::MatrixXd svd_lr_representations(const SvdLrModel& model,
                                       const Eigen::MatrixXd& cols);

// Ridge score from representation columns t, t-1, ..., t-delta+1.
double svd_lr_score(const SvdLrModel& model, const Eigen::MatrixXd& reps,
                    int t);

}  // namespace ewi

#endif  // EWI_INDICATOR_HPP
