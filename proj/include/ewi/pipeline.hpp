#ifndef EWI_PIPELINE_HPP
#define EWI_PIPELINE_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ewi/evaluation.hpp"
#include "ewi/indicator.hpp"
#include "ewi/ledger.hpp"
#include "ewi/linalg.hpp"
#include "ewi/volatility.hpp"

namespace ewi {

// One walk-forward fold. Ranges are offsets into the matrix day axis,
// train = [h_i - M, h_i), holdout = [h_i, h_i + delta).
struct Fold {
  DayRange train;
  DayRange holdout;
};

struct RollingPartition {
  std::vector<Fold> folds;
  int delta = 0;   // holdout length, days
  int m_days = 0;  // training length, days
};

// Holdouts tile [m_days, ...) in delta-day steps; a trailing remainder
// shorter than delta is dropped. Throws when even one fold does not fit.
RollingPartition make_partition(int t_total, int delta = 30, int m_days = 150);

enum class IndicatorKind { nmf_nlr, svd_lr, volume };

std::string to_string(IndicatorKind kind);
IndicatorKind indicator_kind_from(const std::string& name);

struct BacktestParams {
  int k = 10;
  int delta = 5;
  double lambda = 1.0;        // factorization and holdout-encoding weight
  double lambda_coeff = 1.0;  // coefficient sparsity weight
  double ridge = 1.0;         // baseline ridge weight

  int partition_delta = 30;
  int m_days = 150;

  SolverOptions nmf_opts;
  // The coefficient problem is tiny, so it gets a much tighter default stop.
  SolverOptions nnls_opts{2000, 1e-10, 0, 1e-12};

  std::uint64_t seed = 42;
  int threads = 1;
};

struct FoldRun {
  int index = 0;
  Fold fold;           // absolute day ranges
  ScoredLabels scored; // labeled holdout anchors with indicator scores
  // Leakage instrumentation: largest absolute day present in any input
  // handed to the training step. Stays INT_MIN for untrained indicators.
  int max_train_day = std::numeric_limits<int>::min();
};

struct BacktestResult {
  IndicatorKind kind = IndicatorKind::nmf_nlr;
  double alpha = 0.0;
  int h = 0;
  int base_day = 0;  // absolute day of matrix column 0
  RollingPartition partition;
  std::vector<FoldRun> folds;
  PoolResult pool;
  double epsilon = 0.0;    // positive fraction of the pooled evaluation set
  int n_all = 0;           // labeled holdout anchors before degeneracy pruning
  int positives_all = 0;
};

// Walk-forward evaluation of one indicator at one (alpha, h): per fold, fit
// on the training window only (the holdout is scored against the fixed
// trained state), label holdout anchors, and pool. Per-fold solver seeds are
// derived from params.seed and the fold index, so results are independent of
// execution order. Throws on non-contiguous matrix days, price coverage
// gaps, or propagated training failures.
BacktestResult run_backtest(const EvolutionMatrix& x,
                            std::span<const OhlcBar> ohlc, IndicatorKind kind,
                            const BacktestParams& params, double alpha, int h);

struct SweepGrid {
  std::vector<double> alphas = {0.05, 0.1, 0.15, 0.2};
  std::vector<int> hs = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> ks = {10};
  std::vector<int> deltas = {5};
};

struct SweepRow {
  IndicatorKind kind = IndicatorKind::nmf_nlr;
  int k = 0;
  int delta = 0;
  double alpha = 0.0;
  int h = 0;
  int n = 0;          // common labeled anchors over all holdouts
  int positives = 0;
  double epsilon = 0.0;  // positives / n, the random-classifier PR AUC
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  double auc_pr_minus_eps = 0.0;
  int folds_used = 0;
  int folds_degenerate = 0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
};

// One backtest per (kind, k, delta, alpha, h) cell. Scores are computed once
// per (kind, k, delta) and shared across the (alpha, h) grid, which is
// observationally identical because training never sees alpha or h. All
// cells share one anchor set (anchors labelable at max h), so the epsilon
// column is non-decreasing in h and non-increasing in alpha by construction.
// Cells whose anchors contain no positive label get NaN AUCs instead of
// failing the sweep.
SweepTable sensitivity_sweep(const EvolutionMatrix& x,
                             std::span<const OhlcBar> ohlc,
                             const SweepGrid& grid,
                             std::span<const IndicatorKind> kinds,
                             const BacktestParams& params);

}  // namespace ewi

#endif  // EWI_PIPELINE_HPP
