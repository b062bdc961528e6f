#ifndef EWI_EVALUATION_HPP
#define EWI_EVALUATION_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace ewi {

// Indicator scores paired with ground-truth labels, anchor days kept for
// traceability.
struct ScoredLabels {
  std::vector<int> anchors;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;

  int size() const { return static_cast<int>(scores.size()); }
  int positives() const;
  int negatives() const { return size() - positives(); }
  void append(const ScoredLabels& other);
};

struct CurvePoint {
  double threshold = 0.0;  // classifier fires on score >= threshold
  double x = 0.0;
  double y = 0.0;
};

// Operating points swept from threshold +inf downwards; x is non-decreasing.
struct Curve {
  std::vector<CurvePoint> points;
};

struct CurveResult {
  Curve curve;
  double auc = 0.0;
};

// ROC: x = FPR, y = TPR at every distinct score threshold, area by the
// trapezoidal rule. Tied scores collapse into one segment, which matches
// averaging over tie orderings. Requires at least one positive and one
// negative label.
CurveResult roc_curve(const ScoredLabels& sl);

// Precision-recall: x = recall, y = precision per distinct threshold. The
// area is average precision (sum of precision times recall increments);
// trapezoids are not used because linear interpolation in PR space is
// biased. Requires at least one positive label.
CurveResult pr_curve(const ScoredLabels& sl);

struct FoldMetrics {
  int fold = 0;
  int n = 0;
  int positives = 0;
  bool degenerate = false;  // missing a class, so fold curves are undefined
  double auc_roc = 0.0;
  double auc_pr = 0.0;
};

// Pooled evaluation across holdout folds: concatenates the folds' scored
// labels (folds with no positives are excluded from the pool and flagged),
// computes pooled curves, and reports per-fold AUCs where defined.
struct PoolResult {
  ScoredLabels pooled;
  CurveResult roc;
  CurveResult pr;
  std::vector<FoldMetrics> per_fold;
};

PoolResult evaluate_fold_pool(std::span<const ScoredLabels> folds);

}  // namespace ewi

#endif  // EWI_EVALUATION_HPP
