#include "ewi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ewi {

namespace {

// Indices sorted by score descending. Ties keep input order; tie groups are
// collapsed later, so the order within a group does not matter.
std::vector<int> order_by_score(const ScoredLabels& sl) {
  std::vector<int> idx(sl.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return sl.scores[a] > sl.scores[b];
  });
  return idx;
}

void check_finite(const ScoredLabels& sl) {
  for (double s : sl.scores)
    if (!std::isfinite(s))
      throw std::invalid_argument("curve: scores must be finite");
}

}  // namespace

int ScoredLabels::positives() const {
  int p = 0;
  for (auto b : labels) p += b;
  return p;
}

void ScoredLabels::append(const ScoredLabels& other) {
  anchors.insert(anchors.end(), other.anchors.begin(), other.anchors.end());
  scores.insert(scores.end(), other.scores.begin(), other.scores.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

CurveResult roc_curve(const ScoredLabels& sl) {
  const int pos = sl.positives();
  const int neg = sl.negatives();
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc_curve: needs both classes");
  check_finite(sl);

  const auto idx = order_by_score(sl);
  CurveResult out;
  out.curve.points.push_back(
      {std::numeric_limits<double>::infinity(), 0.0, 0.0});

  // The trapezoid term for a tie group is gfp * (tp_before + tp_after) up to
  // the common factor 1 / (2 pos neg). Summing in integers and dividing once
  // keeps the area exactly equal to the rank statistic
  //   (2 * strict wins + ties) / (2 * pos * neg).
  std::int64_t tp = 0, fp = 0;
  std::int64_t area2 = 0;
  int i = 0;
  const int n = sl.size();
  while (i < n) {
    const double thr = sl.scores[idx[i]];
    // consume the whole tie group at this threshold
    std::int64_t gtp = 0, gfp = 0;
    while (i < n && sl.scores[idx[i]] == thr) {
      if (sl.labels[idx[i]]) ++gtp; else ++gfp;
      ++i;
    }
    area2 += gfp * (2 * tp + gtp);
    tp += gtp;
    fp += gfp;
    out.curve.points.push_back({thr, static_cast<double>(fp) / neg,
                                static_cast<double>(tp) / pos});
  }
  out.auc = static_cast<double>(area2) /
            (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return out;
}

CurveResult pr_curve(const ScoredLabels& sl) {
  const int pos = sl.positives();
  if (pos == 0) throw std::invalid_argument("pr_curve: needs a positive label");
  check_finite(sl);

  const auto idx = order_by_score(sl);
  CurveResult out;
  out.curve.points.push_back(
      {std::numeric_limits<double>::infinity(), 0.0, 1.0});

  long tp = 0, fp = 0;
  double ap = 0.0;
  double prev_recall = 0.0;
  int i = 0;
  const int n = sl.size();
  while (i < n) {
    const double thr = sl.scores[idx[i]];
    while (i < n && sl.scores[idx[i]] == thr) {
      if (sl.labels[idx[i]]) ++tp; else ++fp;
      ++i;
    }
    const double recall = static_cast<double>(tp) / pos;
    const double precision = static_cast<double>(tp) / (tp + fp);
    ap += precision * (recall - prev_recall);
    out.curve.points.push_back({thr, recall, precision});
    prev_recall = recall;
  }
  out.auc = ap;
  return out;
}

PoolResult evaluate_fold_pool(std::span<const ScoredLabels> folds) {
  if (folds.empty())
    throw std::invalid_argument("evaluate_fold_pool: empty pool");

  PoolResult out;
  int fold_no = 0;
  for (const auto& f : folds) {
    FoldMetrics m;
    m.fold = fold_no++;
    m.n = f.size();
    m.positives = f.positives();
    m.degenerate = (m.positives == 0 || m.positives == m.n || m.n == 0);
    if (!m.degenerate) {
      m.auc_roc = roc_curve(f).auc;
      m.auc_pr = pr_curve(f).auc;
    }
    out.per_fold.push_back(m);
    if (m.positives > 0) out.pooled.append(f);
  }
  if (out.pooled.size() == 0)
    throw std::invalid_argument("evaluate_fold_pool: no usable folds");
  out.roc = roc_curve(out.pooled);
  out.pr = pr_curve(out.pooled);
  return out;
}

}  // namespace ewi
