#ifndef EWI_VOLATILITY_HPP
#define EWI_VOLATILITY_HPP

#include <cstdint>
#include <vector>

#include "ewi/day_series.hpp"

namespace ewi {

// One daily price bar. Prices must be positive with low <= open,close <= high.
struct OhlcBar {
  int day = 0;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;

  bool valid() const;
};

// Binary ground truth for one (alpha, horizon) setting. labels[i] marks the
// future segment [anchors[i]+1, anchors[i]+horizon] as extreme (1) or calm (0).
struct GroundTruthLabels {
  double alpha = 0.0;
  int horizon = 0;
  std::vector<int> anchors;
  std::vector<std::uint8_t> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

// Range-based daily volatility
//   sigma^2 = 1/2 ln(H/L)^2 - (2 ln 2 - 1) ln(C/O)^2,
// returned as sigma. The bar invariants bound sigma^2 below by
// (1.5 - 2 ln 2) ln(H/L)^2 >= 0. Throws on an invalid bar.
double garman_klass(const OhlcBar& bar);

// Per-day volatility over the bars' day span; days without a bar are NaN.
// Throws on empty input or two bars sharing a day.
DaySeries garman_klass_series(const std::vector<OhlcBar>& bars);

// Labels every anchor t whose future segment [t+1, t+horizon] lies inside the
// series and has no missing days: 1 when any sigma in the segment reaches
// alpha, else 0. Throws when the series is shorter than horizon + 1 days.
GroundTruthLabels label_extremes(const DaySeries& sigma, double alpha,
                                 int horizon);

// Fraction of positive labels (the PR AUC of a random classifier). Throws on
// an empty label set.
double positive_rate(const GroundTruthLabels& labels);

// Elementwise market/blockchain volume ratio over a shared day range. Days
// where the denominator is zero (or either side is missing) come back NaN.
// Throws when the two series are not aligned to the same days.
DaySeries volume_ratio(const DaySeries& market, const DaySeries& blockchain);

}  // namespace ewi

#endif  // EWI_VOLATILITY_HPP
