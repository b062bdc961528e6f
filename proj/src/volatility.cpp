#include "ewi/volatility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ewi {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

bool OhlcBar::valid() const {
  const bool positive = open > 0.0 && high > 0.0 && low > 0.0 && close > 0.0;
  const bool finite = std::isfinite(open) && std::isfinite(high) &&
                      std::isfinite(low) && std::isfinite(close);
  return positive && finite && low <= std::min(open, close) &&
         high >= std::max(open, close);
}

double garman_klass(const OhlcBar& bar) {
  if (!bar.valid()) throw std::invalid_argument("garman_klass: invalid bar");
  const double hl = std::log(bar.high / bar.low);
  const double co = std::log(bar.close / bar.open);
  const double s2 = 0.5 * hl * hl - (2.0 * std::log(2.0) - 1.0) * co * co;
  // s2 >= (1.5 - 2 ln 2) hl^2 >= 0 for a valid bar; the clamp only absorbs
  // last-ulp rounding.
  return std::sqrt(std::max(s2, 0.0));
}

DaySeries garman_klass_series(const std::vector<OhlcBar>& bars) {
  if (bars.empty())
    throw std::invalid_argument("garman_klass_series: no bars");
  int lo = bars.front().day, hi = bars.front().day;
  for (const auto& b : bars) {
    lo = std::min(lo, b.day);
    hi = std::max(hi, b.day);
  }
  DaySeries s;
  s.first_day = lo;
  s.values = Eigen::VectorXd::Constant(hi - lo + 1, kNan);
  for (const auto& b : bars) {
    double& slot = s.values(b.day - lo);
    if (!std::isnan(slot))
      throw std::invalid_argument("garman_klass_series: duplicate day " +
                                  std::to_string(b.day));
    slot = garman_klass(b);
  }
  return s;
}

GroundTruthLabels label_extremes(const DaySeries& sigma, double alpha,
                                 int horizon) {
  if (horizon < 1) throw std::invalid_argument("label_extremes: horizon must be >= 1");
  if (alpha <= 0.0) throw std::invalid_argument("label_extremes: alpha must be positive");
  if (sigma.size() < horizon + 1)
    throw std::invalid_argument("label_extremes: series shorter than horizon + 1");

  GroundTruthLabels out;
  out.alpha = alpha;
  out.horizon = horizon;
  // Anchors t with [t+1, t+horizon] inside the series; segments touching a
  // missing day are dropped rather than imputed.
  for (int t = sigma.first_day - 1; t + horizon <= sigma.last_day(); ++t) {
    bool gap = false;
    bool extreme = false;
    for (int s = t + 1; s <= t + horizon; ++s) {
      const double v = sigma.value_or_nan(s);
      if (!std::isfinite(v)) {
        gap = true;
        break;
      }
      if (v >= alpha) extreme = true;
    }
    if (gap) continue;
    out.anchors.push_back(t);
    out.labels.push_back(extreme ? 1 : 0);
  }
  return out;
}

double positive_rate(const GroundTruthLabels& labels) {
  if (labels.labels.empty())
    throw std::invalid_argument("positive_rate: empty label set");
  double ones = 0.0;
  for (auto b : labels.labels) ones += b;
  return ones / static_cast<double>(labels.labels.size());
}

DaySeries volume_ratio(const DaySeries& market, const DaySeries& blockchain) {
  if (market.first_day != blockchain.first_day ||
      market.size() != blockchain.size())
    throw std::invalid_argument("volume_ratio: misaligned day indices");
  DaySeries out;
  out.first_day = market.first_day;
  out.values = Eigen::VectorXd::Constant(market.size(), kNan);
  for (int i = 0; i < market.size(); ++i) {
    const double vm = market.values(i);
    const double vb = blockchain.values(i);
    if (std::isfinite(vm) && std::isfinite(vb) && vb != 0.0)
      out.values(i) = vm / vb;
  }
  return out;
}

}  // namespace ewi
