#include "ewi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ewi/errors.hpp"
#include "ewi/rng.hpp"

namespace ewi {

namespace {

void validate(const SynthSpec& s) {
  if (s.m < 1 || s.t < 1 || s.k_true < 1)
    throw ConfigError("synth: dimensions must be >= 1");
  if (s.k_true > s.m) throw ConfigError("synth: k_true exceeds row count");
  if (s.noise_level < 0.0) throw ConfigError("synth: noise_level must be >= 0");
  if (s.coupling.size() > 0) {
    if (s.coupling.rows() != s.k_true)
      throw ConfigError("synth: coupling must have k_true rows");
    if ((s.coupling.array() < 0.0).any())
      throw ConfigError("synth: coupling must be non-negative");
  } else {
    if (s.coupling_lags < 1 || s.n_risky < 1 || s.n_risky > s.k_true)
      throw ConfigError("synth: bad default coupling shape");
  }
  if (s.burst_len_min < 1 || s.burst_len_max < s.burst_len_min ||
      s.n_bursts < 0 || s.burst_gain < 1.0)
    throw ConfigError("synth: bad burst schedule");
  if (s.burst_len_max >= s.t) throw ConfigError("synth: bursts longer than series");
  if (s.alpha <= 0.0 || s.extreme_frac <= 0.0 || s.extreme_frac >= 1.0)
    throw ConfigError("synth: alpha must be > 0 and extreme_frac in (0,1)");
  if (s.sigma_noise < 0.0) throw ConfigError("synth: sigma_noise must be >= 0");
  if (s.base_volume <= 0.0) throw ConfigError("synth: base_volume must be > 0");
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);

  const int m = spec.m, t = spec.t, k = spec.k_true;

  // Basis: each factor owns a contiguous row block with strong entries, plus
  // sparse weak cross terms; columns normalized to sum 1 so column sums of
  // W*H* equal the column sums of H*.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, k);
  for (int j = 0; j < k; ++j) {
    const int lo = j * m / k;
    const int hi = (j + 1) * m / k;
    for (int i = 0; i < m; ++i) {
      if (i >= lo && i < hi)
        w(i, j) = rng.uniform(0.5, 1.5);
      else if (rng.uniform01() <= 0.05)
        w(i, j) = rng.uniform(0.0, 0.1);
    }
    const double sum = w.col(j).sum();
    if (sum <= 0.0) w(lo, j) = 1.0;  // unreachable for hi > lo, defensive
    w.col(j) /= w.col(j).sum();
  }

  // Burst schedule over the day axis.
  std::vector<bool> burst(static_cast<size_t>(t), false);
  for (int b = 0; b < spec.n_bursts; ++b) {
    const int len = rng.uniform_int(spec.burst_len_min, spec.burst_len_max);
    const int start = rng.uniform_int(0, t - len);
    for (int s = start; s < start + len; ++s) burst[static_cast<size_t>(s)] = true;
  }

  // Activations: risky factors are boosted during bursts, then every column
  // is rescaled to the constant base volume.
  Eigen::MatrixXd h(k, t);
  for (int s = 0; s < t; ++s) {
    for (int j = 0; j < k; ++j) {
      double act = rng.uniform(0.5, 1.5);
      if (burst[static_cast<size_t>(s)] && j < spec.n_risky)
        act *= spec.burst_gain;
      h(j, s) = act;
    }
    h.col(s) *= spec.base_volume / h.col(s).sum();
  }

  // Coupling: default support on the risky factors over the first lags.
  Eigen::MatrixXd c = spec.coupling;
  if (c.size() == 0) {
    c = Eigen::MatrixXd::Zero(k, spec.coupling_lags);
    for (int j = 0; j < spec.n_risky; ++j)
      for (int l = 0; l < spec.coupling_lags; ++l)
        c(j, l) = rng.uniform(0.5, 1.0);
  }
  const int lags = static_cast<int>(c.cols());

  // Raw planted volatility; lag indices clamp at day 0 so the series is
  // defined everywhere.
  Eigen::VectorXd sigma_raw(t);
  for (int s = 0; s < t; ++s) {
    double v = 0.0;
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < lags; ++l)
        v += c(j, l) * h(j, std::max(s - 1 - l, 0));
    sigma_raw(s) = v;
  }

  // Calibrate so sigma* >= alpha on about extreme_frac of days: scale the
  // coupling (and with it sigma) to put the (1 - extreme_frac) quantile at
  // alpha.
  std::vector<double> sorted(sigma_raw.data(), sigma_raw.data() + t);
  std::sort(sorted.begin(), sorted.end());
  const auto qi = static_cast<size_t>(
      std::clamp((1.0 - spec.extreme_frac) * (t - 1), 0.0, double(t - 1)));
  const double q = sorted[qi];
  if (q <= 0.0)
    throw ConfigError("synth: coupling produces no positive volatility to scale");
  const double scale = spec.alpha / q;
  c *= scale;
  sigma_raw *= scale;

  Eigen::VectorXd sigma(t);
  for (int s = 0; s < t; ++s)
    sigma(s) = std::max(sigma_raw(s) + spec.alpha * spec.sigma_noise * rng.gaussian(),
                        1e-8);

  // Matrix: planted product plus relative noise, clipped at zero.
  Eigen::MatrixXd values = w * h;
  if (spec.noise_level > 0.0) {
    const double rms = std::sqrt(values.squaredNorm() / values.size());
    for (int i = 0; i < m; ++i)
      for (int s = 0; s < t; ++s)
        values(i, s) += spec.noise_level * rms * rng.gaussian();
    values = values.cwiseMax(0.0);
  }

  // Price path; only the intraday range matters to the estimator, since
  // O = C makes the close-to-open term vanish.
  std::vector<OhlcBar> bars(static_cast<size_t>(t));
  double price = 100.0;
  const double half_range = std::sqrt(2.0) / 2.0;
  for (int s = 0; s < t; ++s) {
    auto& bar = bars[static_cast<size_t>(s)];
    bar.day = s;
    bar.open = bar.close = price;
    bar.high = price * std::exp(sigma(s) * half_range);
    bar.low = price * std::exp(-sigma(s) * half_range);
    price *= std::exp(0.005 * rng.gaussian());
  }

  SynthData out;
  out.x.values = std::move(values);
  out.x.encoding = Encoding::node;
  out.x.row_users.resize(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) out.x.row_users[static_cast<size_t>(i)] = i;
  out.x.days.resize(static_cast<size_t>(t));
  for (int s = 0; s < t; ++s) out.x.days[static_cast<size_t>(s)] = s;
  out.bars = std::move(bars);
  out.w_true = std::move(w);
  out.h_true = std::move(h);
  out.c_true = std::move(c);
  out.sigma_true.first_day = 0;
  out.sigma_true.values = std::move(sigma);
  out.alpha = spec.alpha;
  return out;
}

}  // namespace ewi
