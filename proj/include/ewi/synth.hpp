#ifndef EWI_SYNTH_HPP
#define EWI_SYNTH_HPP

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ewi/day_series.hpp"
#include "ewi/ledger.hpp"
#include "ewi/volatility.hpp"

namespace ewi {

// Generator spec for planted-structure data. The evolution matrix is a
// rank-k_true product plus relative Gaussian noise: each basis column owns a
// row block with sparse weak cross terms, activations are dense with burst
// regimes, and next-day volatility is the planted non-negative lag
// combination of the risky activations. Column sums of the noiseless matrix
// are constant, so total volume carries no signal.
struct SynthSpec {
  int m = 120;      // matrix rows (users)
  int t = 720;      // days
  int k_true = 10;  // planted rank

  double noise_level = 0.01;  // matrix noise, fraction of the RMS entry

  // Coupling c* (k_true x lag count). Empty -> built internally: the first
  // n_risky factors get uniform positive weights over coupling_lags lags.
  Eigen::MatrixXd coupling;
  int coupling_lags = 2;
  int n_risky = 2;

  // Burst regime schedule: intervals where risky activations are boosted.
  int n_bursts = 12;
  int burst_len_min = 3;
  int burst_len_max = 10;
  double burst_gain = 5.0;

  // Volatility calibration: the coupling is rescaled so that sigma* >= alpha
  // on about extreme_frac of days; sigma noise is relative to alpha.
  double alpha = 0.1;
  double extreme_frac = 0.12;
  double sigma_noise = 0.02;

  double base_volume = 1000.0;  // constant column sum of H*

  std::uint64_t seed = 42;
};

struct SynthData {
  EvolutionMatrix x;           // node encoding, users 0..m-1, days 0..t-1
  std::vector<OhlcBar> bars;   // one bar per day, garman_klass inverts to sigma
  Eigen::MatrixXd w_true;      // m x k_true, columns sum to 1
  Eigen::MatrixXd h_true;      // k_true x t, columns sum to base_volume
  Eigen::MatrixXd c_true;      // k_true x coupling lags, calibrated scale
  DaySeries sigma_true;        // sigma*(s), days 0..t-1
  double alpha = 0.0;          // planted extreme threshold
};

// Deterministic given spec (seed included). Bars satisfy O = C and
// ln(H/L) = sigma*sqrt(2), so garman_klass recovers sigma* exactly.
SynthData generate(const SynthSpec& spec);

}  // namespace ewi

#endif  // EWI_SYNTH_HPP
