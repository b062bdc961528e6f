#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "ewi/rng.hpp"
#include "ewi/volatility.hpp"
#include "oracles.hpp"

using ewi::DaySeries;
using ewi::GroundTruthLabels;
using ewi::OhlcBar;
using ewi::Rng;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

DaySeries series_of(int first_day, std::initializer_list<double> vals) {
  DaySeries s;
  s.first_day = first_day;
  s.values.resize(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double v : vals) s.values(i++) = v;
  return s;
}

}  // namespace

TEST_CASE("range volatility of a single bar") {
  SUBCASE("flat bar has zero volatility") {
    CHECK(ewi::garman_klass({0, 10.0, 10.0, 10.0, 10.0}) == 0.0);
  }

  SUBCASE("matches the closed form on random bars") {
    Rng rng(31);
    for (int rep = 0; rep < 1000; ++rep) {
      const OhlcBar bar = testutil::random_bar(rng, rep);
      REQUIRE(bar.valid());
      const double hl = std::log(bar.high / bar.low);
      const double co = std::log(bar.close / bar.open);
      const double s2 = 0.5 * hl * hl - (2.0 * std::log(2.0) - 1.0) * co * co;
      const double sigma = ewi::garman_klass(bar);
      REQUIRE(sigma == doctest::Approx(std::sqrt(std::max(s2, 0.0)))
                           .epsilon(1e-12));
      // the bar invariants keep the variance non-negative
      const double bound = (1.5 - 2.0 * std::log(2.0)) * hl * hl;
      REQUIRE(s2 >= bound - 1e-15);
      REQUIRE(bound >= 0.0);
    }
  }

  SUBCASE("invariant under price rescaling") {
    Rng rng(32);
    for (int rep = 0; rep < 50; ++rep) {
      OhlcBar bar = testutil::random_bar(rng, rep);
      OhlcBar scaled = bar;
      const double c = rng.uniform(0.01, 100.0);
      scaled.open *= c;
      scaled.high *= c;
      scaled.low *= c;
      scaled.close *= c;
      REQUIRE(ewi::garman_klass(scaled) ==
              doctest::Approx(ewi::garman_klass(bar)).epsilon(1e-12));
    }
  }

  SUBCASE("invalid bars throw") {
    CHECK_THROWS_AS(ewi::garman_klass({0, 10.0, 9.0, 8.0, 9.5}),
                    std::invalid_argument);  // high below open
    CHECK_THROWS_AS(ewi::garman_klass({0, 10.0, 11.0, 10.5, 10.8}),
                    std::invalid_argument);  // low above open
    CHECK_THROWS_AS(ewi::garman_klass({0, -1.0, 2.0, 0.5, 1.0}),
                    std::invalid_argument);  // non-positive price
  }
}

TEST_CASE("per-day volatility series") {
  std::vector<OhlcBar> bars = {
      {5, 10.0, 12.0, 9.0, 11.0},
      {7, 11.0, 11.5, 10.5, 11.2},
      {8, 11.2, 11.2, 11.2, 11.2},
  };
  const DaySeries s = ewi::garman_klass_series(bars);
  CHECK(s.first_day == 5);
  CHECK(s.last_day() == 8);
  CHECK(s.value_or_nan(5) == doctest::Approx(ewi::garman_klass(bars[0])));
  CHECK(!s.has(6));
  CHECK(s.has(7));
  CHECK(s.value_or_nan(8) == 0.0);

  SUBCASE("duplicate days are rejected") {
    bars.push_back({7, 11.0, 11.1, 10.9, 11.0});
    CHECK_THROWS_AS(ewi::garman_klass_series(bars), std::invalid_argument);
  }

  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(ewi::garman_klass_series({}), std::invalid_argument);
  }
}

TEST_CASE("extreme-day labels") {
  SUBCASE("all calm days label zero") {
    const DaySeries sigma = DaySeries::constant(0, 10, 0.01);
    const GroundTruthLabels gt = ewi::label_extremes(sigma, 0.1, 3);
    REQUIRE(gt.size() == 8);  // anchors -1..6, segment must fit inside
    for (int i = 0; i < gt.size(); ++i) REQUIRE(gt.labels[i] == 0);
    CHECK(gt.anchors.front() == -1);
    CHECK(gt.anchors.back() == 6);
  }

  SUBCASE("one spike marks exactly the anchors that can see it") {
    DaySeries sigma = DaySeries::constant(0, 12, 0.01);
    sigma.values(6) = 0.5;  // day 6 extreme
    const int h = 3;
    const GroundTruthLabels gt = ewi::label_extremes(sigma, 0.1, h);
    for (int i = 0; i < gt.size(); ++i) {
      const int t = gt.anchors[i];
      const bool sees = t + 1 <= 6 && 6 <= t + h;
      REQUIRE(static_cast<int>(gt.labels[i]) == (sees ? 1 : 0));
    }
  }

  SUBCASE("horizon one labels each day by its successor") {
    DaySeries sigma = series_of(3, {0.0, 0.3, 0.0, 0.4, 0.0});
    const GroundTruthLabels gt = ewi::label_extremes(sigma, 0.2, 1);
    REQUIRE(gt.size() == 5);
    std::vector<int> expect = {0, 1, 0, 1, 0};
    for (int i = 0; i < 5; ++i)
      REQUIRE(static_cast<int>(gt.labels[i]) == expect[i]);
  }

  SUBCASE("missing days exclude affected anchors") {
    DaySeries sigma = series_of(0, {0.1, kNan, 0.1, 0.1, 0.1});
    const GroundTruthLabels gt = ewi::label_extremes(sigma, 0.5, 2);
    // segments touching day 1 are unusable: anchors -1, 0 drop out
    for (int a : gt.anchors) REQUIRE(a >= 1);
    REQUIRE(gt.size() == 2);  // anchors 1 and 2
  }

  SUBCASE("matches a brute-force enumeration") {
    Rng rng(33);
    for (int rep = 0; rep < 30; ++rep) {
      DaySeries sigma;
      sigma.first_day = rng.uniform_int(-3, 3);
      const int n = rng.uniform_int(8, 24);
      sigma.values.resize(n);
      for (int i = 0; i < n; ++i) {
        if (rng.uniform01() < 0.15)
          sigma.values(i) = kNan;
        else
          sigma.values(i) = rng.uniform(0.0, 0.2);
      }
      const double alpha = rng.uniform(0.02, 0.18);
      const int h = rng.uniform_int(1, 4);
      if (n < h + 1) continue;
      const GroundTruthLabels gt = ewi::label_extremes(sigma, alpha, h);
      const oracle::BruteLabels brute = oracle::label_brute(sigma, alpha, h);
      REQUIRE(gt.anchors == brute.anchors);
      REQUIRE(gt.labels == brute.labels);
    }
  }

  SUBCASE("tightening the threshold never adds positives") {
    Rng rng(34);
    DaySeries sigma;
    sigma.first_day = 0;
    sigma.values.resize(40);
    for (int i = 0; i < 40; ++i) sigma.values(i) = rng.uniform(0.0, 0.3);
    int prev = 41;
    for (double alpha : {0.05, 0.1, 0.15, 0.2, 0.25}) {
      const GroundTruthLabels gt = ewi::label_extremes(sigma, alpha, 3);
      int pos = 0;
      for (auto b : gt.labels) pos += b;
      REQUIRE(pos <= prev);
      prev = pos;
    }
  }

  SUBCASE("series shorter than horizon + 1 throws") {
    const DaySeries sigma = DaySeries::constant(0, 3, 0.1);
    CHECK_THROWS_AS(ewi::label_extremes(sigma, 0.1, 3), std::invalid_argument);
    CHECK_NOTHROW(ewi::label_extremes(sigma, 0.1, 2));
  }
}

TEST_CASE("positive rate") {
  const DaySeries calm = DaySeries::constant(0, 20, 0.01);
  CHECK(ewi::positive_rate(ewi::label_extremes(calm, 0.1, 2)) == 0.0);

  const DaySeries wild = DaySeries::constant(0, 20, 0.5);
  CHECK(ewi::positive_rate(ewi::label_extremes(wild, 0.1, 2)) == 1.0);

  SUBCASE("non-decreasing in the horizon on gapless series") {
    Rng rng(35);
    for (int rep = 0; rep < 20; ++rep) {
      DaySeries sigma;
      sigma.first_day = 0;
      sigma.values.resize(30);
      for (int i = 0; i < 30; ++i) sigma.values(i) = rng.uniform(0.0, 0.3);
      double prev = 0.0;
      for (int h = 1; h <= 6; ++h) {
        const double rate =
            ewi::positive_rate(ewi::label_extremes(sigma, 0.15, h));
        REQUIRE(rate >= prev - 1e-15);
        prev = rate;
      }
    }
  }

  SUBCASE("empty labels throw") {
    GroundTruthLabels gt;
    CHECK_THROWS_AS(ewi::positive_rate(gt), std::invalid_argument);
  }
}

TEST_CASE("volume ratio") {
  SUBCASE("elementwise division on aligned series") {
    const DaySeries m = DaySeries::constant(10, 5, 3.0);
    const DaySeries b = DaySeries::constant(10, 5, 1.0);
    const DaySeries r = ewi::volume_ratio(m, b);
    CHECK(r.first_day == 10);
    REQUIRE(r.size() == 5);
    for (int d = 10; d <= 14; ++d) CHECK(r.value_or_nan(d) == 3.0);

    const DaySeries r2 = ewi::volume_ratio(b, m);
    for (int d = 10; d <= 14; ++d)
      CHECK(r2.value_or_nan(d) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  SUBCASE("zero denominators and gaps become missing days") {
    const DaySeries m = series_of(0, {6.0, 6.0, kNan, 6.0});
    const DaySeries b = series_of(0, {2.0, 0.0, 2.0, 2.0});
    const DaySeries r = ewi::volume_ratio(m, b);
    CHECK(r.value_or_nan(0) == 3.0);
    CHECK(!r.has(1));
    CHECK(!r.has(2));
    CHECK(r.has(3));
  }

  SUBCASE("misaligned series throw") {
    const DaySeries m = DaySeries::constant(0, 5, 1.0);
    const DaySeries b = DaySeries::constant(1, 5, 1.0);
    CHECK_THROWS_AS(ewi::volume_ratio(m, b), std::invalid_argument);
    const DaySeries c = DaySeries::constant(0, 4, 1.0);
    CHECK_THROWS_AS(ewi::volume_ratio(m, c), std::invalid_argument);
  }
}
