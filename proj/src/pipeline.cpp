#include "ewi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "ewi/errors.hpp"
#include "ewi/rng.hpp"

namespace ewi {

RollingPartition make_partition(int t_total, int delta, int m_days) {
  if (delta < 1 || m_days < 1)
    throw std::invalid_argument("make_partition: delta and m_days must be >= 1");
  if (t_total < m_days + delta)
    throw std::invalid_argument(
        "make_partition: need at least m_days + delta days, got " +
        std::to_string(t_total));
  RollingPartition p;
  p.delta = delta;
  p.m_days = m_days;
  for (int h = m_days; h + delta <= t_total; h += delta)
    p.folds.push_back({{h - m_days, h}, {h, h + delta}});
  return p;
}

std::string to_string(IndicatorKind kind) {
  switch (kind) {
    case IndicatorKind::nmf_nlr:
      return "nmf_nlr";
    case IndicatorKind::svd_lr:
      return "svd_lr";
    case IndicatorKind::volume:
      return "volume";
  }
  throw std::logic_error("unknown indicator kind");
}

IndicatorKind indicator_kind_from(const std::string& name) {
  if (name == "nmf_nlr") return IndicatorKind::nmf_nlr;
  if (name == "svd_lr") return IndicatorKind::svd_lr;
  if (name == "volume") return IndicatorKind::volume;
  throw ConfigError("unknown indicator kind: " + name);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Holdout scores of one fold before labels are attached.
struct FoldScores {
  std::vector<int> days;  // absolute anchor days
  std::vector<double> scores;
  int max_train_day = std::numeric_limits<int>::min();
};

void check_contiguous_days(const EvolutionMatrix& x) {
  if (x.days.empty() ||
      x.values.cols() != static_cast<Eigen::Index>(x.days.size()))
    throw DataError("backtest: evolution day axis missing or misaligned");
  for (size_t i = 1; i < x.days.size(); ++i)
    if (x.days[i] != x.days[i - 1] + 1)
      throw DataError("backtest: evolution matrix days must be contiguous");
}

void check_params(const BacktestParams& p) {
  if (p.k < 1) throw ConfigError("backtest: k must be >= 1");
  if (p.delta < 1) throw ConfigError("backtest: delta must be >= 1");
  if (p.lambda < 0.0 || p.lambda_coeff < 0.0 || p.ridge < 0.0)
    throw ConfigError("backtest: penalty weights must be >= 0");
  if (p.partition_delta < 1 || p.m_days < 1)
    throw ConfigError("backtest: partition lengths must be >= 1");
  if (p.m_days <= p.delta)
    throw ConfigError("backtest: training window must exceed delta days");
  if (p.threads < 1) throw ConfigError("backtest: threads must be >= 1");
  for (const auto* o : {&p.nmf_opts, &p.nnls_opts}) {
    if (o->max_iters < 1 || o->rel_tol < 0.0 || o->denom_floor <= 0.0)
      throw ConfigError("backtest: bad solver options");
  }
}

// Sigma restricted to absolute days [begin, end); uncovered days stay NaN,
// so training can only ever see this window.
DaySeries slice_sigma(const DaySeries& sigma, int begin, int end) {
  DaySeries s;
  s.first_day = begin;
  s.values = Eigen::VectorXd::Constant(end - begin, kNaN);
  for (int d = begin; d < end; ++d) s.values(d - begin) = sigma.value_or_nan(d);
  return s;
}

int last_finite_day(const DaySeries& s) {
  for (int d = s.last_day(); d >= s.first_day; --d)
    if (s.has(d)) return d;
  return std::numeric_limits<int>::min();
}

FoldScores score_fold(const EvolutionMatrix& x, const DaySeries& sigma,
                      const Fold& fold, IndicatorKind kind,
                      const BacktestParams& params, std::uint64_t fold_seed) {
  const int base = x.days.front();
  const int n_train = fold.train.length();
  const int n_hold = fold.holdout.length();
  const int delta = params.delta;

  FoldScores out;
  out.days.resize(static_cast<size_t>(n_hold));
  for (int p = 0; p < n_hold; ++p)
    out.days[static_cast<size_t>(p)] = base + fold.holdout.begin + p;
  out.scores.resize(static_cast<size_t>(n_hold));

  if (kind == IndicatorKind::volume) {
    // Total in-universe flow that day; rank metrics make the raw series a
    // score, no fitting involved.
    for (int p = 0; p < n_hold; ++p)
      out.scores[static_cast<size_t>(p)] =
          x.values.col(fold.holdout.begin + p).sum();
    return out;
  }

  const Eigen::MatrixXd x_train =
      x.values.middleCols(fold.train.begin, n_train);
  const Eigen::MatrixXd x_hold =
      x.values.middleCols(fold.holdout.begin, n_hold);
  const int first_abs = base + fold.train.begin;
  const DaySeries sigma_train =
      slice_sigma(sigma, first_abs, base + fold.train.end);

  // Instrumentation: record the extents of what training was handed.
  const int x_last = first_abs + static_cast<int>(x_train.cols()) - 1;
  out.max_train_day = std::max(x_last, last_finite_day(sigma_train));

  // Scoring day t needs delta-1 lag columns, which reach into the training
  // window for early holdout days; those come from the training-time
  // representations.
  Eigen::MatrixXd timeline(params.k, delta - 1 + n_hold);

  if (kind == IndicatorKind::nmf_nlr) {
    SolverOptions nmf_o = params.nmf_opts;
    nmf_o.seed = substream_seed(fold_seed, 0);
    SolverOptions nnls_o = params.nnls_opts;
    nnls_o.seed = substream_seed(fold_seed, 1);
    SolverOptions enc_o = params.nmf_opts;
    enc_o.seed = substream_seed(fold_seed, 2);

    const TrainedEwi trained =
        train_ewi(x_train, first_abs, sigma_train, params.k, delta,
                  params.lambda, params.lambda_coeff, nmf_o, nnls_o);
    const Eigen::MatrixXd h_hold =
        encode_fixed_basis(x_hold, trained.model.W, params.lambda, enc_o);
    if (delta > 1)
      timeline.leftCols(delta - 1) = trained.h_train.rightCols(delta - 1);
    timeline.rightCols(n_hold) = h_hold;
    for (int p = 0; p < n_hold; ++p)
      out.scores[static_cast<size_t>(p)] =
          eta(trained.model, timeline, delta - 1 + p);
  } else {
    const SvdLrModel model = train_svd_lr(x_train, first_abs, sigma_train,
                                          params.k, delta, params.ridge);
    if (delta > 1)
      timeline.leftCols(delta - 1) =
          svd_lr_representations(model, x_train.rightCols(delta - 1));
    timeline.rightCols(n_hold) = svd_lr_representations(model, x_hold);
    for (int p = 0; p < n_hold; ++p)
      out.scores[static_cast<size_t>(p)] =
          svd_lr_score(model, timeline, delta - 1 + p);
  }
  return out;
}

// Runs fn(0..n-1), sequentially or on a small pool; slot writes keep results
// independent of execution order.
void run_indexed(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr err;
  std::mutex err_mu;
  auto body = [&] {
    for (;;) {
      if (failed.load()) return;
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int nw = std::min(threads, n);
  pool.reserve(static_cast<size_t>(nw));
  for (int w = 0; w < nw; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

std::vector<FoldScores> score_all_folds(const EvolutionMatrix& x,
                                        const DaySeries& sigma,
                                        const RollingPartition& part,
                                        IndicatorKind kind,
                                        const BacktestParams& params) {
  std::vector<FoldScores> raw(part.folds.size());
  run_indexed(static_cast<int>(part.folds.size()), params.threads, [&](int i) {
    raw[static_cast<size_t>(i)] = score_fold(
        x, sigma, part.folds[static_cast<size_t>(i)], kind, params,
        substream_seed(params.seed, static_cast<std::uint64_t>(i)));
  });
  return raw;
}

Fold to_absolute(const Fold& fold, int base) {
  return {{base + fold.train.begin, base + fold.train.end},
          {base + fold.holdout.begin, base + fold.holdout.end}};
}

}  // namespace

BacktestResult run_backtest(const EvolutionMatrix& x,
                            std::span<const OhlcBar> ohlc, IndicatorKind kind,
                            const BacktestParams& params, double alpha, int h) {
  check_contiguous_days(x);
  check_params(params);

  const RollingPartition part = make_partition(
      static_cast<int>(x.values.cols()), params.partition_delta, params.m_days);
  const std::vector<OhlcBar> bars(ohlc.begin(), ohlc.end());
  const DaySeries sigma = garman_klass_series(bars);
  const GroundTruthLabels gt = label_extremes(sigma, alpha, h);

  std::map<int, std::uint8_t> label_of;
  for (size_t i = 0; i < gt.anchors.size(); ++i)
    label_of.emplace(gt.anchors[i], gt.labels[i]);

  const int base = x.days.front();
  const auto raw = score_all_folds(x, sigma, part, kind, params);

  BacktestResult r;
  r.kind = kind;
  r.alpha = alpha;
  r.h = h;
  r.base_day = base;
  r.partition = part;

  std::vector<ScoredLabels> per_fold;
  per_fold.reserve(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    ScoredLabels sl;
    for (size_t j = 0; j < raw[i].days.size(); ++j) {
      const auto it = label_of.find(raw[i].days[j]);
      if (it == label_of.end()) continue;
      sl.anchors.push_back(raw[i].days[j]);
      sl.scores.push_back(raw[i].scores[j]);
      sl.labels.push_back(it->second);
    }
    if (sl.size() == 0)
      throw DataError("backtest: no labeled anchors in holdout fold " +
                      std::to_string(i) + " (price coverage gap)");

    FoldRun fr;
    fr.index = static_cast<int>(i);
    fr.fold = to_absolute(part.folds[i], base);
    fr.scored = sl;
    fr.max_train_day = raw[i].max_train_day;
    if (fr.max_train_day >= fr.fold.holdout.begin)
      throw std::logic_error("backtest: training touched holdout data");

    r.n_all += sl.size();
    r.positives_all += sl.positives();
    r.folds.push_back(std::move(fr));
    per_fold.push_back(std::move(sl));
  }

  int pooled_pos = 0, pooled_neg = 0;
  for (const auto& sl : per_fold) {
    const int p = sl.positives();
    if (p == 0) continue;  // excluded from the pool downstream
    pooled_pos += p;
    pooled_neg += sl.negatives();
  }
  if (pooled_pos == 0)
    throw DataError("backtest: no positive labels at alpha=" +
                    std::to_string(alpha) + ", h=" + std::to_string(h));
  if (pooled_neg == 0)
    throw DataError("backtest: pooled evaluation has no negative labels");

  r.pool = evaluate_fold_pool(per_fold);
  r.epsilon = static_cast<double>(r.pool.pooled.positives()) /
              static_cast<double>(r.pool.pooled.size());
  return r;
}

SweepTable sensitivity_sweep(const EvolutionMatrix& x,
                             std::span<const OhlcBar> ohlc,
                             const SweepGrid& grid,
                             std::span<const IndicatorKind> kinds,
                             const BacktestParams& params) {
  check_contiguous_days(x);
  check_params(params);
  if (grid.alphas.empty() || grid.hs.empty() || grid.ks.empty() ||
      grid.deltas.empty())
    throw ConfigError("sweep: every grid axis needs at least one value");
  if (kinds.empty()) throw ConfigError("sweep: no indicator kinds");
  for (double a : grid.alphas)
    if (a <= 0.0) throw ConfigError("sweep: alpha must be > 0");
  for (int hv : grid.hs)
    if (hv < 1) throw ConfigError("sweep: h must be >= 1");

  const RollingPartition part = make_partition(
      static_cast<int>(x.values.cols()), params.partition_delta, params.m_days);
  const std::vector<OhlcBar> bars(ohlc.begin(), ohlc.end());
  const DaySeries sigma = garman_klass_series(bars);
  const int base = x.days.front();

  // One anchor set for every cell: anchors whose segment fits the largest h.
  const int h_max = *std::max_element(grid.hs.begin(), grid.hs.end());
  const GroundTruthLabels widest =
      label_extremes(sigma, grid.alphas.front(), h_max);
  const std::set<int> common(widest.anchors.begin(), widest.anchors.end());

  for (size_t i = 0; i < part.folds.size(); ++i) {
    const Fold abs = to_absolute(part.folds[i], base);
    const auto lo = common.lower_bound(abs.holdout.begin);
    if (lo == common.end() || *lo >= abs.holdout.end)
      throw DataError("sweep: no labelable anchors in holdout fold " +
                      std::to_string(i) + " (price coverage gap)");
  }

  SweepTable table;
  std::uint64_t pass_tag = 0;
  for (const IndicatorKind kind : kinds) {
    for (int k : grid.ks) {
      for (int delta : grid.deltas) {
        BacktestParams cell = params;
        cell.k = k;
        cell.delta = delta;
        cell.seed = substream_seed(params.seed, pass_tag++);
        check_params(cell);
        const auto raw = score_all_folds(x, sigma, part, kind, cell);

        for (double alpha : grid.alphas) {
          for (int h : grid.hs) {
            const GroundTruthLabels gt = label_extremes(sigma, alpha, h);
            std::map<int, std::uint8_t> label_of;
            for (size_t i = 0; i < gt.anchors.size(); ++i)
              if (common.count(gt.anchors[i]))
                label_of.emplace(gt.anchors[i], gt.labels[i]);

            std::vector<ScoredLabels> per_fold;
            per_fold.reserve(raw.size());
            int n = 0, positives = 0;
            for (const auto& fs : raw) {
              ScoredLabels sl;
              for (size_t j = 0; j < fs.days.size(); ++j) {
                const auto it = label_of.find(fs.days[j]);
                if (it == label_of.end()) continue;
                sl.anchors.push_back(fs.days[j]);
                sl.scores.push_back(fs.scores[j]);
                sl.labels.push_back(it->second);
              }
              n += sl.size();
              positives += sl.positives();
              per_fold.push_back(std::move(sl));
            }

            SweepRow row;
            row.kind = kind;
            row.k = k;
            row.delta = delta;
            row.alpha = alpha;
            row.h = h;
            row.n = n;
            row.positives = positives;
            row.epsilon = static_cast<double>(positives) / n;

            int pooled_pos = 0, pooled_neg = 0;
            for (const auto& sl : per_fold) {
              if (sl.positives() == 0) continue;
              pooled_pos += sl.positives();
              pooled_neg += sl.negatives();
            }
            if (pooled_pos == 0 || pooled_neg == 0) {
              // Both classes never meet in any usable fold; curves are
              // undefined for this cell.
              row.auc_roc = row.auc_pr = row.auc_pr_minus_eps = kNaN;
              row.folds_used = 0;
              row.folds_degenerate = static_cast<int>(per_fold.size());
            } else {
              const PoolResult pool = evaluate_fold_pool(per_fold);
              row.auc_roc = pool.roc.auc;
              row.auc_pr = pool.pr.auc;
              row.auc_pr_minus_eps = pool.pr.auc - row.epsilon;
              for (const auto& fm : pool.per_fold) {
                if (fm.degenerate)
                  ++row.folds_degenerate;
                else
                  ++row.folds_used;
              }
            }
            table.rows.push_back(row);
          }
        }
      }
    }
  }
  return table;
}

}  // namespace ewi
