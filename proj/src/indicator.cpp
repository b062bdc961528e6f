#include "ewi/indicator.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

#include "ewi/rng.hpp"

namespace ewi {

LaggedDesign build_lagged_design(const Eigen::MatrixXd& reps, int first_day,
                                 const DaySeries& sigma, int delta) {
  if (delta < 1) throw std::invalid_argument("lagged design: delta must be >= 1");
  const int k = static_cast<int>(reps.rows());
  const int n = static_cast<int>(reps.cols());
  if (n <= delta)
    throw std::invalid_argument("lagged design: window shorter than delta + 1");

  LaggedDesign d;
  std::vector<double> targets;
  for (int t = delta - 1; t <= n - 2; ++t) {
    const double target = sigma.value_or_nan(first_day + t + 1);
    if (!std::isfinite(target)) continue;
    d.anchor_cols.push_back(t);
    targets.push_back(target);
  }
  d.A.resize(static_cast<int>(d.anchor_cols.size()), k * delta);
  d.b.resize(static_cast<int>(targets.size()));
  for (int r = 0; r < d.A.rows(); ++r) {
    const int t = d.anchor_cols[r];
    d.b(r) = targets[r];
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < delta; ++l) d.A(r, j * delta + l) = reps(j, t - l);
  }
  return d;
}

Eigen::VectorXd nnls_sparse(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                            double lambda, const SolverOptions& opts) {
  if (a.rows() != b.size())
    throw std::invalid_argument("nnls_sparse: row count mismatch");
  if (!a.allFinite() || !b.allFinite())
    throw std::invalid_argument("nnls_sparse: non-finite input");
  if (lambda < 0.0) throw std::invalid_argument("nnls_sparse: lambda must be >= 0");

  const auto p = a.cols();
  const Eigen::MatrixXd ata = a.transpose() * a;
  const Eigen::VectorXd atb_raw = a.transpose() * b;
  const Eigen::VectorXd atb = atb_raw.cwiseMax(0.0);

  Rng rng(opts.seed);
  const double a_ms = a.size() > 0 ? a.squaredNorm() / a.size() : 0.0;
  const double b_ms = b.size() > 0 ? b.squaredNorm() / b.size() : 0.0;
  const double scale =
      std::sqrt(b_ms / std::max(static_cast<double>(p) * a_ms, opts.denom_floor));
  Eigen::VectorXd c(p);
  for (Eigen::Index i = 0; i < p; ++i) c(i) = scale * rng.uniform01();

  auto objective = [&](const Eigen::VectorXd& v) {
    return 0.5 * (a * v - b).squaredNorm() + lambda * v.sum();
  };

  double prev = objective(c);
  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd denom =
        (ata * c).array() + lambda;
    denom = denom.cwiseMax(opts.denom_floor);
    c = c.cwiseProduct(atb.cwiseQuotient(denom));
    const double obj = objective(c);
    if (prev <= 0.0 || std::abs(prev - obj) <= opts.rel_tol * prev) break;
    prev = obj;
  }
  return c;
}

TrainedEwi train_ewi(const Eigen::MatrixXd& x_train, int first_day,
                     const DaySeries& sigma, int k, int delta, double lambda_enc,
                     double lambda_coeff, const SolverOptions& nmf_opts,
                     const SolverOptions& nnls_opts) {
  if (x_train.cols() <= delta)
    throw std::invalid_argument("train_ewi: training window shorter than delta + 1");

  FactorPair fp = robust_nmf(x_train, k, lambda_enc, nmf_opts);
  const LaggedDesign d = build_lagged_design(fp.H, first_day, sigma, delta);
  if (d.A.rows() == 0)
    throw std::invalid_argument("train_ewi: no anchors with a volatility target");

  const Eigen::VectorXd c = nnls_sparse(d.A, d.b, lambda_coeff, nnls_opts);

  TrainedEwi out;
  out.model.W = std::move(fp.W);
  out.model.k = k;
  out.model.delta = delta;
  out.model.lambda_enc = lambda_enc;
  out.model.lambda_coeff = lambda_coeff;
  out.model.coeff.resize(k, delta);
  for (int j = 0; j < k; ++j)
    for (int l = 0; l < delta; ++l) out.model.coeff(j, l) = c(j * delta + l);
  out.h_train = std::move(fp.H);
  out.nmf_objective = fp.objective;
  out.nmf_iterations = fp.iterations;
  return out;
}

double eta(const EwiModel& model, const Eigen::MatrixXd& h, int t) {
  if (t < model.delta - 1 || t >= h.cols())
    throw std::invalid_argument("eta: insufficient encoding history");
  double v = 0.0;
  for (int j = 0; j < model.k; ++j)
    for (int l = 0; l < model.delta; ++l) v += model.coeff(j, l) * h(j, t - l);
  return v;
}

SvdLrModel train_svd_lr(const Eigen::MatrixXd& x_train, int first_day,
                        const DaySeries& sigma, int k, int delta, double ridge) {
  if (k < 1 || k > std::min(x_train.rows(), x_train.cols()))
    throw std::invalid_argument("train_svd_lr: rank out of range");
  if (ridge < 0.0) throw std::invalid_argument("train_svd_lr: ridge must be >= 0");

  SvdLrModel m;
  m.k = k;
  m.delta = delta;
  m.ridge = ridge;
  m.basis = svd(x_train).U.leftCols(k);

  // Training representations: U_k' X equals the singular-value-scaled right
  // singular rows of the window.
  const Eigen::MatrixXd reps = m.basis.transpose() * x_train;
  const LaggedDesign d = build_lagged_design(reps, first_day, sigma, delta);
  if (d.A.rows() == 0)
    throw std::invalid_argument("train_svd_lr: no anchors with a volatility target");

  m.feat_mean = d.A.colwise().mean();
  Eigen::MatrixXd centered = d.A.rowwise() - m.feat_mean.transpose();
  m.feat_scale = (centered.colwise().squaredNorm() /
                  static_cast<double>(d.A.rows()))
                     .cwiseSqrt()
                     .transpose()
                     .cwiseMax(1e-12);
  const Eigen::MatrixXd z = centered * m.feat_scale.cwiseInverse().asDiagonal();

  m.intercept = d.b.mean();
  const Eigen::VectorXd yc = d.b.array() - m.intercept;
  const auto p = z.cols();
  const Eigen::MatrixXd gram =
      z.transpose() * z + ridge * Eigen::MatrixXd::Identity(p, p);
  m.coef = gram.ldlt().solve(z.transpose() * yc);
  return m;
}

Eigen::MatrixXd svd_lr_representations(const SvdLrModel& model,
                                       const Eigen::MatrixXd& cols) {
  if (cols.rows() != model.basis.rows())
    throw std::invalid_argument("svd_lr_representations: row count mismatch");
  return model.basis.transpose() * cols;
}

double svd_lr_score(const SvdLrModel& model, const Eigen::MatrixXd& reps,
                    int t) {
  if (t < model.delta - 1 || t >= reps.cols())
    throw std::invalid_argument("svd_lr_score: insufficient history");
  double v = model.intercept;
  for (int j = 0; j < model.k; ++j)
    for (int l = 0; l < model.delta; ++l) {
      const int f = j * model.delta + l;
      const double zf = (reps(j, t - l) - model.feat_mean(f)) / model.feat_scale(f);
      v += model.coef(f) * zf;
    }
  return v;
}

}  // namespace ewi
