#include "ewi/linalg.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "ewi/rng.hpp"

namespace ewi {

namespace {

// Column reweighting 1/sqrt(column sum of squares), radicand clamped below.
Eigen::VectorXd inv_col_norms(const Eigen::MatrixXd& a, double floor) {
  return a.colwise().squaredNorm().transpose().cwiseMax(floor).cwiseSqrt().cwiseInverse();
}

void check_nmf_dims(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                    const Eigen::MatrixXd& h) {
  if (w.rows() != x.rows() || h.cols() != x.cols() || w.cols() != h.rows())
    throw std::invalid_argument("nmf: inconsistent factor dimensions");
}

Eigen::MatrixXd seeded_uniform(Eigen::Index rows, Eigen::Index cols,
                               double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.uniform01();
  return m;
}

// H half-step for min ||X - WH||_21 + lambda ||H||_21 with W fixed.
void update_h(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
              Eigen::MatrixXd& h, double lambda, double floor) {
  const Eigen::VectorXd d1 = inv_col_norms(x - w * h, floor);
  const Eigen::VectorXd d2 = inv_col_norms(h, floor);
  const Eigen::MatrixXd numer = (w.transpose() * x) * d1.asDiagonal();
  Eigen::MatrixXd denom =
      (w.transpose() * w) * h * d1.asDiagonal() + lambda * h * d2.asDiagonal();
  denom = denom.cwiseMax(floor);
  h = h.cwiseProduct(numer.cwiseQuotient(denom));
}

// W half-step with H fixed; lambda does not enter (the penalty is on H only).
void update_w(const Eigen::MatrixXd& x, Eigen::MatrixXd& w,
              const Eigen::MatrixXd& h, double floor) {
  const Eigen::VectorXd d1 = inv_col_norms(x - w * h, floor);
  const Eigen::MatrixXd hd1t = (h * d1.asDiagonal()).transpose();
  const Eigen::MatrixXd numer = x * hd1t;
  Eigen::MatrixXd denom = w * (h * hd1t);
  denom = denom.cwiseMax(floor);
  w = w.cwiseProduct(numer.cwiseQuotient(denom));
}

}  // namespace

double nmf_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                     const Eigen::MatrixXd& h, double lambda) {
  check_nmf_dims(x, w, h);
  return norm_l21(x - w * h) + lambda * norm_l21(h);
}

void nmf_step(const Eigen::MatrixXd& x, Eigen::MatrixXd& w, Eigen::MatrixXd& h,
              double lambda, double denom_floor) {
  check_nmf_dims(x, w, h);
  update_h(x, w, h, lambda, denom_floor);
  update_w(x, w, h, denom_floor);
}

FactorPair robust_nmf(const Eigen::MatrixXd& x, int k, double lambda,
                      const SolverOptions& opts) {
  if (!x.allFinite() || x.minCoeff() < 0.0)
    throw std::invalid_argument("robust_nmf: X must be finite and non-negative");
  if (k < 1 || k > std::min(x.rows(), x.cols()))
    throw std::invalid_argument("robust_nmf: rank out of range");

  Rng rng(opts.seed);
  FactorPair fp;
  fp.k = k;
  fp.lambda = lambda;
  // Start at the data's magnitude: mean(WH) ~ k * E[w] * E[h] = mean(X) when
  // both factors are uniform scaled by sqrt(mean(X)/k) (up to the 1/4 from
  // the two uniform means, which the first steps absorb).
  const double scale = std::sqrt(x.mean() / static_cast<double>(k));
  fp.W = seeded_uniform(x.rows(), k, scale, rng);
  fp.H = seeded_uniform(k, x.cols(), scale, rng);

  double prev = nmf_objective(x, fp.W, fp.H, lambda);
  for (int it = 0; it < opts.max_iters; ++it) {
    nmf_step(x, fp.W, fp.H, lambda, opts.denom_floor);
    fp.iterations = it + 1;
    const double obj = nmf_objective(x, fp.W, fp.H, lambda);
    if (prev <= 0.0 || std::abs(prev - obj) <= opts.rel_tol * prev) {
      prev = obj;
      break;
    }
    prev = obj;
  }
  fp.objective = prev;
  return fp;
}

Eigen::MatrixXd encode_fixed_basis(const Eigen::MatrixXd& v,
                                   const Eigen::MatrixXd& w, double lambda,
                                   const SolverOptions& opts) {
  if (v.rows() != w.rows())
    throw std::invalid_argument("encode_fixed_basis: V rows must match basis rows");
  const auto k = w.cols();

  Rng rng(opts.seed);
  const double scale = std::sqrt(v.mean() / static_cast<double>(k));
  Eigen::MatrixXd h = seeded_uniform(k, v.cols(), scale, rng);

  double prev = nmf_objective(v, w, h, lambda);
  for (int it = 0; it < opts.max_iters; ++it) {
    update_h(v, w, h, lambda, opts.denom_floor);
    const double obj = nmf_objective(v, w, h, lambda);
    if (prev <= 0.0 || std::abs(prev - obj) <= opts.rel_tol * prev) break;
    prev = obj;
  }
  return h;
}

SvdResult svd(const Eigen::MatrixXd& a) {
  if (!a.allFinite()) throw std::invalid_argument("svd: non-finite input");
  Eigen::BDCSVD<Eigen::MatrixXd> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult r;
  r.U = dec.matrixU();
  r.S = dec.singularValues();
  r.Vt = dec.matrixV().transpose();
  return r;
}

int estimate_rank(const Eigen::MatrixXd& a) {
  const Eigen::VectorXd s = svd(a).S;
  const auto n = s.size();
  if (n < 2 || s(0) <= 0.0)
    throw std::invalid_argument("estimate_rank: needs two singular values above the floor");
  const double floor = 1e-10 * s(0);
  Eigen::Index above = 0;
  while (above < n && s(above) > floor) ++above;
  if (above < 2)
    throw std::invalid_argument("estimate_rank: needs two singular values above the floor");

  int best = -1;
  double best_ratio = 0.0;
  const Eigen::Index last = std::min(above, n - 1);
  for (Eigen::Index i = 0; i < last; ++i) {
    const double ratio = s(i + 1) / s(i);
    if (best < 0 || ratio < best_ratio) {
      best = static_cast<int>(i);
      best_ratio = ratio;
    }
  }
  return best + 1;
}

double reconstruction_score(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                            const Eigen::MatrixXd& h) {
  check_nmf_dims(x, w, h);
  const double nx = norm_l21(x);
  if (nx <= 0.0)
    throw std::invalid_argument("reconstruction_score: ||X|| must be positive");
  return (nx - norm_l21(x - w * h)) / nx;
}

}  // namespace ewi
