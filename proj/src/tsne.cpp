#include "her2flex/tsne.hpp"

#include "her2flex/rng.hpp"

#include <cmath>

namespace her2flex {

namespace {

MatrixD squared_distances(const MatrixD& x) {
  const VectorD sq = x.rowwise().squaredNorm();
  MatrixD d2 = (-2.0 * x * x.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(0.0);
  d2.diagonal().setZero();
  return d2;
}

// Binary search for the per-point precision matching log(perplexity).
MatrixD conditional_p(const MatrixD& d2, double perplexity) {
  const Eigen::Index n = d2.rows();
  MatrixD p = MatrixD::Zero(n, n);
  const double log_perp = std::log(perplexity);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, beta_min = -1e30, beta_max = 1e30;
    VectorD row(n);
    for (int iter = 0; iter < 50; ++iter) {
      double sum = 0.0, dot = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-beta * d2(i, j));
        sum += row(j);
        dot += row(j) * d2(i, j);
      }
      sum = std::max(sum, 1e-300);
      const double entropy = std::log(sum) + beta * dot / sum;
      const double diff = entropy - log_perp;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        beta_min = beta;
        beta = beta_max > 1e29 ? beta * 2.0 : (beta + beta_max) / 2.0;
      } else {
        beta_max = beta;
        beta = beta_min < -1e29 ? beta / 2.0 : (beta + beta_min) / 2.0;
      }
    }
    const double sum = std::max(row.sum(), 1e-300);
    p.row(i) = row.transpose() / sum;
  }
  return p;
}

double kl_divergence(const MatrixD& p, const MatrixD& y) {
  const Eigen::Index n = y.rows();
  const MatrixD d2 = squared_distances(y);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) z += 1.0 / (1.0 + d2(i, j));
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = std::max(1.0 / (1.0 + d2(i, j)) / z, 1e-12);
      if (p(i, j) > 1e-12) kl += p(i, j) * std::log(p(i, j) / q);
    }
  return kl;
}

}  // namespace

TsneResult tsne_embed(const MatrixD& points, const TsneConfig& cfg) {
  const Eigen::Index n = points.rows();
  require(points.cols() >= 2, Errc::dimension_mismatch, "t-SNE input needs D >= 2");
  require(cfg.perplexity > 0 && 3.0 * cfg.perplexity < static_cast<double>(n),
          Errc::perplexity_too_high, "need 3 * perplexity < sample count");

  // Zero-mean and scale the input for conditioning.
  MatrixD x = points.rowwise() - points.colwise().mean();
  const double max_abs = x.cwiseAbs().maxCoeff();
  if (max_abs > 0) x /= max_abs;

  MatrixD p = conditional_p(squared_distances(x), cfg.perplexity);
  p = (p + p.transpose()).eval();
  p /= p.sum();
  p = p.cwiseMax(1e-12);

  Rng rng = make_rng(derive_seed(cfg.seed, 0x75e));
  MatrixD y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = normal<double>(rng, 0.0, 1e-4);

  MatrixD velocity = MatrixD::Zero(n, 2);
  MatrixD gains = MatrixD::Ones(n, 2);
  TsneResult result;
  result.kl_after_exaggeration = -1.0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const bool exaggerate = iter < cfg.exaggeration_iters;
    const double pscale = exaggerate ? cfg.early_exaggeration : 1.0;

    const MatrixD d2 = squared_distances(y);
    MatrixD qnum = (1.0 + d2.array()).inverse();
    qnum.diagonal().setZero();
    const double z = std::max(qnum.sum(), 1e-300);

    MatrixD grad = MatrixD::Zero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(qnum(i, j) / z, 1e-12);
        const double mult = (pscale * p(i, j) - q) * qnum(i, j);
        grad.row(i) += 4.0 * mult * (y.row(i) - y.row(j));
      }
    }

    const double momentum =
        iter < cfg.momentum_switch_iter ? cfg.momentum_initial : cfg.momentum_final;
    for (Eigen::Index i = 0; i < n; ++i)
      for (int d = 0; d < 2; ++d) {
        const bool same_sign = (grad(i, d) > 0) == (velocity(i, d) > 0);
        gains(i, d) = same_sign ? gains(i, d) * 0.8 : gains(i, d) + 0.2;
        gains(i, d) = std::max(gains(i, d), 0.01);
        velocity(i, d) = momentum * velocity(i, d) - cfg.learning_rate * gains(i, d) * grad(i, d);
        y(i, d) += velocity(i, d);
      }
    y.rowwise() -= y.colwise().mean();

    if (iter + 1 == cfg.exaggeration_iters) result.kl_after_exaggeration = kl_divergence(p, y);
  }

  result.kl_final = kl_divergence(p, y);
  if (result.kl_after_exaggeration < 0) result.kl_after_exaggeration = result.kl_final;
  result.embedding = std::move(y);
  return result;
}

}  // namespace her2flex
