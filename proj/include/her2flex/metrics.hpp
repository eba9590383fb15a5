#pragma once

#include "her2flex/grades.hpp"
#include "her2flex/tensor.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace her2flex {

// Rows index the true grade, columns the predicted grade.
struct ConfusionMatrix {
  Eigen::Matrix<long, kNumGrades, kNumGrades> counts =
      Eigen::Matrix<long, kNumGrades, kNumGrades>::Zero();
  long total() const { return counts.sum(); }
};

ConfusionMatrix confusion(const std::vector<Her2Grade>& truth,
                          const std::vector<Her2Grade>& pred);

struct PerClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  long support = 0;
};

struct MetricsReport {
  double accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  double weighted_f1 = 0;  // support-weighted; reported alongside macro
  std::array<PerClassMetrics, kNumGrades> per_class{};
  std::optional<double> psnr_db;
  std::optional<double> ssim;
};

// Per-class precision/recall with the 0-on-zero-division rule; macro averages
// are unweighted class means; accuracy is trace/total.
MetricsReport prf_metrics(const ConfusionMatrix& cm);

// Peak signal-to-noise ratio in dB over all channels, MAX = 1. Values are
// capped at 99 dB so identical images stay numeric.
template <typename Scalar>
Scalar psnr(const Image<Scalar>& a, const Image<Scalar>& b) {
  require(a.same_shape(b), Errc::shape_mismatch, "psnr shape mismatch");
  const Scalar mse = (a.data - b.data).array().square().mean();
  if (mse <= Scalar(0)) return Scalar(99);
  return std::min(Scalar(99), Scalar(10) * std::log10(Scalar(1) / mse));
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> gaussian_window11(Scalar sigma) {
  Matrix<Scalar> w(11, 11);
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const Scalar dy = Scalar(y - 5), dx = Scalar(x - 5);
      w(y, x) = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
    }
  w /= w.sum();
  return w;
}

}  // namespace detail

// Single-scale SSIM on the luminance channel (mean of RGB), 11x11 Gaussian
// window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1, averaged over all windows
// that fit entirely inside the image.
template <typename Scalar>
Scalar ssim(const Image<Scalar>& a, const Image<Scalar>& b) {
  require(a.same_shape(b), Errc::shape_mismatch, "ssim shape mismatch");
  require(a.height >= 11 && a.width >= 11, Errc::too_small, "ssim needs at least 11x11 images");
  const Matrix<Scalar> x = luminance(a);
  const Matrix<Scalar> y = luminance(b);
  const Matrix<Scalar> w = detail::gaussian_window11<Scalar>(Scalar(1.5));
  constexpr Scalar c1 = Scalar(0.01) * Scalar(0.01);
  constexpr Scalar c2 = Scalar(0.03) * Scalar(0.03);

  Scalar acc = 0;
  long windows = 0;
  for (int oy = 0; oy + 11 <= a.height; ++oy) {
    for (int ox = 0; ox + 11 <= a.width; ++ox) {
      Scalar mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const Scalar wv = w(i, j);
          const Scalar xv = x(oy + i, ox + j), yv = y(oy + i, ox + j);
          mx += wv * xv;
          my += wv * yv;
          sxx += wv * xv * xv;
          syy += wv * yv * yv;
          sxy += wv * xv * yv;
        }
      const Scalar vx = sxx - mx * mx;
      const Scalar vy = syy - my * my;
      const Scalar cxy = sxy - mx * my;
      acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
             ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return acc / Scalar(windows);
}

}  // namespace her2flex
