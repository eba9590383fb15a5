#pragma once

#include "her2flex/nn/graph.hpp"

#include <cmath>
#include <vector>

namespace her2flex::nn {

namespace detail {

// Patch matrix for convolution-as-GEMM. Row index is kernel-position-major,
// channel-minor: row = (ky * k + kx) * c_in + c, so each (ky, kx) slice of a
// column is a contiguous channel block. Weights use the same column layout.
template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& x, int h, int w, int k, int stride, int pad, int ho,
                      int wo) {
  const int cin = static_cast<int>(x.rows());
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(cin) * k * k,
                                             static_cast<Eigen::Index>(ho) * wo);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * wo + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= w) continue;
          cols.block((static_cast<Eigen::Index>(ky) * k + kx) * cin, col, cin, 1) =
              x.col(static_cast<Eigen::Index>(iy) * w + ix);
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& cols, int cin, int h, int w, int k, int stride, int pad,
                      int ho, int wo) {
  Matrix<Scalar> x = Matrix<Scalar>::Zero(cin, static_cast<Eigen::Index>(h) * w);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * wo + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= w) continue;
          x.col(static_cast<Eigen::Index>(iy) * w + ix) +=
              cols.block((static_cast<Eigen::Index>(ky) * k + kx) * cin, col, cin, 1);
        }
      }
    }
  }
  return x;
}

}  // namespace detail

// 2-D convolution with zero padding; weight shape (c_out) x (c_in*k*k).
template <typename Scalar>
int conv2d(Graph<Scalar>& g, int x, int w, int b, int k, int stride, int pad) {
  const Matrix<Scalar>& xv = g.value(x);
  const int h = g.height(x), wd = g.width(x);
  const int cin = static_cast<int>(xv.rows());
  require(g.value(w).cols() == static_cast<Eigen::Index>(cin) * k * k, Errc::shape_mismatch,
          "conv weight does not match input channels");
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (wd + 2 * pad - k) / stride + 1;
  require(ho >= 1 && wo >= 1, Errc::shape_mismatch, "conv output would be empty");

  Matrix<Scalar> cols = detail::im2col(xv, h, wd, k, stride, pad, ho, wo);
  Matrix<Scalar> y = g.value(w) * cols;
  y.colwise() += g.value(b).col(0);
  return g.make(std::move(y), ho, wo, {x, w, b},
                [x, w, b, k, stride, pad, h, wd, cin, ho, wo](Graph<Scalar>& gg, int self) {
                  const Matrix<Scalar>& dy = gg.grad(self);
                  if (gg.needs(w)) {
                    Matrix<Scalar> cols2 = detail::im2col(gg.value(x), h, wd, k, stride, pad, ho, wo);
                    gg.accumulate(w, dy * cols2.transpose());
                  }
                  if (gg.needs(b)) gg.accumulate(b, dy.rowwise().sum());
                  if (gg.needs(x)) {
                    Matrix<Scalar> dcols = gg.value(w).transpose() * dy;
                    gg.accumulate(x, detail::col2im(dcols, cin, h, wd, k, stride, pad, ho, wo));
                  }
                });
}

template <typename Scalar>
int lrelu(Graph<Scalar>& g, int x, Scalar alpha = Scalar(0.2)) {
  Matrix<Scalar> y = g.value(x).unaryExpr([alpha](Scalar v) { return v > 0 ? v : alpha * v; });
  return g.make(std::move(y), g.height(x), g.width(x), {x}, [x, alpha](Graph<Scalar>& gg, int self) {
    Matrix<Scalar> dx = gg.grad(self).binaryExpr(
        gg.value(x), [alpha](Scalar gy, Scalar v) { return v > 0 ? gy : alpha * gy; });
    gg.accumulate(x, std::move(dx));
  });
}

template <typename Scalar>
int relu(Graph<Scalar>& g, int x) {
  return lrelu(g, x, Scalar(0));
}

template <typename Scalar>
int sigmoid(Graph<Scalar>& g, int x) {
  Matrix<Scalar> y = g.value(x).unaryExpr(
      [](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
  return g.make(std::move(y), g.height(x), g.width(x), {x}, [x](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& yv = gg.value(self);
    Matrix<Scalar> dx =
        gg.grad(self).array() * yv.array() * (Scalar(1) - yv.array());
    gg.accumulate(x, std::move(dx));
  });
}

template <typename Scalar>
int tanh_op(Graph<Scalar>& g, int x) {
  Matrix<Scalar> y = g.value(x).array().tanh();
  return g.make(std::move(y), g.height(x), g.width(x), {x}, [x](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& yv = gg.value(self);
    Matrix<Scalar> dx = gg.grad(self).array() * (Scalar(1) - yv.array().square());
    gg.accumulate(x, std::move(dx));
  });
}

template <typename Scalar>
int add(Graph<Scalar>& g, int a, int b) {
  require(g.value(a).rows() == g.value(b).rows() && g.value(a).cols() == g.value(b).cols(),
          Errc::shape_mismatch, "add shape mismatch");
  Matrix<Scalar> y = g.value(a) + g.value(b);
  return g.make(std::move(y), g.height(a), g.width(a), {a, b}, [a, b](Graph<Scalar>& gg, int self) {
    gg.accumulate(a, gg.grad(self));
    gg.accumulate(b, gg.grad(self));
  });
}

template <typename Scalar>
int scale(Graph<Scalar>& g, int x, Scalar c) {
  Matrix<Scalar> y = g.value(x) * c;
  return g.make(std::move(y), g.height(x), g.width(x), {x}, [x, c](Graph<Scalar>& gg, int self) {
    gg.accumulate(x, gg.grad(self) * c);
  });
}

template <typename Scalar>
int mul(Graph<Scalar>& g, int a, int b) {
  require(g.value(a).rows() == g.value(b).rows() && g.value(a).cols() == g.value(b).cols(),
          Errc::shape_mismatch, "mul shape mismatch");
  Matrix<Scalar> y = g.value(a).cwiseProduct(g.value(b));
  return g.make(std::move(y), g.height(a), g.width(a), {a, b}, [a, b](Graph<Scalar>& gg, int self) {
    gg.accumulate(a, gg.grad(self).cwiseProduct(gg.value(b)));
    gg.accumulate(b, gg.grad(self).cwiseProduct(gg.value(a)));
  });
}

template <typename Scalar>
int concat_ch(Graph<Scalar>& g, const std::vector<int>& parts) {
  require(!parts.empty(), Errc::empty_input, "concat of nothing");
  const int h = g.height(parts[0]), w = g.width(parts[0]);
  Eigen::Index rows = 0;
  for (int p : parts) {
    require(g.height(p) == h && g.width(p) == w, Errc::spatial_mismatch,
            "concat requires equal spatial dims");
    rows += g.value(p).rows();
  }
  Matrix<Scalar> y(rows, g.value(parts[0]).cols());
  Eigen::Index r = 0;
  for (int p : parts) {
    y.middleRows(r, g.value(p).rows()) = g.value(p);
    r += g.value(p).rows();
  }
  return g.make(std::move(y), h, w, parts, [parts](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& dy = gg.grad(self);
    Eigen::Index r = 0;
    for (int p : parts) {
      const Eigen::Index n = gg.value(p).rows();
      gg.accumulate(p, dy.middleRows(r, n));
      r += n;
    }
  });
}

// Global average pooling: C x (h*w) -> C x 1.
template <typename Scalar>
int gap(Graph<Scalar>& g, int x) {
  const Eigen::Index n = g.value(x).cols();
  Matrix<Scalar> y = g.value(x).rowwise().mean();
  return g.make(std::move(y), 1, 1, {x}, [x, n](Graph<Scalar>& gg, int self) {
    Matrix<Scalar> dx = (gg.grad(self) / Scalar(n)).replicate(1, n);
    gg.accumulate(x, std::move(dx));
  });
}

// Global max pooling per channel; first maximum wins so ties are
// deterministic.
template <typename Scalar>
int channel_max(Graph<Scalar>& g, int x) {
  const Matrix<Scalar>& xv = g.value(x);
  const int c = static_cast<int>(xv.rows());
  Matrix<Scalar> y(c, 1);
  std::vector<Eigen::Index> argmax(c, 0);
  for (int i = 0; i < c; ++i) {
    Scalar best = xv(i, 0);
    for (Eigen::Index p = 1; p < xv.cols(); ++p)
      if (xv(i, p) > best) {
        best = xv(i, p);
        argmax[i] = p;
      }
    y(i, 0) = best;
  }
  return g.make(std::move(y), 1, 1, {x}, [x, argmax](Graph<Scalar>& gg, int self) {
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(gg.value(x).rows(), gg.value(x).cols());
    for (size_t i = 0; i < argmax.size(); ++i) dx(i, argmax[i]) = gg.grad(self)(i, 0);
    gg.accumulate(x, std::move(dx));
  });
}

// Per-pixel mean over channels: C x (h*w) -> 1 x (h*w).
template <typename Scalar>
int channel_mean_map(Graph<Scalar>& g, int x) {
  const Eigen::Index c = g.value(x).rows();
  Matrix<Scalar> y = g.value(x).colwise().mean();
  return g.make(std::move(y), g.height(x), g.width(x), {x}, [x, c](Graph<Scalar>& gg, int self) {
    Matrix<Scalar> dx = (gg.grad(self) / Scalar(c)).replicate(c, 1);
    gg.accumulate(x, std::move(dx));
  });
}

// Per-pixel max over channels: C x (h*w) -> 1 x (h*w).
template <typename Scalar>
int channel_max_map(Graph<Scalar>& g, int x) {
  const Matrix<Scalar>& xv = g.value(x);
  const Eigen::Index cols = xv.cols();
  Matrix<Scalar> y(1, cols);
  std::vector<Eigen::Index> argmax(cols, 0);
  for (Eigen::Index p = 0; p < cols; ++p) {
    Scalar best = xv(0, p);
    for (Eigen::Index i = 1; i < xv.rows(); ++i)
      if (xv(i, p) > best) {
        best = xv(i, p);
        argmax[p] = i;
      }
    y(0, p) = best;
  }
  return g.make(std::move(y), g.height(x), g.width(x), {x}, [x, argmax](Graph<Scalar>& gg, int self) {
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(gg.value(x).rows(), gg.value(x).cols());
    for (size_t p = 0; p < argmax.size(); ++p) dx(argmax[p], p) = gg.grad(self)(0, p);
    gg.accumulate(x, std::move(dx));
  });
}

// 2x2 average pooling with partial windows (matches her2flex::avg_pool2).
template <typename Scalar>
int avg_pool2(Graph<Scalar>& g, int x) {
  const Matrix<Scalar>& xv = g.value(x);
  const int h = g.height(x), w = g.width(x);
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  const int c = static_cast<int>(xv.rows());
  Matrix<Scalar> y = Matrix<Scalar>::Zero(c, static_cast<Eigen::Index>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy) {
    const int y1 = std::min(2 * oy + 2, h);
    for (int ox = 0; ox < ow; ++ox) {
      const int x1 = std::min(2 * ox + 2, w);
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
      for (int iy = 2 * oy; iy < y1; ++iy)
        for (int ix = 2 * ox; ix < x1; ++ix)
          y.col(col) += xv.col(static_cast<Eigen::Index>(iy) * w + ix);
      y.col(col) /= Scalar((y1 - 2 * oy) * (x1 - 2 * ox));
    }
  }
  return g.make(std::move(y), oh, ow, {x}, [x, h, w, oh, ow](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& dy = gg.grad(self);
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(gg.value(x).rows(), gg.value(x).cols());
    for (int oy = 0; oy < oh; ++oy) {
      const int y1 = std::min(2 * oy + 2, h);
      for (int ox = 0; ox < ow; ++ox) {
        const int x1 = std::min(2 * ox + 2, w);
        const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
        const Scalar inv = Scalar(1) / Scalar((y1 - 2 * oy) * (x1 - 2 * ox));
        for (int iy = 2 * oy; iy < y1; ++iy)
          for (int ix = 2 * ox; ix < x1; ++ix)
            dx.col(static_cast<Eigen::Index>(iy) * w + ix) += dy.col(col) * inv;
      }
    }
    gg.accumulate(x, std::move(dx));
  });
}

template <typename Scalar>
int upsample2(Graph<Scalar>& g, int x) {
  const Matrix<Scalar>& xv = g.value(x);
  const int h = g.height(x), w = g.width(x);
  const int oh = 2 * h, ow = 2 * w;
  Matrix<Scalar> y(xv.rows(), static_cast<Eigen::Index>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      y.col(static_cast<Eigen::Index>(oy) * ow + ox) =
          xv.col(static_cast<Eigen::Index>(oy / 2) * w + ox / 2);
  return g.make(std::move(y), oh, ow, {x}, [x, h, w, ow](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& dy = gg.grad(self);
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(gg.value(x).rows(), gg.value(x).cols());
    for (int oy = 0; oy < 2 * h; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        dx.col(static_cast<Eigen::Index>(oy / 2) * w + ox / 2) +=
            dy.col(static_cast<Eigen::Index>(oy) * ow + ox);
    gg.accumulate(x, std::move(dx));
  });
}

// Fully connected layer on a column vector.
template <typename Scalar>
int linear(Graph<Scalar>& g, int x, int w, int b) {
  require(g.value(x).cols() == 1, Errc::shape_mismatch, "linear expects a column vector");
  Matrix<Scalar> y = g.value(w) * g.value(x) + g.value(b);
  return g.make(std::move(y), 1, 1, {x, w, b}, [x, w, b](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& dy = gg.grad(self);
    if (gg.needs(w)) gg.accumulate(w, dy * gg.value(x).transpose());
    if (gg.needs(b)) gg.accumulate(b, dy);
    if (gg.needs(x)) gg.accumulate(x, gg.value(w).transpose() * dy);
  });
}

// Matrix-vector product without bias (Eq.-style MLPs carry none).
template <typename Scalar>
int matvec(Graph<Scalar>& g, int w, int x) {
  require(g.value(x).cols() == 1, Errc::shape_mismatch, "matvec expects a column vector");
  Matrix<Scalar> y = g.value(w) * g.value(x);
  return g.make(std::move(y), 1, 1, {w, x}, [w, x](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& dy = gg.grad(self);
    if (gg.needs(w)) gg.accumulate(w, dy * gg.value(x).transpose());
    if (gg.needs(x)) gg.accumulate(x, gg.value(w).transpose() * dy);
  });
}

// Broadcast per-channel scaling: y.row(c) = x.row(c) * s(c).
template <typename Scalar>
int channel_scale(Graph<Scalar>& g, int x, int s) {
  require(g.value(s).cols() == 1 && g.value(s).rows() == g.value(x).rows(), Errc::length_mismatch,
          "channel weight length must equal channel count");
  Matrix<Scalar> y = g.value(x).array().colwise() * g.value(s).col(0).array();
  return g.make(std::move(y), g.height(x), g.width(x), {x, s}, [x, s](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& dy = gg.grad(self);
    if (gg.needs(x))
      gg.accumulate(x, dy.array().colwise() * gg.value(s).col(0).array());
    if (gg.needs(s)) {
      Matrix<Scalar> ds = dy.cwiseProduct(gg.value(x)).rowwise().sum();
      gg.accumulate(s, std::move(ds));
    }
  });
}

// Broadcast spatial mask: y.row(c) = x.row(c) .* m (m is 1 x h*w).
template <typename Scalar>
int spatial_scale(Graph<Scalar>& g, int x, int m) {
  require(g.value(m).rows() == 1 && g.value(m).cols() == g.value(x).cols(), Errc::shape_mismatch,
          "spatial mask must be 1 x (h*w)");
  Matrix<Scalar> y = g.value(x).array().rowwise() * g.value(m).row(0).array();
  return g.make(std::move(y), g.height(x), g.width(x), {x, m}, [x, m](Graph<Scalar>& gg, int self) {
    const Matrix<Scalar>& dy = gg.grad(self);
    if (gg.needs(x))
      gg.accumulate(x, dy.array().rowwise() * gg.value(m).row(0).array());
    if (gg.needs(m)) {
      Matrix<Scalar> dm = dy.cwiseProduct(gg.value(x)).colwise().sum();
      gg.accumulate(m, std::move(dm));
    }
  });
}

template <typename Scalar>
int softmax(Graph<Scalar>& g, int x) {
  const Matrix<Scalar>& xv = g.value(x);
  require(xv.cols() == 1, Errc::shape_mismatch, "softmax expects a column vector");
  Vector<Scalar> z = (xv.col(0).array() - xv.col(0).maxCoeff()).exp();
  Matrix<Scalar> p = z / z.sum();
  return g.make(std::move(p), 1, 1, {x}, [x](Graph<Scalar>& gg, int self) {
    const auto& p = gg.value(self);
    const auto& dy = gg.grad(self);
    const Scalar dot = (p.array() * dy.array()).sum();
    Matrix<Scalar> dx = p.array() * (dy.array() - dot);
    gg.accumulate(x, std::move(dx));
  });
}

// Weighted cross-entropy fused with softmax: w(label) * (logsumexp(l) - l[label]).
template <typename Scalar>
int softmax_ce(Graph<Scalar>& g, int logits, int label, const Vector<Scalar>& class_weights) {
  const Matrix<Scalar>& l = g.value(logits);
  require(l.cols() == 1 && label >= 0 && label < l.rows(), Errc::shape_mismatch,
          "bad softmax_ce inputs");
  const Scalar m = l.col(0).maxCoeff();
  Vector<Scalar> z = (l.col(0).array() - m).exp();
  const Scalar sum = z.sum();
  Vector<Scalar> p = z / sum;
  const Scalar wl = class_weights(label);
  Matrix<Scalar> loss(1, 1);
  loss(0, 0) = wl * (std::log(sum) + m - l(label, 0));
  return g.make(std::move(loss), 1, 1, {logits}, [logits, label, p, wl](Graph<Scalar>& gg, int self) {
    const Scalar gy = gg.grad(self)(0, 0);
    Matrix<Scalar> dl = p * (wl * gy);
    dl(label, 0) -= wl * gy;
    gg.accumulate(logits, std::move(dl));
  });
}

// Mean binary cross-entropy of probabilities against a constant target, with
// epsilon clamping (flat gradient inside the clamped region).
template <typename Scalar>
int bce_mean(Graph<Scalar>& g, int probs, Scalar target, Scalar eps = Scalar(1e-7)) {
  const Matrix<Scalar>& p = g.value(probs);
  const Eigen::Index n = p.size();
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar pc = std::min(std::max(p(i), eps), Scalar(1) - eps);
    acc -= target * std::log(pc) + (Scalar(1) - target) * std::log(Scalar(1) - pc);
  }
  Matrix<Scalar> loss(1, 1);
  loss(0, 0) = acc / Scalar(n);
  return g.make(std::move(loss), 1, 1, {probs}, [probs, target, eps, n](Graph<Scalar>& gg, int self) {
    const Scalar gy = gg.grad(self)(0, 0) / Scalar(n);
    const Matrix<Scalar>& p = gg.value(probs);
    Matrix<Scalar> dp = Matrix<Scalar>::Zero(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) <= eps || p(i) >= Scalar(1) - eps) continue;
      dp(i) = gy * (p(i) - target) / (p(i) * (Scalar(1) - p(i)));
    }
    gg.accumulate(probs, std::move(dp));
  });
}

template <typename Scalar>
int l1_mean(Graph<Scalar>& g, int a, int b) {
  require(g.value(a).rows() == g.value(b).rows() && g.value(a).cols() == g.value(b).cols(),
          Errc::shape_mismatch, "l1_mean shape mismatch");
  const Eigen::Index n = g.value(a).size();
  Matrix<Scalar> loss(1, 1);
  loss(0, 0) = (g.value(a) - g.value(b)).cwiseAbs().sum() / Scalar(n);
  return g.make(std::move(loss), 1, 1, {a, b}, [a, b, n](Graph<Scalar>& gg, int self) {
    const Scalar gy = gg.grad(self)(0, 0) / Scalar(n);
    Matrix<Scalar> s = (gg.value(a) - gg.value(b))
                           .unaryExpr([](Scalar v) { return Scalar(v > 0 ? 1 : (v < 0 ? -1 : 0)); });
    gg.accumulate(a, s * gy);
    gg.accumulate(b, s * (-gy));
  });
}

// y = sum_i coeff_i * scalar_i.
template <typename Scalar>
int weighted_sum(Graph<Scalar>& g, const std::vector<int>& scalars,
                 const std::vector<Scalar>& coeffs) {
  require(scalars.size() == coeffs.size() && !scalars.empty(), Errc::length_mismatch,
          "weighted_sum arity mismatch");
  Matrix<Scalar> y(1, 1);
  y(0, 0) = 0;
  for (size_t i = 0; i < scalars.size(); ++i) y(0, 0) += coeffs[i] * g.scalar_value(scalars[i]);
  return g.make(std::move(y), 1, 1, scalars, [scalars, coeffs](Graph<Scalar>& gg, int self) {
    const Scalar gy = gg.grad(self)(0, 0);
    Matrix<Scalar> one(1, 1);
    for (size_t i = 0; i < scalars.size(); ++i) {
      one(0, 0) = gy * coeffs[i];
      gg.accumulate(scalars[i], one);
    }
  });
}

template <typename Scalar>
int mean_scalars(Graph<Scalar>& g, const std::vector<int>& scalars) {
  return weighted_sum(g, scalars,
                      std::vector<Scalar>(scalars.size(), Scalar(1) / Scalar(scalars.size())));
}

// Biased (V-statistic) squared MMD with a Gaussian kernel between two batches
// of column-vector nodes. sigma is treated as a constant.
template <typename Scalar>
int mmd_gaussian(Graph<Scalar>& g, const std::vector<int>& xs, const std::vector<int>& ys,
                 Scalar sigma) {
  require(!xs.empty() && !ys.empty(), Errc::empty_batch, "mmd needs nonempty batches");
  require(sigma > 0, Errc::bad_config, "mmd bandwidth must be positive");
  const int n = static_cast<int>(xs.size()), m = static_cast<int>(ys.size());
  const Eigen::Index dim = g.value(xs[0]).rows();
  for (int id : xs)
    require(g.value(id).rows() == dim && g.value(id).cols() == 1, Errc::dimension_mismatch,
            "mmd vectors must share dimension");
  for (int id : ys)
    require(g.value(id).rows() == dim && g.value(id).cols() == 1, Errc::dimension_mismatch,
            "mmd vectors must share dimension");

  const Scalar inv2s2 = Scalar(1) / (2 * sigma * sigma);
  auto kern = [&](int a, int b) {
    return std::exp(-(g.value(a) - g.value(b)).squaredNorm() * inv2s2);
  };
  Matrix<Scalar> kxx(n, n), kyy(m, m), kxy(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) kxx(i, j) = kern(xs[i], xs[j]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) kyy(i, j) = kern(ys[i], ys[j]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) kxy(i, j) = kern(xs[i], ys[j]);

  Matrix<Scalar> loss(1, 1);
  loss(0, 0) = kxx.mean() + kyy.mean() - 2 * kxy.mean();

  std::vector<int> parents = xs;
  parents.insert(parents.end(), ys.begin(), ys.end());
  const Scalar invs2 = Scalar(1) / (sigma * sigma);
  return g.make(std::move(loss), 1, 1, parents,
                [xs, ys, kxx, kyy, kxy, n, m, invs2](Graph<Scalar>& gg, int self) {
                  const Scalar gy = gg.grad(self)(0, 0);
                  for (int a = 0; a < n; ++a) {
                    Matrix<Scalar> d = Matrix<Scalar>::Zero(gg.value(xs[a]).rows(), 1);
                    for (int j = 0; j < n; ++j)
                      d += (Scalar(2) / Scalar(n * n)) * kxx(a, j) * (gg.value(xs[j]) - gg.value(xs[a]));
                    for (int j = 0; j < m; ++j)
                      d -= (Scalar(2) / Scalar(n * m)) * kxy(a, j) * (gg.value(ys[j]) - gg.value(xs[a]));
                    gg.accumulate(xs[a], d * (gy * invs2));
                  }
                  for (int b = 0; b < m; ++b) {
                    Matrix<Scalar> d = Matrix<Scalar>::Zero(gg.value(ys[b]).rows(), 1);
                    for (int j = 0; j < m; ++j)
                      d += (Scalar(2) / Scalar(m * m)) * kyy(b, j) * (gg.value(ys[j]) - gg.value(ys[b]));
                    for (int i = 0; i < n; ++i)
                      d -= (Scalar(2) / Scalar(n * m)) * kxy(i, b) * (gg.value(xs[i]) - gg.value(ys[b]));
                    gg.accumulate(ys[b], d * (gy * invs2));
                  }
                });
}

}  // namespace her2flex::nn
