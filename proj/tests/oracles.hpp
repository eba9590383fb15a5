#pragma once

// Independent brute-force implementations used as oracles by the unit and
// acceptance suites. Everything here is written with explicit loops and no
// shared code with the library paths it checks.

#include "her2flex/tensor.hpp"

#include <cmath>
#include <vector>

namespace her2flex::oracle {

inline double psnr_loops(const FeatureMap<double>& a, const FeatureMap<double>& b) {
  double se = 0;
  long n = 0;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        const double d = a.at(c, y, x) - b.at(c, y, x);
        se += d * d;
        ++n;
      }
  const double mse = se / n;
  if (mse <= 0) return 99.0;
  const double db = 10.0 * std::log10(1.0 / mse);
  return db > 99.0 ? 99.0 : db;
}

inline double ssim_loops(const FeatureMap<double>& a, const FeatureMap<double>& b) {
  const int h = a.height, w = a.width;
  std::vector<double> xl(h * w), yl(h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      xl[y * w + x] = (a.at(0, y, x) + a.at(1, y, x) + a.at(2, y, x)) / 3.0;
      yl[y * w + x] = (b.at(0, y, x) + b.at(1, y, x) + b.at(2, y, x)) / 3.0;
    }
  double win[11][11], wsum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      win[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2.0 * 1.5 * 1.5));
      wsum += win[i][j];
    }
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) win[i][j] /= wsum;

  const double c1 = 1e-4, c2 = 9e-4;
  double acc = 0;
  long count = 0;
  for (int oy = 0; oy + 11 <= h; ++oy)
    for (int ox = 0; ox + 11 <= w; ++ox) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          mx += win[i][j] * xl[(oy + i) * w + ox + j];
          my += win[i][j] * yl[(oy + i) * w + ox + j];
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double dx = xl[(oy + i) * w + ox + j] - mx;
          const double dy = yl[(oy + i) * w + ox + j] - my;
          vx += win[i][j] * dx * dx;
          vy += win[i][j] * dy * dy;
          cxy += win[i][j] * dx * dy;
        }
      acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return acc / count;
}

inline double mmd_loops(const std::vector<std::vector<double>>& xs,
                        const std::vector<std::vector<double>>& ys, double sigma) {
  auto k = [sigma](const std::vector<double>& a, const std::vector<double>& b) {
    double d2 = 0;
    for (size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-d2 / (2.0 * sigma * sigma));
  };
  double kxx = 0, kyy = 0, kxy = 0;
  for (const auto& a : xs)
    for (const auto& b : xs) kxx += k(a, b);
  for (const auto& a : ys)
    for (const auto& b : ys) kyy += k(a, b);
  for (const auto& a : xs)
    for (const auto& b : ys) kxy += k(a, b);
  const double n = xs.size(), m = ys.size();
  return kxx / (n * n) + kyy / (m * m) - 2 * kxy / (n * m);
}

// Eq.-1 attention by explicit loops: sigmoid(W1 relu(W0 avg) + W1 relu(W0 max)).
inline std::vector<double> attention_loops(const std::vector<std::vector<double>>& w0,
                                           const std::vector<std::vector<double>>& w1,
                                           const FeatureMap<double>& f) {
  const int c = f.channels();
  const int hidden = static_cast<int>(w0.size());
  std::vector<double> avg(c, 0), mx(c);
  for (int ch = 0; ch < c; ++ch) {
    mx[ch] = f.at(ch, 0, 0);
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x) {
        avg[ch] += f.at(ch, y, x);
        if (f.at(ch, y, x) > mx[ch]) mx[ch] = f.at(ch, y, x);
      }
    avg[ch] /= f.height * f.width;
  }
  auto mlp = [&](const std::vector<double>& v) {
    std::vector<double> hid(hidden, 0);
    for (int i = 0; i < hidden; ++i) {
      for (int j = 0; j < c; ++j) hid[i] += w0[i][j] * v[j];
      if (hid[i] < 0) hid[i] = 0;
    }
    std::vector<double> out(c, 0);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < hidden; ++j) out[i] += w1[i][j] * hid[j];
    return out;
  };
  const auto pa = mlp(avg);
  const auto pm = mlp(mx);
  std::vector<double> weights(c);
  for (int i = 0; i < c; ++i) weights[i] = 1.0 / (1.0 + std::exp(-(pa[i] + pm[i])));
  return weights;
}

// Eq.-2 by direct formula.
inline double weighted_ce_loops(const std::vector<double>& probs, int label,
                                const std::vector<double>& w) {
  double p = probs[label];
  if (p < 1e-7) p = 1e-7;
  return -w[label] * std::log(p);
}

// Eq.-5 pyramid L1 with nested-loop pooling.
inline double pyramid_l1_loops(const FeatureMap<double>& a, const FeatureMap<double>& b,
                               int levels) {
  auto pool = [](const FeatureMap<double>& in) {
    FeatureMap<double> out(in.channels(), (in.height + 1) / 2, (in.width + 1) / 2);
    for (int c = 0; c < in.channels(); ++c)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
          double s = 0;
          int n = 0;
          for (int iy = 2 * y; iy < std::min(2 * y + 2, in.height); ++iy)
            for (int ix = 2 * x; ix < std::min(2 * x + 2, in.width); ++ix) {
              s += in.at(c, iy, ix);
              ++n;
            }
          out.at(c, y, x) = s / n;
        }
    return out;
  };
  FeatureMap<double> pa = a, pb = b;
  double total = 0;
  for (int s = 0; s < levels; ++s) {
    if (s > 0) {
      pa = pool(pa);
      pb = pool(pb);
    }
    double term = 0;
    long n = 0;
    for (int c = 0; c < pa.channels(); ++c)
      for (int y = 0; y < pa.height; ++y)
        for (int x = 0; x < pa.width; ++x) {
          term += std::abs(pa.at(c, y, x) - pb.at(c, y, x));
          ++n;
        }
    total += term / n;
  }
  return total;
}

// Standard BCE against a role target, clamped.
inline double bce_loops(const std::vector<double>& scores, double target) {
  double acc = 0;
  for (double s : scores) {
    double p = s;
    if (p < 1e-7) p = 1e-7;
    if (p > 1.0 - 1e-7) p = 1.0 - 1e-7;
    acc -= target * std::log(p) + (1.0 - target) * std::log(1.0 - p);
  }
  return acc / scores.size();
}

// Mean silhouette score over a labeled 2-D embedding.
inline double silhouette_loops(const std::vector<std::array<double, 2>>& pts,
                               const std::vector<int>& labels, int n_classes) {
  const size_t n = pts.size();
  auto dist = [&](size_t i, size_t j) {
    const double dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1];
    return std::sqrt(dx * dx + dy * dy);
  };
  double total = 0;
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> mean_d(n_classes, 0);
    std::vector<long> count(n_classes, 0);
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      mean_d[labels[j]] += dist(i, j);
      ++count[labels[j]];
    }
    for (int c = 0; c < n_classes; ++c)
      if (count[c] > 0) mean_d[c] /= count[c];
    const double a = mean_d[labels[i]];
    double b = 1e300;
    for (int c = 0; c < n_classes; ++c)
      if (c != labels[i] && count[c] > 0 && mean_d[c] < b) b = mean_d[c];
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

}  // namespace her2flex::oracle
