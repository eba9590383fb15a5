#pragma once

#include "her2flex/rng.hpp"
#include "her2flex/types.hpp"

#include <algorithm>
#include <cmath>

namespace her2flex {

// Dense channel-major feature map. Row c holds channel c, column p holds the
// pixel at (y, x) with p = y * width + x. Images are FeatureMaps with three
// channels and values in [0, 1].
template <typename Scalar>
struct FeatureMap {
  Matrix<Scalar> data;  // channels x (height * width)
  int height = 0;
  int width = 0;

  FeatureMap() = default;
  FeatureMap(int channels, int h, int w)
      : data(Matrix<Scalar>::Zero(channels, static_cast<Eigen::Index>(h) * w)), height(h), width(w) {}

  int channels() const { return static_cast<int>(data.rows()); }
  Eigen::Index pixels() const { return data.cols(); }

  Scalar& at(int c, int y, int x) { return data(c, static_cast<Eigen::Index>(y) * width + x); }
  Scalar at(int c, int y, int x) const { return data(c, static_cast<Eigen::Index>(y) * width + x); }

  bool same_shape(const FeatureMap& o) const {
    return height == o.height && width == o.width && channels() == o.channels();
  }

  static FeatureMap constant(int channels, int h, int w, Scalar v) {
    FeatureMap fm(channels, h, w);
    fm.data.setConstant(v);
    return fm;
  }

  static FeatureMap random_uniform(int channels, int h, int w, Rng& rng, Scalar lo = Scalar(0),
                                   Scalar hi = Scalar(1)) {
    FeatureMap fm(channels, h, w);
    for (Eigen::Index i = 0; i < fm.data.size(); ++i) fm.data(i) = uniform<Scalar>(rng, lo, hi);
    return fm;
  }

  template <typename Other>
  FeatureMap<Other> cast() const {
    FeatureMap<Other> out;
    out.data = data.template cast<Other>();
    out.height = height;
    out.width = width;
    return out;
  }
};

template <typename Scalar>
using Image = FeatureMap<Scalar>;  // 3 channels, values in [0, 1]

using ImageF = Image<float>;

template <typename Scalar>
bool is_valid_image(const Image<Scalar>& img) {
  if (img.channels() != 3 || img.height <= 0 || img.width <= 0) return false;
  return img.data.allFinite() && img.data.minCoeff() >= Scalar(0) && img.data.maxCoeff() <= Scalar(1);
}

template <typename Scalar>
void clamp01(FeatureMap<Scalar>& fm) {
  fm.data = fm.data.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

// 2x2 average pooling with partial windows at odd borders, so the output is
// ceil(h/2) x ceil(w/2) and constant inputs stay constant.
template <typename Scalar>
FeatureMap<Scalar> avg_pool2(const FeatureMap<Scalar>& in) {
  const int oh = (in.height + 1) / 2;
  const int ow = (in.width + 1) / 2;
  FeatureMap<Scalar> out(in.channels(), oh, ow);
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      const int y1 = std::min(2 * y + 2, in.height);
      for (int x = 0; x < ow; ++x) {
        const int x1 = std::min(2 * x + 2, in.width);
        Scalar sum = 0;
        for (int iy = 2 * y; iy < y1; ++iy)
          for (int ix = 2 * x; ix < x1; ++ix) sum += in.at(c, iy, ix);
        out.at(c, y, x) = sum / Scalar((y1 - 2 * y) * (x1 - 2 * x));
      }
    }
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> upsample2_nearest(const FeatureMap<Scalar>& in) {
  FeatureMap<Scalar> out(in.channels(), in.height * 2, in.width * 2);
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> flip_horizontal(const FeatureMap<Scalar>& in) {
  FeatureMap<Scalar> out(in.channels(), in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      out.data.col(static_cast<Eigen::Index>(y) * in.width + x) =
          in.data.col(static_cast<Eigen::Index>(y) * in.width + (in.width - 1 - x));
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> flip_vertical(const FeatureMap<Scalar>& in) {
  FeatureMap<Scalar> out(in.channels(), in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      out.data.col(static_cast<Eigen::Index>(y) * in.width + x) =
          in.data.col(static_cast<Eigen::Index>(in.height - 1 - y) * in.width + x);
  return out;
}

template <typename Scalar>
Vector<Scalar> channel_means(const FeatureMap<Scalar>& fm) {
  return fm.data.rowwise().mean();
}

// First-occurrence max per channel; deterministic under ties.
template <typename Scalar>
Vector<Scalar> channel_maxima(const FeatureMap<Scalar>& fm) {
  Vector<Scalar> m(fm.channels());
  for (int c = 0; c < fm.channels(); ++c) {
    Scalar best = fm.data(c, 0);
    for (Eigen::Index p = 1; p < fm.pixels(); ++p)
      if (fm.data(c, p) > best) best = fm.data(c, p);
    m(c) = best;
  }
  return m;
}

template <typename Scalar>
FeatureMap<Scalar> concat_channels(const FeatureMap<Scalar>& a, const FeatureMap<Scalar>& b) {
  require(a.height == b.height && a.width == b.width, Errc::spatial_mismatch,
          "channel concat requires equal spatial dims");
  FeatureMap<Scalar> out(a.channels() + b.channels(), a.height, a.width);
  out.data.topRows(a.channels()) = a.data;
  out.data.bottomRows(b.channels()) = b.data;
  return out;
}

// Mean of RGB; used as the luminance plane for SSIM.
template <typename Scalar>
Matrix<Scalar> luminance(const Image<Scalar>& img) {
  require(img.channels() == 3, Errc::shape_mismatch, "luminance expects a 3-channel image");
  Matrix<Scalar> lum(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      lum(y, x) = (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / Scalar(3);
  return lum;
}

}  // namespace her2flex
