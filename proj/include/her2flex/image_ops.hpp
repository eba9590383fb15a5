#pragma once

#include "her2flex/tensor.hpp"

#include <cmath>

namespace her2flex {

namespace detail {

template <typename Scalar>
Scalar sample_bilinear_clamped(const FeatureMap<Scalar>& img, int c, Scalar fy, Scalar fx) {
  const auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  const int x0 = clampi(static_cast<int>(std::floor(fx)), 0, img.width - 1);
  const int y0 = clampi(static_cast<int>(std::floor(fy)), 0, img.height - 1);
  const int x1 = clampi(x0 + 1, 0, img.width - 1);
  const int y1 = clampi(y0 + 1, 0, img.height - 1);
  const Scalar tx = std::min(std::max(fx - Scalar(x0), Scalar(0)), Scalar(1));
  const Scalar ty = std::min(std::max(fy - Scalar(y0), Scalar(0)), Scalar(1));
  const Scalar top = img.at(c, y0, x0) * (Scalar(1) - tx) + img.at(c, y0, x1) * tx;
  const Scalar bot = img.at(c, y1, x0) * (Scalar(1) - tx) + img.at(c, y1, x1) * tx;
  return top * (Scalar(1) - ty) + bot * ty;
}

}  // namespace detail

// Rotation about the image center with bilinear sampling; out-of-bounds reads
// clamp to the nearest edge pixel so no synthetic black corners appear.
template <typename Scalar>
FeatureMap<Scalar> rotate_bilinear(const FeatureMap<Scalar>& img, Scalar degrees) {
  if (degrees == Scalar(0)) return img;
  const Scalar rad = degrees * Scalar(M_PI) / Scalar(180);
  const Scalar cs = std::cos(rad), sn = std::sin(rad);
  const Scalar cy = Scalar(img.height - 1) / 2, cx = Scalar(img.width - 1) / 2;
  FeatureMap<Scalar> out(img.channels(), img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Scalar dy = Scalar(y) - cy, dx = Scalar(x) - cx;
      const Scalar sy = cy + (sn * dx + cs * dy);
      const Scalar sx = cx + (cs * dx - sn * dy);
      for (int c = 0; c < img.channels(); ++c)
        out.at(c, y, x) = detail::sample_bilinear_clamped(img, c, sy, sx);
    }
  }
  return out;
}

// Crops the window [y0, y0+ch) x [x0, x0+cw) and resizes it back to the input
// dims with bilinear interpolation.
template <typename Scalar>
FeatureMap<Scalar> crop_resize(const FeatureMap<Scalar>& img, int y0, int x0, int ch, int cw) {
  require(ch >= 1 && cw >= 1 && y0 >= 0 && x0 >= 0 && y0 + ch <= img.height && x0 + cw <= img.width,
          Errc::shape_mismatch, "crop window outside image");
  FeatureMap<Scalar> out(img.channels(), img.height, img.width);
  const Scalar sy = Scalar(ch) / Scalar(img.height);
  const Scalar sx = Scalar(cw) / Scalar(img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Scalar fy = Scalar(y0) + (Scalar(y) + Scalar(0.5)) * sy - Scalar(0.5);
      const Scalar fx = Scalar(x0) + (Scalar(x) + Scalar(0.5)) * sx - Scalar(0.5);
      for (int c = 0; c < img.channels(); ++c)
        out.at(c, y, x) = detail::sample_bilinear_clamped(img, c, fy, fx);
    }
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> resize_bilinear(const FeatureMap<Scalar>& img, int oh, int ow) {
  FeatureMap<Scalar> out(img.channels(), oh, ow);
  const Scalar sy = Scalar(img.height) / Scalar(oh);
  const Scalar sx = Scalar(img.width) / Scalar(ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const Scalar fy = (Scalar(y) + Scalar(0.5)) * sy - Scalar(0.5);
      const Scalar fx = (Scalar(x) + Scalar(0.5)) * sx - Scalar(0.5);
      for (int c = 0; c < img.channels(); ++c)
        out.at(c, y, x) = detail::sample_bilinear_clamped(img, c, fy, fx);
    }
  return out;
}

template <typename Scalar>
void adjust_brightness(FeatureMap<Scalar>& img, Scalar delta) {
  img.data.array() += delta;
  clamp01(img);
}

// Contrast about mid-gray: x -> 0.5 + (x - 0.5) * (1 + delta).
template <typename Scalar>
void adjust_contrast(FeatureMap<Scalar>& img, Scalar delta) {
  img.data = (img.data.array() - Scalar(0.5)) * (Scalar(1) + delta) + Scalar(0.5);
  clamp01(img);
}

template <typename Scalar>
void add_gaussian_noise(FeatureMap<Scalar>& img, Scalar sigma, Rng& rng) {
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data(i) += normal<Scalar>(rng, 0, sigma);
  clamp01(img);
}

}  // namespace her2flex
