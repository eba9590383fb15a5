#include "her2flex/synth.hpp"

#include "her2flex/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace her2flex {

namespace {

// Palette and signal-strength constants. Grade is planted geometrically: the
// IHC membrane ring's width and arc completeness grow with expression while
// its stain intensity stays fixed, and the H&E halo traces the same ring
// geometry at a subtle fixed contrast. A full-resolution translator can copy
// the ring shape almost losslessly, while a heavily strided classifier has to
// integrate thin faint arcs over the whole patch.
struct Palette {
  static constexpr float he_bg[3] = {0.89f, 0.70f, 0.80f};
  static constexpr float he_nucleus[3] = {0.36f, 0.22f, 0.52f};
  static constexpr float he_halo[3] = {0.97f, 0.89f, 0.93f};
  static constexpr float ihc_bg[3] = {0.84f, 0.86f, 0.90f};
  static constexpr float ihc_nucleus[3] = {0.42f, 0.50f, 0.70f};
  static constexpr float ihc_brown[3] = {0.52f, 0.33f, 0.12f};
};

struct Nucleus {
  float cy, cx;
  float ry, rx;      // ellipse radii in pixels
  float theta;       // orientation
  float expr;        // per-nucleus expression in [0, 1]
  float arc_start;   // membrane arc start angle
  float arc_frac;    // membrane completeness in [0, 1]
};

struct Latent {
  float expression;  // grade-banded global expression
  std::vector<Nucleus> nuclei;
};

Latent draw_latent(Her2Grade grade, int size, Rng& rng) {
  const int g = grade_index(grade);
  Latent lat;
  lat.expression = (static_cast<float>(g) + 0.2f + 0.6f * uniform<float>(rng, 0.f, 1.f)) / 4.0f;

  const float scale = static_cast<float>(size) / 64.0f;
  const float area_scale = scale * scale;
  // Weak direct morphology cue: density drifts mildly with grade, with heavy
  // overlap between adjacent grades.
  const int count = std::clamp(
      static_cast<int>(std::lround(normal<float>(rng, (14.0f + 2.2f * g) * area_scale, 3.0f * area_scale))),
      std::max(4, static_cast<int>(6 * area_scale)), static_cast<int>(44 * area_scale));

  lat.nuclei.reserve(count);
  const float margin = 7.0f * scale;
  for (int k = 0; k < count; ++k) {
    Nucleus n;
    n.cy = uniform<float>(rng, margin, size - margin);
    n.cx = uniform<float>(rng, margin, size - margin);
    const float r = uniform<float>(rng, 2.6f, 4.4f) * scale;
    const float ecc = uniform<float>(rng, 0.75f, 1.0f);
    n.ry = r;
    n.rx = r * ecc;
    n.theta = uniform<float>(rng, 0.f, static_cast<float>(M_PI));
    n.expr = std::clamp(lat.expression + normal<float>(rng, 0.f, 0.05f), 0.02f, 1.0f);
    n.arc_start = uniform<float>(rng, 0.f, 2.0f * static_cast<float>(M_PI));
    n.arc_frac = std::clamp(0.15f + 0.85f * n.expr + normal<float>(rng, 0.f, 0.05f), 0.05f, 1.0f);
    lat.nuclei.push_back(n);
  }
  return lat;
}

// Smooth low-frequency field in [-1, 1]: bilinear interpolation of a coarse
// random grid. Shared between the two stains of a pair (same tissue).
MatrixF low_freq_field(int size, Rng& rng) {
  constexpr int kGrid = 9;
  MatrixF coarse(kGrid, kGrid);
  for (int i = 0; i < kGrid * kGrid; ++i) coarse(i) = uniform<float>(rng, -1.f, 1.f);
  MatrixF out(size, size);
  const float step = static_cast<float>(kGrid - 1) / static_cast<float>(size - 1);
  for (int y = 0; y < size; ++y) {
    const float fy = y * step;
    const int y0 = std::min(static_cast<int>(fy), kGrid - 2);
    const float ty = fy - y0;
    for (int x = 0; x < size; ++x) {
      const float fx = x * step;
      const int x0 = std::min(static_cast<int>(fx), kGrid - 2);
      const float tx = fx - x0;
      out(y, x) = (1 - ty) * ((1 - tx) * coarse(y0, x0) + tx * coarse(y0, x0 + 1)) +
                  ty * ((1 - tx) * coarse(y0 + 1, x0) + tx * coarse(y0 + 1, x0 + 1));
    }
  }
  return out;
}

void fill_background(ImageF& img, const float base[3], const MatrixF& field, float field_amp,
                     float noise_sigma, Rng& rng) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float f = field(y, x) * field_amp;
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = base[c] + f + normal<float>(rng, 0.f, noise_sigma);
    }
}

inline void blend(ImageF& img, int y, int x, const float color[3], float alpha) {
  if (alpha <= 0.f) return;
  for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1 - alpha) * img.at(c, y, x) + alpha * color[c];
}

// Coverage ramps: 1 inside, 0 outside, linear feather across ~1 px.
inline float smooth_in(float d, float edge, float feather) {
  return std::clamp((edge - d) / feather + 0.5f, 0.f, 1.f);
}

inline float smooth_band(float d, float lo, float hi, float feather) {
  return std::min(smooth_in(d, hi, feather), std::clamp((d - lo) / feather + 0.5f, 0.f, 1.f));
}

void render_pair(const Latent& lat, int size, Rng& rng, ImageF& he, ImageF& ihc) {
  he = ImageF(3, size, size);
  ihc = ImageF(3, size, size);
  const MatrixF field = low_freq_field(size, rng);
  fill_background(he, Palette::he_bg, field, 0.045f, 0.02f, rng);
  fill_background(ihc, Palette::ihc_bg, field, 0.030f, 0.02f, rng);

  const float scale = static_cast<float>(size) / 64.0f;
  for (const Nucleus& n : lat.nuclei) {
    // Ring width and arc are the grade cue; both stains share the geometry.
    const float ring_w = (1.0f + 2.6f * n.expr) * scale;
    const float halo_alpha = std::clamp(0.30f + normal<float>(rng, 0.f, 0.03f), 0.2f, 0.4f);
    const float brown_alpha = std::clamp(0.85f + normal<float>(rng, 0.f, 0.05f), 0.7f, 0.95f);
    const float reach = std::max(n.ry, n.rx) + ring_w + 2.0f;

    const int y0 = std::max(0, static_cast<int>(n.cy - reach));
    const int y1 = std::min(size - 1, static_cast<int>(n.cy + reach) + 1);
    const int x0 = std::max(0, static_cast<int>(n.cx - reach));
    const int x1 = std::min(size - 1, static_cast<int>(n.cx + reach) + 1);
    const float ct = std::cos(n.theta), st = std::sin(n.theta);
    const float rmean = 0.5f * (n.ry + n.rx);

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const float dy = y - n.cy, dx = x - n.cx;
        const float u = ct * dx + st * dy;
        const float v = -st * dx + ct * dy;
        // Signed elliptical distance in pixels from the nucleus boundary.
        const float dnorm = std::sqrt((u / n.rx) * (u / n.rx) + (v / n.ry) * (v / n.ry));
        const float dpix = (dnorm - 1.0f) * rmean;

        const float body = smooth_in(dpix, 0.f, 1.0f);
        if (body > 0.f) {
          blend(he, y, x, Palette::he_nucleus, 0.88f * body);
          blend(ihc, y, x, Palette::ihc_nucleus, 0.85f * body);
        }
        // Shared membrane-ring geometry, drawn on the same contiguous arc in
        // both stains: a faint halo in H&E, a strong brown band in IHC.
        const float band = smooth_band(dpix, 0.f, ring_w, 1.0f);
        if (band > 0.f) {
          float ang = std::atan2(v, u) - n.arc_start;
          ang = std::fmod(ang + 4.0f * static_cast<float>(M_PI), 2.0f * static_cast<float>(M_PI));
          if (ang <= n.arc_frac * 2.0f * static_cast<float>(M_PI)) {
            blend(he, y, x, Palette::he_halo, halo_alpha * band);
            blend(ihc, y, x, Palette::ihc_brown, brown_alpha * band);
          }
        }
      }
    }
  }
  clamp01(he);
  clamp01(ihc);
}

std::string sample_id(Her2Grade grade, int n_per_grade, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d_synth", grade_index(grade) * n_per_grade + index);
  return buf;
}

}  // namespace

PairedSample synth_sample(Her2Grade grade, int index, int size, std::uint64_t seed) {
  require(size >= 32, Errc::too_small, "synth size must be >= 32");
  Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(grade_index(grade)),
                                 static_cast<std::uint64_t>(index)));
  const Latent lat = draw_latent(grade, size, rng);
  PairedSample s;
  s.grade = grade;
  ImageF he, ihc;
  render_pair(lat, size, rng, he, ihc);
  s.he = std::move(he);
  s.ihc = std::move(ihc);
  return s;
}

std::vector<PairedSample> synth_corpus(int n_per_grade, int size, std::uint64_t seed) {
  require(n_per_grade >= 1, Errc::too_small, "n_per_grade must be >= 1");
  require(size >= 32, Errc::too_small, "synth size must be >= 32");
  std::vector<PairedSample> out;
  out.reserve(static_cast<size_t>(n_per_grade) * kNumGrades);
  for (Her2Grade g : kAllGrades) {
    for (int i = 0; i < n_per_grade; ++i) {
      PairedSample s = synth_sample(g, i, size, seed);
      s.id = sample_id(g, n_per_grade, i);
      out.push_back(std::move(s));
    }
  }
  return out;
}

float brown_proxy(const ImageF& ihc) {
  require(ihc.channels() == 3, Errc::shape_mismatch, "brown_proxy expects RGB");
  return (ihc.data.row(0) - ihc.data.row(2)).mean();
}

}  // namespace her2flex
