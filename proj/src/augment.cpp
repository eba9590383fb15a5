#include "her2flex/augment.hpp"

namespace her2flex {

GeoDraw sample_geo(const AugmentConfig& cfg, int height, int width, Rng& rng) {
  GeoDraw d;
  if (cfg.rotation_max_deg > 0.0f)
    d.angle_deg = uniform<float>(rng, -cfg.rotation_max_deg, cfg.rotation_max_deg);
  if (cfg.hflip) d.hflip = coin(rng);
  if (cfg.vflip) d.vflip = coin(rng);
  if (cfg.crop_fraction < 1.0f) {
    d.crop_h = std::max(1, static_cast<int>(std::lround(cfg.crop_fraction * height)));
    d.crop_w = std::max(1, static_cast<int>(std::lround(cfg.crop_fraction * width)));
    d.crop_y = uniform_int(rng, 0, height - d.crop_h);
    d.crop_x = uniform_int(rng, 0, width - d.crop_w);
  }
  return d;
}

ImageF apply_geo(const ImageF& img, const GeoDraw& draw) {
  ImageF out = img;
  if (draw.hflip) out = flip_horizontal(out);
  if (draw.vflip) out = flip_vertical(out);
  if (draw.angle_deg != 0.0f) out = rotate_bilinear(out, draw.angle_deg);
  if (draw.crop_h > 0) out = crop_resize(out, draw.crop_y, draw.crop_x, draw.crop_h, draw.crop_w);
  clamp01(out);
  return out;
}

void apply_photometric(ImageF& img, const AugmentConfig& cfg, Rng& rng) {
  if (cfg.brightness_delta > 0.0f)
    adjust_brightness(img, uniform<float>(rng, -cfg.brightness_delta, cfg.brightness_delta));
  if (cfg.contrast_delta > 0.0f)
    adjust_contrast(img, uniform<float>(rng, -cfg.contrast_delta, cfg.contrast_delta));
}

PairedSample augment(const PairedSample& sample, const AugmentConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return sample;

  const ImageF& ref = sample.he ? *sample.he : *sample.ihc;
  const GeoDraw draw = sample_geo(cfg, ref.height, ref.width, rng);

  PairedSample out;
  out.id = sample.id;
  out.grade = sample.grade;
  if (sample.he) {
    ImageF img = apply_geo(*sample.he, draw);
    apply_photometric(img, cfg, rng);
    out.he = std::move(img);
  }
  if (sample.ihc) {
    ImageF img = apply_geo(*sample.ihc, draw);
    apply_photometric(img, cfg, rng);
    out.ihc = std::move(img);
  }
  return out;
}

}  // namespace her2flex
