#pragma once

#include "her2flex/dataset.hpp"
#include "her2flex/image_ops.hpp"

namespace her2flex {

struct AugmentConfig {
  bool enabled = true;
  float rotation_max_deg = 15.0f;
  bool hflip = true;
  bool vflip = true;
  float crop_fraction = 0.9f;   // in (0, 1]; 1 disables cropping
  float brightness_delta = 0.1f;
  float contrast_delta = 0.1f;
};

// One geometric draw, applied identically to both modalities of a pair.
struct GeoDraw {
  float angle_deg = 0.0f;
  bool hflip = false;
  bool vflip = false;
  int crop_y = 0, crop_x = 0;
  int crop_h = 0, crop_w = 0;  // 0 means no crop
};

GeoDraw sample_geo(const AugmentConfig& cfg, int height, int width, Rng& rng);

ImageF apply_geo(const ImageF& img, const GeoDraw& draw);

// Photometric jitter is drawn per call, independently per modality.
void apply_photometric(ImageF& img, const AugmentConfig& cfg, Rng& rng);

// Geometric transforms are drawn once and shared across the pair; photometric
// jitter is drawn independently per modality. Output values stay in [0, 1]
// and shapes are unchanged.
PairedSample augment(const PairedSample& sample, const AugmentConfig& cfg, Rng& rng);

}  // namespace her2flex
