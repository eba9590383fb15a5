#pragma once

#include "her2flex/types.hpp"

#include <cstdint>
#include <string>

namespace her2flex {

// Resolved run configuration. Serialized as sectioned key/value text; every
// command persists its resolved config next to its outputs so runs can be
// reproduced byte-for-byte.
struct RunConfig {
  // [data]
  std::string data_root;  // directory holding HE/ and IHC/
  int patch_size = 64;

  // [synth]
  int synth_per_grade = 50;
  int synth_size = 64;

  // [model]
  int c_s = 16;
  int c_he = 8;
  int c_ihc = 8;
  int c_reduced = 16;
  int reduction_ratio = 8;
  int pyramid_levels = 3;
  int gen_base = 12;
  int disc_base = 12;
  int selector_base = 8;
  int baseline_base = 8;

  // [loss]
  float lambda1 = 1.0f;
  float lambda2 = 0.1f;
  float lambda3 = 1.0f;
  float lambda4 = 100.0f;
  std::string class_weight_mode = "inverse_freq";  // or "uniform"

  // [train]
  std::uint64_t seed = 0;
  float lr = 1e-4f;
  float poly_power = 0.9f;
  float weight_decay = 1e-4f;
  int batch_size = 16;
  int epochs_selector = 3;
  int epochs_cmgan = 8;
  int epochs_classifier = 12;
  int epochs_joint = 1;
  float modality_dropout = 0.4f;

  // [augment]
  bool aug_enabled = true;
  float aug_rotation_max_deg = 15.0f;
  bool aug_hflip = true;
  bool aug_vflip = true;
  float aug_crop_fraction = 0.9f;
  float aug_brightness_delta = 0.1f;
  float aug_contrast_delta = 0.1f;

  // [eval]
  std::string corrupt = "none";  // none | he | ihc
  float corrupt_brightness = -0.3f;
  float corrupt_noise_sigma = 0.1f;
  float tsne_perplexity = 30.0f;
  int tsne_iterations = 1000;
};

// Sectioned key/value text round trip. Parsing rejects unknown keys; the
// writer emits a fixed key order with round-trippable float formatting.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string config_to_text(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

}  // namespace her2flex
