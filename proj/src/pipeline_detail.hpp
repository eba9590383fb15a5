#pragma once

// Internal pipeline machinery shared by the train and eval translation units.

#include "her2flex/augment.hpp"
#include "her2flex/cmgan.hpp"
#include "her2flex/config.hpp"
#include "her2flex/dataset.hpp"
#include "her2flex/encoder.hpp"
#include "her2flex/fusion.hpp"
#include "her2flex/nn/checkpoint.hpp"
#include "her2flex/nn/optim.hpp"
#include "her2flex/pipeline.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace her2flex::pipeline::detail {

using Store = nn::ParamStore<float>;

// --- config adapters ---------------------------------------------------------

inline GeneratorConfig gen_cfg(const RunConfig& cfg) {
  GeneratorConfig g;
  g.base_channels = cfg.gen_base;
  return g;
}

inline DiscriminatorConfig disc_cfg(const RunConfig& cfg) {
  DiscriminatorConfig d;
  d.base_channels = cfg.disc_base;
  return d;
}

inline EncoderConfig encoder_cfg(const RunConfig& cfg) {
  EncoderConfig e;
  e.shared_channels = cfg.c_s;
  e.specific_channels = cfg.c_he;
  return e;
}

inline FusionConfig fusion_cfg(const RunConfig& cfg) {
  FusionConfig f;
  f.reduced_channels = cfg.c_reduced;
  f.reduction_ratio = cfg.reduction_ratio;
  return f;
}

inline AugmentConfig augment_cfg(const RunConfig& cfg) {
  AugmentConfig a;
  a.enabled = cfg.aug_enabled;
  a.rotation_max_deg = cfg.aug_rotation_max_deg;
  a.hflip = cfg.aug_hflip;
  a.vflip = cfg.aug_vflip;
  a.crop_fraction = cfg.aug_crop_fraction;
  a.brightness_delta = cfg.aug_brightness_delta;
  a.contrast_delta = cfg.aug_contrast_delta;
  return a;
}

// --- seeds -------------------------------------------------------------------

// Stable tags for independent RNG streams.
enum SeedTag : std::uint64_t {
  kSeedSelector = 0x01,
  kSeedGenHe2Ihc = 0x02,
  kSeedDiscHe2Ihc = 0x03,
  kSeedGenIhc2He = 0x04,
  kSeedDiscIhc2He = 0x05,
  kSeedModel = 0x06,
  kSeedNoAtt = 0x07,
  kSeedBaseHe = 0x08,
  kSeedBaseIhc = 0x09,
  kSeedBaseConcat = 0x0a,
  kSeedEpoch = 0x10,
  kSeedAugment = 0x11,
  kSeedDropout = 0x12,
  kSeedCorrupt = 0x13,
};

// --- model construction ------------------------------------------------------

inline void init_full_model(Store& store, const RunConfig& cfg, bool with_attention, Rng& rng) {
  init_shared_encoder(store, encoder_cfg(cfg), rng);
  init_specific_encoder(store, "spec_he", encoder_cfg(cfg), rng);
  init_specific_encoder(store, "spec_ihc", encoder_cfg(cfg), rng);
  init_domain_head(store, cfg.c_he, rng);
  init_fusion(store, cfg.c_s, cfg.c_he, cfg.c_ihc, fusion_cfg(cfg), rng, with_attention);
}

struct ModelNodes {
  int logits = -1;
  int f_he = -1;
  int f_ihc = -1;
  int gap_shared_he = -1;
  int gap_shared_ihc = -1;
};

inline ModelNodes full_model_nodes(nn::Graph<float>& g, Store& store, int he, int ihc,
                                   bool attention) {
  ModelNodes out;
  const int sh_he = shared_encoder_nodes(g, store, he);
  const int sh_ihc = shared_encoder_nodes(g, store, ihc);
  const int f_s = nn::scale(g, nn::add(g, sh_he, sh_ihc), 0.5f);
  out.f_he = specific_encoder_nodes(g, store, "spec_he", he);
  out.f_ihc = specific_encoder_nodes(g, store, "spec_ihc", ihc);
  out.logits = fusion_logits(g, store, f_s, out.f_he, out.f_ihc, attention);
  out.gap_shared_he = nn::gap(g, sh_he);
  out.gap_shared_ihc = nn::gap(g, sh_ihc);
  return out;
}

// --- training presentation ---------------------------------------------------

enum class SampleArm { dual, he_single, ihc_single };

struct Presented {
  ImageF he_real, ihc_real;  // augmented real pair
  ImageF he_in, ihc_in;      // full-model inputs (one may be reconstructed)
  bool he_fake = false, ihc_fake = false;
  SampleArm arm = SampleArm::dual;
  Her2Grade grade = Her2Grade::G0;
};

// --- small file helpers ------------------------------------------------------

inline void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

void write_text_file(const std::string& path, const std::string& text);
void persist_config(const RunConfig& cfg, const std::string& dir);

// Runs two independent jobs on two threads; rethrows the first failure.
void parallel_invoke(const std::function<void()>& a, const std::function<void()>& b);

// --- corpus ------------------------------------------------------------------

std::vector<PairedSample> load_corpus(const RunConfig& cfg);
VectorF class_weight_vector(const RunConfig& cfg, const std::vector<PairedSample>& train);

void corrupt_modality(ImageF& img, const RunConfig& cfg, Rng& rng);

// --- checkpoints -------------------------------------------------------------

inline std::string ckpt_path(const std::string& run_dir, const std::string& stage) {
  return run_dir + "/" + stage + ".ckpt";
}

struct LoadedModels {
  Store model, noatt;
  Store base_he, base_ihc, base_concat;
  Store gen_he2ihc, gen_ihc2he;
  std::string stage;
};

// Loads the model stores an eval arm needs. Full arms prefer joint.ckpt under
// EvalStage::automatic; baselines and the no-attention variant live in
// classifier.ckpt.
LoadedModels load_models_for_eval(const RunConfig& cfg, const std::string& run_dir, Arm arm,
                                  EvalStage eval_stage);

// Inference-time forward through the fused classifier.
VectorF fused_probabilities(Store& model, const RunConfig& cfg, const ImageF& he, const ImageF& ihc,
                            bool attention);
VectorF baseline_probabilities(Store& store, const std::string& prefix, const ImageF& img);
VectorF concat_probabilities(Store& store, const ImageF& he, const ImageF& ihc);

}  // namespace her2flex::pipeline::detail
