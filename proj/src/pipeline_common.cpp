#include "pipeline_detail.hpp"

#include "her2flex/image_ops.hpp"

#include <exception>
#include <fstream>
#include <thread>

namespace her2flex::pipeline {

Stage stage_from_name(const std::string& name) {
  if (name == "selector") return Stage::selector;
  if (name == "cmgan") return Stage::cmgan;
  if (name == "classifier") return Stage::classifier;
  if (name == "joint") return Stage::joint;
  fail(Errc::bad_config, "unknown stage '" + name + "'");
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::selector: return "selector";
    case Stage::cmgan: return "cmgan";
    case Stage::classifier: return "classifier";
    case Stage::joint: return "joint";
  }
  return "?";
}

Arm arm_from_name(const std::string& name) {
  if (name == "he_only_baseline") return Arm::he_only_baseline;
  if (name == "ihc_only_baseline") return Arm::ihc_only_baseline;
  if (name == "he_plus_fake_ihc") return Arm::he_plus_fake_ihc;
  if (name == "ihc_plus_fake_he") return Arm::ihc_plus_fake_he;
  if (name == "dual_concat_baseline") return Arm::dual_concat_baseline;
  if (name == "dual_full") return Arm::dual_full;
  if (name == "dual_no_attention") return Arm::dual_no_attention;
  fail(Errc::bad_config, "unknown arm '" + name + "'");
}

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::he_only_baseline: return "he_only_baseline";
    case Arm::ihc_only_baseline: return "ihc_only_baseline";
    case Arm::he_plus_fake_ihc: return "he_plus_fake_ihc";
    case Arm::ihc_plus_fake_he: return "ihc_plus_fake_he";
    case Arm::dual_concat_baseline: return "dual_concat_baseline";
    case Arm::dual_full: return "dual_full";
    case Arm::dual_no_attention: return "dual_no_attention";
  }
  return "?";
}

namespace detail {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(bool(out), Errc::io_error, "cannot write " + path);
  out << text;
}

void persist_config(const RunConfig& cfg, const std::string& dir) {
  ensure_dir(dir);
  write_text_file(dir + "/config.resolved.ini", config_to_text(cfg));
}

void parallel_invoke(const std::function<void()>& a, const std::function<void()>& b) {
  std::exception_ptr err_a, err_b;
  std::thread ta([&] {
    try {
      a();
    } catch (...) {
      err_a = std::current_exception();
    }
  });
  try {
    b();
  } catch (...) {
    err_b = std::current_exception();
  }
  ta.join();
  if (err_a) std::rethrow_exception(err_a);
  if (err_b) std::rethrow_exception(err_b);
}

std::vector<PairedSample> load_corpus(const RunConfig& cfg) {
  require(!cfg.data_root.empty(), Errc::bad_config, "data root is not configured");
  auto samples = load_dataset(cfg.data_root + "/HE", cfg.data_root + "/IHC", true);
  for (auto& s : samples) {
    if (s.he->height != cfg.patch_size || s.he->width != cfg.patch_size)
      *s.he = resize_bilinear(*s.he, cfg.patch_size, cfg.patch_size);
    if (s.ihc->height != cfg.patch_size || s.ihc->width != cfg.patch_size)
      *s.ihc = resize_bilinear(*s.ihc, cfg.patch_size, cfg.patch_size);
  }
  return samples;
}

VectorF class_weight_vector(const RunConfig& cfg, const std::vector<PairedSample>& train) {
  VectorF w = VectorF::Ones(kNumGrades);
  if (cfg.class_weight_mode != "inverse_freq") return w;
  Eigen::Vector4f counts = Eigen::Vector4f::Zero();
  for (const auto& s : train) counts(grade_index(s.grade)) += 1.0f;
  for (int i = 0; i < kNumGrades; ++i) w(i) = 1.0f / std::max(counts(i), 1.0f);
  w *= static_cast<float>(kNumGrades) / w.sum();  // normalize to mean 1
  return w;
}

void corrupt_modality(ImageF& img, const RunConfig& cfg, Rng& rng) {
  adjust_brightness(img, cfg.corrupt_brightness);
  add_gaussian_noise(img, cfg.corrupt_noise_sigma, rng);
}

LoadedModels load_models_for_eval(const RunConfig& cfg, const std::string& run_dir, Arm arm,
                                  EvalStage eval_stage) {
  LoadedModels out;
  const bool full_arm = arm == Arm::dual_full || arm == Arm::he_plus_fake_ihc ||
                        arm == Arm::ihc_plus_fake_he;
  std::string stage = "classifier";
  if (full_arm) {
    if (eval_stage == EvalStage::joint ||
        (eval_stage == EvalStage::automatic &&
         std::filesystem::exists(ckpt_path(run_dir, "joint"))))
      stage = "joint";
  }
  const auto ckpt = nn::load_checkpoint(ckpt_path(run_dir, stage));
  require(ckpt.stage == stage, Errc::corrupt_checkpoint,
          "checkpoint " + ckpt_path(run_dir, stage) + " carries stage tag '" + ckpt.stage + "'");
  out.stage = stage;

  Rng dummy = make_rng(0);  // shapes only; values are overwritten by the load
  switch (arm) {
    case Arm::dual_full:
    case Arm::he_plus_fake_ihc:
    case Arm::ihc_plus_fake_he:
      init_full_model(out.model, cfg, true, dummy);
      nn::load_store(ckpt, "model", out.model);
      init_generator(out.gen_he2ihc, gen_cfg(cfg), dummy);
      init_generator(out.gen_ihc2he, gen_cfg(cfg), dummy);
      nn::load_store(ckpt, "gen_he2ihc", out.gen_he2ihc);
      nn::load_store(ckpt, "gen_ihc2he", out.gen_ihc2he);
      break;
    case Arm::dual_no_attention:
      init_full_model(out.noatt, cfg, false, dummy);
      nn::load_store(ckpt, "noatt", out.noatt);
      break;
    case Arm::he_only_baseline:
      nn::init_small_cnn(out.base_he, "base", 3, cfg.baseline_base, kNumGrades, dummy);
      nn::load_store(ckpt, "base_he", out.base_he);
      break;
    case Arm::ihc_only_baseline:
      nn::init_small_cnn(out.base_ihc, "base", 3, cfg.baseline_base, kNumGrades, dummy);
      nn::load_store(ckpt, "base_ihc", out.base_ihc);
      break;
    case Arm::dual_concat_baseline:
      nn::init_small_cnn(out.base_concat, "base", 6, cfg.baseline_base, kNumGrades, dummy);
      nn::load_store(ckpt, "base_concat", out.base_concat);
      break;
  }
  return out;
}

VectorF fused_probabilities(Store& model, const RunConfig& cfg, const ImageF& he, const ImageF& ihc,
                            bool attention) {
  nn::Graph<float> g(false);
  const auto nodes = full_model_nodes(g, model, g.input(he), g.input(ihc), attention);
  const int probs = nn::softmax(g, nodes.logits);
  (void)cfg;
  return g.value(probs).col(0);
}

VectorF baseline_probabilities(Store& store, const std::string& prefix, const ImageF& img) {
  nn::Graph<float> g(false);
  const int probs = nn::softmax(g, nn::small_cnn_logits(g, store, prefix, g.input(img)));
  return g.value(probs).col(0);
}

VectorF concat_probabilities(Store& store, const ImageF& he, const ImageF& ihc) {
  nn::Graph<float> g(false);
  const int both = nn::concat_ch(g, {g.input(he), g.input(ihc)});
  const int probs = nn::softmax(g, nn::small_cnn_logits(g, store, "base", both));
  return g.value(probs).col(0);
}

}  // namespace detail
}  // namespace her2flex::pipeline
