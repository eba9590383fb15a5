#include "pipeline_detail.hpp"

#include "her2flex/png_io.hpp"
#include "her2flex/synth.hpp"
#include "her2flex/tsne.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>

namespace her2flex::pipeline {

namespace detail {
namespace {

using nlohmann::json;

bool dir_nonempty(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) return false;
  return std::filesystem::directory_iterator(dir) != std::filesystem::directory_iterator();
}

json metrics_to_json(const MetricsReport& r, const ConfusionMatrix& cm, const std::string& arm) {
  json per_class = json::array();
  for (int c = 0; c < kNumGrades; ++c) {
    per_class.push_back({{"grade", grade_label(kAllGrades[c])},
                         {"precision", r.per_class[c].precision},
                         {"recall", r.per_class[c].recall},
                         {"f1", r.per_class[c].f1},
                         {"support", r.per_class[c].support}});
  }
  json confusion = json::array();
  for (int i = 0; i < kNumGrades; ++i) {
    json row = json::array();
    for (int j = 0; j < kNumGrades; ++j) row.push_back(cm.counts(i, j));
    confusion.push_back(row);
  }
  json out = {{"arm", arm},
              {"accuracy", r.accuracy},
              {"macro_precision", r.macro_precision},
              {"macro_recall", r.macro_recall},
              {"macro_f1", r.macro_f1},
              {"weighted_f1", r.weighted_f1},
              {"per_class", per_class},
              {"confusion", confusion},
              {"n_samples", cm.total()}};
  if (r.psnr_db) out["psnr_db"] = *r.psnr_db;
  if (r.ssim) out["ssim"] = *r.ssim;
  return out;
}

}  // namespace
}  // namespace detail

void cmd_synth(const RunConfig& cfg, const std::string& out_dir, bool force) {
  using detail::json;
  const std::string he_dir = out_dir + "/HE";
  const std::string ihc_dir = out_dir + "/IHC";
  require(force || (!detail::dir_nonempty(he_dir) && !detail::dir_nonempty(ihc_dir)),
          Errc::io_error, "destination is not empty (pass --force to overwrite)");
  detail::ensure_dir(he_dir);
  detail::ensure_dir(ihc_dir);
  detail::persist_config(cfg, out_dir);

  const auto corpus = synth_corpus(cfg.synth_per_grade, cfg.synth_size, cfg.seed);
  json samples = json::array();
  for (const auto& s : corpus) {
    const std::string name = s.id + "_" + grade_label(s.grade) + ".png";
    write_png(he_dir + "/" + name, *s.he);
    write_png(ihc_dir + "/" + name, *s.ihc);
    samples.push_back({{"id", s.id}, {"grade", grade_label(s.grade)}});
  }
  const json manifest = {{"seed", cfg.seed},
                         {"size", cfg.synth_size},
                         {"n_per_grade", cfg.synth_per_grade},
                         {"samples", samples}};
  detail::write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

MetricsReport cmd_eval(const RunConfig& cfg, const std::string& run_dir, Arm arm,
                       EvalStage eval_stage) {
  using detail::json;
  validate_config(cfg);
  auto models = detail::load_models_for_eval(cfg, run_dir, arm, eval_stage);
  const auto corpus = detail::load_corpus(cfg);
  auto split = split_dataset(corpus, cfg.seed);

  const std::string eval_dir = run_dir + "/eval_" + arm_name(arm);
  detail::ensure_dir(eval_dir);
  detail::persist_config(cfg, eval_dir);

  const GeneratorConfig gcfg = detail::gen_cfg(cfg);
  std::vector<Her2Grade> truth, pred;
  double psnr_sum = 0, ssim_sum = 0;
  long recon_count = 0;

  std::FILE* pred_file = std::fopen((eval_dir + "/predictions.csv").c_str(), "wb");
  require(pred_file != nullptr, Errc::io_error, "cannot write predictions.csv");
  std::fprintf(pred_file, "id,arity,reconstruction,p0,p1,p2,p3,predicted,true\n");

  for (size_t idx = 0; idx < split.test.size(); ++idx) {
    PairedSample s = split.test[idx];
    if (cfg.corrupt != "none") {
      Rng rng = make_rng(derive_seed(cfg.seed, detail::kSeedCorrupt, idx));
      detail::corrupt_modality(cfg.corrupt == "he" ? *s.he : *s.ihc, cfg, rng);
    }

    VectorF probs;
    std::string arity = "dual";
    std::string recon = "none";
    switch (arm) {
      case Arm::he_only_baseline:
        probs = detail::baseline_probabilities(models.base_he, "base", *s.he);
        arity = "single";
        break;
      case Arm::ihc_only_baseline:
        probs = detail::baseline_probabilities(models.base_ihc, "base", *s.ihc);
        arity = "single";
        break;
      case Arm::dual_concat_baseline:
        probs = detail::concat_probabilities(models.base_concat, *s.he, *s.ihc);
        break;
      case Arm::dual_full:
        probs = detail::fused_probabilities(models.model, cfg, *s.he, *s.ihc, true);
        break;
      case Arm::dual_no_attention:
        probs = detail::fused_probabilities(models.noatt, cfg, *s.he, *s.ihc, false);
        break;
      case Arm::he_plus_fake_ihc: {
        const ImageF fake = generator_forward(models.gen_he2ihc, *s.he, gcfg);
        psnr_sum += psnr(fake, *s.ihc);
        ssim_sum += ssim(fake, *s.ihc);
        ++recon_count;
        probs = detail::fused_probabilities(models.model, cfg, *s.he, fake, true);
        arity = "single";
        recon = "fake_ihc";
        break;
      }
      case Arm::ihc_plus_fake_he: {
        const ImageF fake = generator_forward(models.gen_ihc2he, *s.ihc, gcfg);
        psnr_sum += psnr(fake, *s.he);
        ssim_sum += ssim(fake, *s.he);
        ++recon_count;
        probs = detail::fused_probabilities(models.model, cfg, fake, *s.ihc, true);
        arity = "single";
        recon = "fake_he";
        break;
      }
    }

    const Her2Grade p = predicted_grade(probs);
    truth.push_back(s.grade);
    pred.push_back(p);
    std::fprintf(pred_file, "%s,%s,%s,%.6f,%.6f,%.6f,%.6f,%s,%s\n", s.id.c_str(), arity.c_str(),
                 recon.c_str(), probs(0), probs(1), probs(2), probs(3),
                 grade_label(p).c_str(), grade_label(s.grade).c_str());
  }
  std::fclose(pred_file);

  const ConfusionMatrix cm = confusion(truth, pred);
  MetricsReport report = prf_metrics(cm);
  if (recon_count > 0) {
    report.psnr_db = psnr_sum / recon_count;
    report.ssim = ssim_sum / recon_count;
  }
  detail::write_text_file(eval_dir + "/metrics.json",
                          detail::metrics_to_json(report, cm, arm_name(arm)).dump(2) + "\n");
  return report;
}

InferRecord cmd_infer(const RunConfig& cfg, const std::string& run_dir,
                      const std::string& he_path, const std::string& ihc_path, Arity arity,
                      bool dump_reconstruction) {
  using detail::json;
  validate_config(cfg);
  detail::ensure_dir(run_dir);

  // Selector plus the newest full-model checkpoint.
  const auto sel_ckpt = nn::load_checkpoint(detail::ckpt_path(run_dir, "selector"));
  require(sel_ckpt.stage == "selector", Errc::corrupt_checkpoint,
          "selector checkpoint carries the wrong stage tag");
  Rng shape_rng = make_rng(0);
  detail::Store selector;
  init_selector(selector, SelectorConfig{cfg.selector_base}, shape_rng);
  nn::load_store(sel_ckpt, "selector", selector);
  auto models = detail::load_models_for_eval(cfg, run_dir, Arm::dual_full, EvalStage::automatic);

  InputRequest req;
  req.declared_arity = arity;
  std::string stem = "case";
  if (!he_path.empty()) {
    req.he = read_png(he_path);
    stem = std::filesystem::path(he_path).stem().string();
  }
  if (!ihc_path.empty()) {
    req.ihc = read_png(ihc_path);
    if (he_path.empty()) stem = std::filesystem::path(ihc_path).stem().string();
  }
  auto fit = [&](ImageF& img) {
    if (img.height != cfg.patch_size || img.width != cfg.patch_size)
      img = resize_bilinear(img, cfg.patch_size, cfg.patch_size);
  };
  if (req.he) fit(*req.he);
  if (req.ihc) fit(*req.ihc);

  InferRecord record;
  record.id = stem;
  record.declared_arity = arity;
  record.decision = route(req, selector);

  ImageF he_in, ihc_in;
  std::optional<ImageF> reconstructed;
  if (record.decision.path == BranchPath::DualPath) {
    he_in = *req.he;
    ihc_in = *req.ihc;
  } else {
    const GeneratorConfig gcfg = detail::gen_cfg(cfg);
    const ImageF& present = req.he ? *req.he : *req.ihc;
    if (*record.decision.reconstruct_direction == ReconDirection::HEtoIHC) {
      he_in = present;
      ihc_in = generator_forward(models.gen_he2ihc, present, gcfg);
      reconstructed = ihc_in;
      record.ihc_reconstructed = true;
    } else {
      ihc_in = present;
      he_in = generator_forward(models.gen_ihc2he, present, gcfg);
      reconstructed = he_in;
      record.he_reconstructed = true;
    }
  }

  record.probabilities = detail::fused_probabilities(models.model, cfg, he_in, ihc_in, true);
  record.predicted = predicted_grade(record.probabilities);

  json decision = {{"path", record.decision.path == BranchPath::DualPath ? "dual" : "single"},
                   {"confidence", record.decision.confidence}};
  if (record.decision.detected_modality)
    decision["detected_modality"] = modality_name(*record.decision.detected_modality);
  if (record.decision.reconstruct_direction)
    decision["reconstruct_direction"] = direction_name(*record.decision.reconstruct_direction);

  json out = {{"id", record.id},
              {"declared_arity", arity_name(arity)},
              {"decision", decision},
              {"he_reconstructed", record.he_reconstructed},
              {"ihc_reconstructed", record.ihc_reconstructed},
              {"probabilities",
               {record.probabilities(0), record.probabilities(1), record.probabilities(2),
                record.probabilities(3)}},
              {"predicted_grade", grade_label(record.predicted)},
              {"checkpoint_stage", models.stage}};
  detail::write_text_file(run_dir + "/infer_" + stem + ".json", out.dump(2) + "\n");
  if (dump_reconstruction && reconstructed)
    write_png(run_dir + "/infer_" + stem + "_reconstructed.png", *reconstructed);
  return record;
}

void cmd_export_features(const RunConfig& cfg, const std::string& run_dir, bool with_tsne) {
  validate_config(cfg);
  auto models = detail::load_models_for_eval(cfg, run_dir, Arm::dual_full, EvalStage::automatic);
  const auto corpus = detail::load_corpus(cfg);
  auto split = split_dataset(corpus, cfg.seed);

  std::FILE* f = std::fopen((run_dir + "/features.csv").c_str(), "wb");
  require(f != nullptr, Errc::io_error, "cannot write features.csv");
  std::fprintf(f, "id,grade");
  for (int d = 0; d < cfg.c_s; ++d) std::fprintf(f, ",f%d", d);
  std::fprintf(f, "\n");

  MatrixD features(static_cast<Eigen::Index>(split.test.size()), cfg.c_s);
  for (size_t i = 0; i < split.test.size(); ++i) {
    const auto& s = split.test[i];
    // GAP-ed shared features, averaged over the two modality views.
    const auto f_he = encode_shared(models.model, *s.he);
    const auto f_ihc = encode_shared(models.model, *s.ihc);
    const VectorF v = 0.5f * (channel_means(f_he) + channel_means(f_ihc));
    std::fprintf(f, "%s,%s", s.id.c_str(), grade_label(s.grade).c_str());
    for (int d = 0; d < cfg.c_s; ++d) {
      std::fprintf(f, ",%.6f", v(d));
      features(static_cast<Eigen::Index>(i), d) = v(d);
    }
    std::fprintf(f, "\n");
  }
  std::fclose(f);

  if (!with_tsne) return;
  TsneConfig tcfg;
  tcfg.perplexity = cfg.tsne_perplexity;
  tcfg.iterations = cfg.tsne_iterations;
  tcfg.seed = cfg.seed;
  const auto result = tsne_embed(features, tcfg);
  std::FILE* t = std::fopen((run_dir + "/tsne.csv").c_str(), "wb");
  require(t != nullptr, Errc::io_error, "cannot write tsne.csv");
  std::fprintf(t, "id,x,y,grade\n");
  for (size_t i = 0; i < split.test.size(); ++i)
    std::fprintf(t, "%s,%.6f,%.6f,%s\n", split.test[i].id.c_str(),
                 result.embedding(static_cast<Eigen::Index>(i), 0),
                 result.embedding(static_cast<Eigen::Index>(i), 1),
                 grade_label(split.test[i].grade).c_str());
  std::fclose(t);
}

}  // namespace her2flex::pipeline
