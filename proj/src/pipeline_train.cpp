#include "pipeline_detail.hpp"

#include <cstdio>
#include <map>
#include <memory>

namespace her2flex::pipeline {

namespace detail {
namespace {

// Deterministic fixed-format CSV history writer.
class HistoryWriter {
 public:
  HistoryWriter(const std::string& path, const std::string& header) {
    file_ = std::fopen(path.c_str(), "wb");
    require(file_ != nullptr, Errc::io_error, "cannot write " + path);
    std::fprintf(file_, "%s\n", header.c_str());
  }
  ~HistoryWriter() {
    if (file_) std::fclose(file_);
  }
  void row(int epoch, const std::vector<double>& values) {
    std::fprintf(file_, "%d", epoch);
    for (double v : values) std::fprintf(file_, ",%.6f", v);
    std::fprintf(file_, "\n");
    std::fflush(file_);
  }

 private:
  std::FILE* file_ = nullptr;
};

std::vector<size_t> shuffled_indices(size_t n, std::uint64_t seed) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// --- selector stage ----------------------------------------------------------

double selector_val_accuracy(Store& store,
                             const std::vector<std::pair<ImageF, Modality>>& val) {
  long correct = 0;
  for (const auto& [img, m] : val) correct += classify_modality(store, img).first == m;
  return val.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(val.size());
}

void train_selector_stage(const RunConfig& cfg, const std::string& run_dir,
                          const SplitResult& split) {
  std::vector<std::pair<ImageF, Modality>> train_items, val_items;
  for (const auto& s : split.train) {
    train_items.emplace_back(*s.he, Modality::HE);
    train_items.emplace_back(*s.ihc, Modality::IHC);
  }
  for (const auto& s : split.val) {
    val_items.emplace_back(*s.he, Modality::HE);
    val_items.emplace_back(*s.ihc, Modality::IHC);
  }

  Store store;
  Rng rng = make_rng(derive_seed(cfg.seed, kSeedSelector));
  init_selector(store, SelectorConfig{cfg.selector_base}, rng);

  HistoryWriter history(run_dir + "/selector_history.csv", "epoch,loss,train_acc,val_acc");
  double best_val = -1.0;
  Store best = store;
  for (int epoch = 0; epoch < cfg.epochs_selector; ++epoch) {
    const auto stats = train_selector(store, train_items, 1, cfg.seed, cfg.lr, cfg.batch_size,
                                      /*epoch_offset=*/epoch);
    const double val_acc = selector_val_accuracy(store, val_items);
    history.row(epoch, {stats[0].loss, stats[0].accuracy, val_acc});
    if (val_acc > best_val) {
      best_val = val_acc;
      best = store;
    }
  }

  nn::Checkpoint ckpt;
  ckpt.stage = "selector";
  ckpt.config_text = config_to_text(cfg);
  nn::add_store(ckpt, "selector", best);
  nn::save_checkpoint(ckpt_path(run_dir, "selector"), ckpt);
}

// --- cmgan stage -------------------------------------------------------------

struct DirectionResult {
  Store gen, disc;
  double best_psnr = -1.0;
};

double direction_val_psnr(Store& gen, const GeneratorConfig& gcfg,
                          const std::vector<PairedSample>& val, ReconDirection dir) {
  double acc = 0;
  for (const auto& s : val) {
    const ImageF& src = dir == ReconDirection::HEtoIHC ? *s.he : *s.ihc;
    const ImageF& tgt = dir == ReconDirection::HEtoIHC ? *s.ihc : *s.he;
    acc += psnr(generator_forward(gen, src, gcfg), tgt);
  }
  return val.empty() ? 0.0 : acc / static_cast<double>(val.size());
}

DirectionResult train_direction(const RunConfig& cfg, const std::string& run_dir,
                                const SplitResult& split, ReconDirection dir) {
  const GeneratorConfig gcfg = gen_cfg(cfg);
  const bool he2ihc = dir == ReconDirection::HEtoIHC;
  DirectionResult result;
  Rng grng = make_rng(derive_seed(cfg.seed, he2ihc ? kSeedGenHe2Ihc : kSeedGenIhc2He));
  Rng drng = make_rng(derive_seed(cfg.seed, he2ihc ? kSeedDiscHe2Ihc : kSeedDiscIhc2He));
  init_generator(result.gen, gcfg, grng);
  init_discriminator(result.disc, disc_cfg(cfg), drng);

  const long steps_per_epoch =
      (static_cast<long>(split.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  nn::AdamW<float> gen_opt, disc_opt;
  gen_opt.lr0 = disc_opt.lr0 = cfg.lr;
  gen_opt.poly_power = disc_opt.poly_power = cfg.poly_power;
  gen_opt.total_steps = disc_opt.total_steps = steps_per_epoch * cfg.epochs_cmgan;

  const std::string tag = he2ihc ? "he2ihc" : "ihc2he";
  HistoryWriter history(run_dir + "/cmgan_" + tag + "_history.csv",
                        "epoch,g_loss,d_loss,l1,val_psnr");
  const AugmentConfig aug = augment_cfg(cfg);
  Store best_gen = result.gen, best_disc = result.disc;

  for (int epoch = 0; epoch < cfg.epochs_cmgan; ++epoch) {
    const auto order = shuffled_indices(
        split.train.size(),
        derive_seed(cfg.seed, kSeedEpoch + (he2ihc ? 0x100 : 0x200), epoch));
    Rng aug_rng = make_rng(derive_seed(cfg.seed, kSeedAugment + (he2ihc ? 0x100 : 0x200), epoch));

    double g_sum = 0, d_sum = 0, l1_sum = 0;
    long batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::pair<ImageF, ImageF>> batch;
      for (size_t i = start; i < end; ++i) {
        const PairedSample aug_sample = augment(split.train[order[i]], aug, aug_rng);
        if (he2ihc)
          batch.emplace_back(*aug_sample.he, *aug_sample.ihc);
        else
          batch.emplace_back(*aug_sample.ihc, *aug_sample.he);
      }
      const auto step = gan_train_step(result.gen, result.disc, batch, cfg.lambda3, cfg.lambda4,
                                       cfg.pyramid_levels, gcfg, gen_opt, disc_opt);
      g_sum += step.g_loss;
      d_sum += step.d_loss;
      l1_sum += step.l1;
      ++batches;
    }
    const double val_psnr = direction_val_psnr(result.gen, gcfg, split.val, dir);
    history.row(epoch, {g_sum / batches, d_sum / batches, l1_sum / batches, val_psnr});
    if (val_psnr > result.best_psnr) {
      result.best_psnr = val_psnr;
      best_gen = result.gen;
      best_disc = result.disc;
    }
  }
  result.gen = std::move(best_gen);
  result.disc = std::move(best_disc);
  return result;
}

void train_cmgan_stage(const RunConfig& cfg, const std::string& run_dir,
                       const SplitResult& split) {
  DirectionResult he2ihc, ihc2he;
  // The two directions are independent models with separate RNG streams.
  parallel_invoke(
      [&] { he2ihc = train_direction(cfg, run_dir, split, ReconDirection::HEtoIHC); },
      [&] { ihc2he = train_direction(cfg, run_dir, split, ReconDirection::IHCtoHE); });

  nn::Checkpoint ckpt;
  ckpt.stage = "cmgan";
  ckpt.config_text = config_to_text(cfg);
  nn::add_store(ckpt, "gen_he2ihc", he2ihc.gen);
  nn::add_store(ckpt, "disc_he2ihc", he2ihc.disc);
  nn::add_store(ckpt, "gen_ihc2he", ihc2he.gen);
  nn::add_store(ckpt, "disc_ihc2he", ihc2he.disc);
  nn::save_checkpoint(ckpt_path(run_dir, "cmgan"), ckpt);
}

// --- classifier stage --------------------------------------------------------

std::vector<Presented> present_batch(const RunConfig& cfg, const SplitResult& split,
                                     const std::vector<size_t>& order, size_t start, size_t end,
                                     Store& gen_he2ihc, Store& gen_ihc2he, Rng& aug_rng,
                                     Rng& arm_rng) {
  const AugmentConfig aug = augment_cfg(cfg);
  const GeneratorConfig gcfg = gen_cfg(cfg);
  std::vector<Presented> out;
  out.reserve(end - start);
  for (size_t i = start; i < end; ++i) {
    const PairedSample s = augment(split.train[order[i]], aug, aug_rng);
    Presented p;
    p.grade = s.grade;
    p.he_real = *s.he;
    p.ihc_real = *s.ihc;
    const float roll = uniform<float>(arm_rng, 0.0f, 1.0f);
    if (roll < 1.0f - cfg.modality_dropout) {
      p.arm = SampleArm::dual;
      p.he_in = p.he_real;
      p.ihc_in = p.ihc_real;
    } else if (roll < 1.0f - cfg.modality_dropout / 2.0f) {
      p.arm = SampleArm::he_single;
      p.he_in = p.he_real;
      p.ihc_in = generator_forward(gen_he2ihc, p.he_real, gcfg);
      p.ihc_fake = true;
    } else {
      p.arm = SampleArm::ihc_single;
      p.ihc_in = p.ihc_real;
      p.he_in = generator_forward(gen_ihc2he, p.ihc_real, gcfg);
      p.he_fake = true;
    }
    out.push_back(std::move(p));
  }
  return out;
}

struct FullBatchLosses {
  double cls = 0, dom = 0, mmd = 0;
};

// One optimizer step of a full model (with or without attention) on a
// presented batch: Eq. 2 classification + Eq. 3 encoder losses.
FullBatchLosses full_model_batch_step(Store& store, bool attention, const RunConfig& cfg,
                                      const std::vector<Presented>& batch,
                                      const VectorF& class_weights, nn::AdamW<float>& opt) {
  const VectorF uniform2 = VectorF::Ones(2);
  nn::Graph<float> g;
  std::vector<int> cls_terms, dom_terms;
  std::vector<int> shared_he, shared_ihc;
  for (const auto& p : batch) {
    const auto nodes = full_model_nodes(g, store, g.input(p.he_in), g.input(p.ihc_in), attention);
    cls_terms.push_back(nn::softmax_ce(g, nodes.logits, grade_index(p.grade), class_weights));
    dom_terms.push_back(nn::softmax_ce(g, domain_logits(g, store, nodes.f_he), 0, uniform2));
    dom_terms.push_back(nn::softmax_ce(g, domain_logits(g, store, nodes.f_ihc), 1, uniform2));
    shared_he.push_back(nodes.gap_shared_he);
    shared_ihc.push_back(nodes.gap_shared_ihc);
  }
  const int cls = nn::mean_scalars(g, cls_terms);
  const int dom = nn::mean_scalars(g, dom_terms);

  std::vector<VectorF> he_vecs, ihc_vecs;
  for (int id : shared_he) he_vecs.push_back(g.value(id).col(0));
  for (int id : shared_ihc) ihc_vecs.push_back(g.value(id).col(0));
  const float sigma = median_heuristic_sigma(he_vecs, ihc_vecs);
  const int mmd = nn::mmd_gaussian(g, shared_he, shared_ihc, sigma);

  const int loss = nn::weighted_sum(g, {cls, dom, mmd}, {1.0f, cfg.lambda1, cfg.lambda2});
  FullBatchLosses out;
  out.cls = g.scalar_value(cls);
  out.dom = g.scalar_value(dom);
  out.mmd = g.scalar_value(mmd);
  require(std::isfinite(g.scalar_value(loss)), Errc::non_finite_loss, "classifier loss diverged");
  store.zero_grads();
  g.backward(loss);
  opt.step(store);
  return out;
}

void baseline_batch_step(Store& store, const std::string& prefix, bool concat_inputs,
                         Modality which, const std::vector<Presented>& batch,
                         const VectorF& class_weights, nn::AdamW<float>& opt) {
  nn::Graph<float> g;
  std::vector<int> terms;
  for (const auto& p : batch) {
    int input;
    if (concat_inputs)
      input = nn::concat_ch(g, {g.input(p.he_real), g.input(p.ihc_real)});
    else
      input = g.input(which == Modality::HE ? p.he_real : p.ihc_real);
    const int logits = nn::small_cnn_logits(g, store, prefix, input);
    terms.push_back(nn::softmax_ce(g, logits, grade_index(p.grade), class_weights));
  }
  const int loss = nn::mean_scalars(g, terms);
  require(std::isfinite(g.scalar_value(loss)), Errc::non_finite_loss, "baseline loss diverged");
  store.zero_grads();
  g.backward(loss);
  opt.step(store);
}

double fused_val_accuracy(Store& store, bool attention, const RunConfig& cfg,
                          const std::vector<PairedSample>& val) {
  long correct = 0;
  for (const auto& s : val) {
    const VectorF p = fused_probabilities(store, cfg, *s.he, *s.ihc, attention);
    correct += predicted_grade(p) == s.grade;
  }
  return val.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(val.size());
}

double baseline_val_accuracy(Store& store, bool concat_inputs, Modality which,
                             const std::vector<PairedSample>& val) {
  long correct = 0;
  for (const auto& s : val) {
    const VectorF p = concat_inputs
                          ? concat_probabilities(store, *s.he, *s.ihc)
                          : baseline_probabilities(store, "base",
                                                   which == Modality::HE ? *s.he : *s.ihc);
    correct += predicted_grade(p) == s.grade;
  }
  return val.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(val.size());
}

void train_classifier_stage(const RunConfig& cfg, const std::string& run_dir,
                            const SplitResult& split) {
  const auto gan_ckpt = nn::load_checkpoint(ckpt_path(run_dir, "cmgan"));
  require(gan_ckpt.stage == "cmgan", Errc::corrupt_checkpoint,
          "expected a cmgan checkpoint for the classifier stage");
  Rng shape_rng = make_rng(0);
  Store gen_he2ihc, gen_ihc2he;
  init_generator(gen_he2ihc, gen_cfg(cfg), shape_rng);
  init_generator(gen_ihc2he, gen_cfg(cfg), shape_rng);
  nn::load_store(gan_ckpt, "gen_he2ihc", gen_he2ihc);
  nn::load_store(gan_ckpt, "gen_ihc2he", gen_ihc2he);

  Store model, noatt, base_he, base_ihc, base_concat;
  {
    Rng r = make_rng(derive_seed(cfg.seed, kSeedModel));
    init_full_model(model, cfg, true, r);
  }
  {
    Rng r = make_rng(derive_seed(cfg.seed, kSeedNoAtt));
    init_full_model(noatt, cfg, false, r);
  }
  {
    Rng r = make_rng(derive_seed(cfg.seed, kSeedBaseHe));
    nn::init_small_cnn(base_he, "base", 3, cfg.baseline_base, kNumGrades, r);
  }
  {
    Rng r = make_rng(derive_seed(cfg.seed, kSeedBaseIhc));
    nn::init_small_cnn(base_ihc, "base", 3, cfg.baseline_base, kNumGrades, r);
  }
  {
    Rng r = make_rng(derive_seed(cfg.seed, kSeedBaseConcat));
    nn::init_small_cnn(base_concat, "base", 6, cfg.baseline_base, kNumGrades, r);
  }

  const VectorF weights = class_weight_vector(cfg, split.train);
  const long steps_per_epoch =
      (static_cast<long>(split.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  auto make_opt = [&] {
    nn::AdamW<float> opt;
    opt.lr0 = cfg.lr;
    opt.poly_power = cfg.poly_power;
    opt.weight_decay = cfg.weight_decay;
    opt.total_steps = steps_per_epoch * cfg.epochs_classifier;
    return opt;
  };
  auto model_opt = make_opt(), noatt_opt = make_opt(), he_opt = make_opt(), ihc_opt = make_opt(),
       concat_opt = make_opt();

  HistoryWriter history(
      run_dir + "/classifier_history.csv",
      "epoch,loss_cls,loss_dom,loss_mmd,loss_enc,val_full,val_noatt,val_he,val_ihc,val_concat");

  struct Best {
    double acc = -1.0;
    Store params;
  };
  Best best_model, best_noatt, best_he, best_ihc, best_concat;

  for (int epoch = 0; epoch < cfg.epochs_classifier; ++epoch) {
    const auto order =
        shuffled_indices(split.train.size(), derive_seed(cfg.seed, kSeedEpoch, epoch));
    Rng aug_rng = make_rng(derive_seed(cfg.seed, kSeedAugment, epoch));
    Rng arm_rng = make_rng(derive_seed(cfg.seed, kSeedDropout, epoch));

    double cls_sum = 0, dom_sum = 0, mmd_sum = 0;
    long batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto batch = present_batch(cfg, split, order, start, end, gen_he2ihc, gen_ihc2he,
                                       aug_rng, arm_rng);
      FullBatchLosses losses;
      // Independent parameter stores train concurrently.
      parallel_invoke(
          [&] {
            losses = full_model_batch_step(model, true, cfg, batch, weights, model_opt);
            baseline_batch_step(base_he, "base", false, Modality::HE, batch, weights, he_opt);
            baseline_batch_step(base_concat, "base", true, Modality::HE, batch, weights,
                                concat_opt);
          },
          [&] {
            full_model_batch_step(noatt, false, cfg, batch, weights, noatt_opt);
            baseline_batch_step(base_ihc, "base", false, Modality::IHC, batch, weights, ihc_opt);
          });
      cls_sum += losses.cls;
      dom_sum += losses.dom;
      mmd_sum += losses.mmd;
      ++batches;
    }

    double val_full = 0, val_noatt = 0, val_he = 0, val_ihc = 0, val_concat = 0;
    parallel_invoke(
        [&] {
          val_full = fused_val_accuracy(model, true, cfg, split.val);
          val_he = baseline_val_accuracy(base_he, false, Modality::HE, split.val);
          val_concat = baseline_val_accuracy(base_concat, true, Modality::HE, split.val);
        },
        [&] {
          val_noatt = fused_val_accuracy(noatt, false, cfg, split.val);
          val_ihc = baseline_val_accuracy(base_ihc, false, Modality::IHC, split.val);
        });

    const double enc = cfg.lambda1 * (dom_sum / batches) + cfg.lambda2 * (mmd_sum / batches);
    history.row(epoch, {cls_sum / batches, dom_sum / batches, mmd_sum / batches, enc, val_full,
                        val_noatt, val_he, val_ihc, val_concat});

    auto keep = [](Best& best, double acc, const Store& store) {
      if (acc > best.acc) {
        best.acc = acc;
        best.params = store;
      }
    };
    keep(best_model, val_full, model);
    keep(best_noatt, val_noatt, noatt);
    keep(best_he, val_he, base_he);
    keep(best_ihc, val_ihc, base_ihc);
    keep(best_concat, val_concat, base_concat);
  }

  nn::Checkpoint ckpt;
  ckpt.stage = "classifier";
  ckpt.config_text = config_to_text(cfg);
  nn::add_store(ckpt, "model", best_model.params);
  nn::add_store(ckpt, "noatt", best_noatt.params);
  nn::add_store(ckpt, "base_he", best_he.params);
  nn::add_store(ckpt, "base_ihc", best_ihc.params);
  nn::add_store(ckpt, "base_concat", best_concat.params);
  // Frozen generator copies travel with the classifier so the eval arms that
  // reconstruct a modality need only this file.
  nn::add_store(ckpt, "gen_he2ihc", gen_he2ihc);
  nn::add_store(ckpt, "gen_ihc2he", gen_ihc2he);
  nn::save_checkpoint(ckpt_path(run_dir, "classifier"), ckpt);
}

// --- joint stage -------------------------------------------------------------

void train_joint_stage(const RunConfig& cfg, const std::string& run_dir,
                       const SplitResult& split) {
  const auto cls_ckpt = nn::load_checkpoint(ckpt_path(run_dir, "classifier"));
  const auto gan_ckpt = nn::load_checkpoint(ckpt_path(run_dir, "cmgan"));
  require(cls_ckpt.stage == "classifier" && gan_ckpt.stage == "cmgan", Errc::corrupt_checkpoint,
          "joint stage needs classifier and cmgan checkpoints");

  Rng shape_rng = make_rng(0);
  Store model;
  init_full_model(model, cfg, true, shape_rng);
  nn::load_store(cls_ckpt, "model", model);
  Store gen_he2ihc, gen_ihc2he, disc_he2ihc, disc_ihc2he;
  init_generator(gen_he2ihc, gen_cfg(cfg), shape_rng);
  init_generator(gen_ihc2he, gen_cfg(cfg), shape_rng);
  init_discriminator(disc_he2ihc, disc_cfg(cfg), shape_rng);
  init_discriminator(disc_ihc2he, disc_cfg(cfg), shape_rng);
  nn::load_store(gan_ckpt, "gen_he2ihc", gen_he2ihc);
  nn::load_store(gan_ckpt, "gen_ihc2he", gen_ihc2he);
  nn::load_store(gan_ckpt, "disc_he2ihc", disc_he2ihc);
  nn::load_store(gan_ckpt, "disc_ihc2he", disc_ihc2he);

  const VectorF weights = class_weight_vector(cfg, split.train);
  const VectorF uniform2 = VectorF::Ones(2);
  const GeneratorConfig gcfg = gen_cfg(cfg);
  const long steps_per_epoch =
      (static_cast<long>(split.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  auto make_opt = [&](float lr) {
    nn::AdamW<float> opt;
    opt.lr0 = lr;
    opt.poly_power = cfg.poly_power;
    opt.total_steps = steps_per_epoch * cfg.epochs_joint;
    return opt;
  };
  auto model_opt = make_opt(cfg.lr);
  model_opt.weight_decay = cfg.weight_decay;
  auto gh_opt = make_opt(cfg.lr), gi_opt = make_opt(cfg.lr);
  auto dh_opt = make_opt(cfg.lr), di_opt = make_opt(cfg.lr);

  HistoryWriter history(run_dir + "/joint_history.csv",
                        "epoch,loss_cls,loss_enc,loss_recon,loss_total,val_acc");
  double best_val = -1.0;
  Store best_model = model, best_gh = gen_he2ihc, best_gi = gen_ihc2he;
  const AugmentConfig aug = augment_cfg(cfg);

  for (int epoch = 0; epoch < cfg.epochs_joint; ++epoch) {
    const auto order = shuffled_indices(split.train.size(),
                                        derive_seed(cfg.seed, kSeedEpoch + 0x300, epoch));
    Rng aug_rng = make_rng(derive_seed(cfg.seed, kSeedAugment + 0x300, epoch));
    Rng arm_rng = make_rng(derive_seed(cfg.seed, kSeedDropout + 0x300, epoch));

    double cls_sum = 0, enc_sum = 0, recon_sum = 0;
    long batches = 0;
    long dual_direction_toggle = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);

      // Augment and assign arms; every sample carries one reconstruction
      // direction (its missing side, or an alternating one when dual).
      struct JointSample {
        PairedSample data;
        SampleArm arm;
        ReconDirection dir;
      };
      std::vector<JointSample> batch;
      for (size_t i = start; i < end; ++i) {
        JointSample js;
        js.data = augment(split.train[order[i]], aug, aug_rng);
        const float roll = uniform<float>(arm_rng, 0.0f, 1.0f);
        if (roll < 1.0f - cfg.modality_dropout) {
          js.arm = SampleArm::dual;
          js.dir = (dual_direction_toggle++ % 2 == 0) ? ReconDirection::HEtoIHC
                                                      : ReconDirection::IHCtoHE;
        } else if (roll < 1.0f - cfg.modality_dropout / 2.0f) {
          js.arm = SampleArm::he_single;
          js.dir = ReconDirection::HEtoIHC;
        } else {
          js.arm = SampleArm::ihc_single;
          js.dir = ReconDirection::IHCtoHE;
        }
        batch.push_back(std::move(js));
      }

      // Discriminator updates per direction on this batch.
      std::vector<std::pair<ImageF, ImageF>> he2ihc_pairs, ihc2he_pairs;
      for (const auto& js : batch) {
        if (js.dir == ReconDirection::HEtoIHC)
          he2ihc_pairs.emplace_back(*js.data.he, *js.data.ihc);
        else
          ihc2he_pairs.emplace_back(*js.data.ihc, *js.data.he);
      }
      if (!he2ihc_pairs.empty())
        gan_disc_step(gen_he2ihc, disc_he2ihc, he2ihc_pairs, gcfg, dh_opt);
      if (!ihc2he_pairs.empty())
        gan_disc_step(gen_ihc2he, disc_ihc2he, ihc2he_pairs, gcfg, di_opt);

      // Joint objective: classification + encoder losses through in-graph
      // reconstructions, plus the generator-side adversarial and pyramid L1.
      nn::Graph<float> g;
      std::vector<int> cls_terms, dom_terms, adv_terms, l1_terms;
      std::vector<int> shared_he, shared_ihc;
      for (const auto& js : batch) {
        const int he_real = g.input(*js.data.he);
        const int ihc_real = g.input(*js.data.ihc);
        const bool to_ihc = js.dir == ReconDirection::HEtoIHC;
        Store& gen = to_ihc ? gen_he2ihc : gen_ihc2he;
        Store& disc = to_ihc ? disc_he2ihc : disc_ihc2he;
        const int src = to_ihc ? he_real : ihc_real;
        const int tgt = to_ihc ? ihc_real : he_real;
        const int fake = generator_nodes(g, gen, src, gcfg);
        adv_terms.push_back(
            nn::bce_mean(g, discriminator_scores(g, disc, src, fake, false), 1.0f));
        l1_terms.push_back(pyramid_l1_nodes<float>(g, fake, tgt, cfg.pyramid_levels));

        const int he_in = js.arm == SampleArm::ihc_single ? fake : he_real;
        const int ihc_in = js.arm == SampleArm::he_single ? fake : ihc_real;
        const auto nodes = full_model_nodes(g, model, he_in, ihc_in, true);
        cls_terms.push_back(nn::softmax_ce(g, nodes.logits, grade_index(js.data.grade), weights));
        dom_terms.push_back(nn::softmax_ce(g, domain_logits(g, model, nodes.f_he), 0, uniform2));
        dom_terms.push_back(nn::softmax_ce(g, domain_logits(g, model, nodes.f_ihc), 1, uniform2));
        shared_he.push_back(nodes.gap_shared_he);
        shared_ihc.push_back(nodes.gap_shared_ihc);
      }
      const int cls = nn::mean_scalars(g, cls_terms);
      const int dom = nn::mean_scalars(g, dom_terms);
      std::vector<VectorF> he_vecs, ihc_vecs;
      for (int id : shared_he) he_vecs.push_back(g.value(id).col(0));
      for (int id : shared_ihc) ihc_vecs.push_back(g.value(id).col(0));
      const int mmd =
          nn::mmd_gaussian(g, shared_he, shared_ihc, median_heuristic_sigma(he_vecs, ihc_vecs));
      const int enc = nn::weighted_sum(g, {dom, mmd}, {cfg.lambda1, cfg.lambda2});
      const int adv = nn::mean_scalars(g, adv_terms);
      const int l1 = nn::mean_scalars(g, l1_terms);
      const int recon = nn::weighted_sum(g, {adv, l1}, {cfg.lambda3, cfg.lambda4});
      const int total = nn::weighted_sum(g, {cls, enc, recon}, {1.0f, 1.0f, 1.0f});

      cls_sum += g.scalar_value(cls);
      enc_sum += g.scalar_value(enc);
      recon_sum += g.scalar_value(recon);
      ++batches;
      require(std::isfinite(g.scalar_value(total)), Errc::non_finite_loss,
              "joint loss diverged");
      model.zero_grads();
      gen_he2ihc.zero_grads();
      gen_ihc2he.zero_grads();
      g.backward(total);
      model_opt.step(model);
      gh_opt.step(gen_he2ihc);
      gi_opt.step(gen_ihc2he);
    }

    const double val_acc = fused_val_accuracy(model, true, cfg, split.val);
    const double cls_mean = cls_sum / batches;
    const double enc_mean = enc_sum / batches;
    const double recon_mean = recon_sum / batches;
    history.row(epoch, {cls_mean, enc_mean, recon_mean, cls_mean + enc_mean + recon_mean,
                        val_acc});
    if (val_acc > best_val) {
      best_val = val_acc;
      best_model = model;
      best_gh = gen_he2ihc;
      best_gi = gen_ihc2he;
    }
  }

  nn::Checkpoint ckpt;
  ckpt.stage = "joint";
  ckpt.config_text = config_to_text(cfg);
  nn::add_store(ckpt, "model", best_model);
  nn::add_store(ckpt, "gen_he2ihc", best_gh);
  nn::add_store(ckpt, "gen_ihc2he", best_gi);
  nn::add_store(ckpt, "disc_he2ihc", disc_he2ihc);
  nn::add_store(ckpt, "disc_ihc2he", disc_ihc2he);
  nn::save_checkpoint(ckpt_path(run_dir, "joint"), ckpt);
}

}  // namespace
}  // namespace detail

void cmd_train(const RunConfig& cfg, const std::string& run_dir, Stage stage) {
  validate_config(cfg);
  require(cfg.c_he == cfg.c_ihc, Errc::bad_config,
          "the shared domain head requires c_he == c_ihc");
  detail::ensure_dir(run_dir);
  detail::persist_config(cfg, run_dir);

  const auto corpus = detail::load_corpus(cfg);
  const SplitResult split = split_dataset(corpus, cfg.seed);

  switch (stage) {
    case Stage::selector: detail::train_selector_stage(cfg, run_dir, split); break;
    case Stage::cmgan: detail::train_cmgan_stage(cfg, run_dir, split); break;
    case Stage::classifier: detail::train_classifier_stage(cfg, run_dir, split); break;
    case Stage::joint: detail::train_joint_stage(cfg, run_dir, split); break;
  }
}

}  // namespace her2flex::pipeline
