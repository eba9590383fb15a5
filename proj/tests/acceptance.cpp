// Acceptance suite. Each criterion prints one PASS/FAIL line. The heavyweight
// training happens once in the `setup` case (a ctest fixture); criteria 3-6
// read its outputs. Criteria 1, 2, 7 and 8 are self-contained.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "her2flex/cli.hpp"
#include "her2flex/cmgan.hpp"
#include "her2flex/dataset.hpp"
#include "her2flex/encoder.hpp"
#include "her2flex/fusion.hpp"
#include "her2flex/metrics.hpp"
#include "her2flex/nn/checkpoint.hpp"
#include "her2flex/pipeline.hpp"
#include "her2flex/synth.hpp"

#include "fd_check.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace her2flex;

namespace {

// --- shared acceptance run -----------------------------------------------------

std::string accept_root() {
  const char* env = std::getenv("HER2FLEX_ACCEPT_DIR");
  return env != nullptr ? env : "acceptance_workdir";
}

RunConfig accept_config() {
  RunConfig cfg;
  cfg.seed = 42;
  cfg.synth_per_grade = 500;  // 2000 pairs at 64x64
  cfg.synth_size = 64;
  cfg.data_root = accept_root() + "/corpus";
  return cfg;
}

std::string run_dir() { return accept_root() + "/run"; }

bool stage_done(const std::string& name) {
  return std::filesystem::exists(run_dir() + "/" + name + ".ckpt");
}

void report(int criterion, const std::string& what, bool pass) {
  std::printf("[acceptance] criterion %d (%s): %s\n", criterion, what.c_str(),
              pass ? "PASS" : "FAIL");
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", criterion, ": ", what);
}

double arm_accuracy(pipeline::Arm arm, const RunConfig& cfg,
                    pipeline::EvalStage stage = pipeline::EvalStage::automatic) {
  return pipeline::cmd_eval(cfg, run_dir(), arm, stage).accuracy;
}

}  // namespace

TEST_CASE("setup") {
  const RunConfig cfg = accept_config();
  std::filesystem::create_directories(accept_root());
  if (!std::filesystem::exists(cfg.data_root + "/manifest.json"))
    pipeline::cmd_synth(cfg, cfg.data_root, true);
  if (!stage_done("selector")) pipeline::cmd_train(cfg, run_dir(), pipeline::Stage::selector);
  if (!stage_done("cmgan")) pipeline::cmd_train(cfg, run_dir(), pipeline::Stage::cmgan);
  if (!stage_done("classifier"))
    pipeline::cmd_train(cfg, run_dir(), pipeline::Stage::classifier);
  if (!stage_done("joint")) pipeline::cmd_train(cfg, run_dir(), pipeline::Stage::joint);
  CHECK(stage_done("joint"));
}

// --- criterion 1: equation oracle suite ----------------------------------------

TEST_CASE("criterion1") {
  Rng rng = make_rng(1001);
  bool ok = true;
  double worst = 0;
  auto check = [&](double a, double b) {
    worst = std::max(worst, std::abs(a - b));
    ok = ok && std::abs(a - b) <= 1e-6;
  };

  for (int trial = 0; trial < 50; ++trial) {
    // Eq. 1: channel attention.
    const int c = 4 + 2 * (trial % 3), hidden = 2;
    AttentionMlp<double> mlp;
    mlp.w0 = Matrix<double>::NullaryExpr(hidden, c, [&](Eigen::Index) { return normal(rng, 0.0, 1.0); });
    mlp.w1 = Matrix<double>::NullaryExpr(c, hidden, [&](Eigen::Index) { return normal(rng, 0.0, 1.0); });
    const auto f = FeatureMap<double>::random_uniform(c, 5, 7, rng, -1.0, 1.0);
    std::vector<std::vector<double>> w0(hidden, std::vector<double>(c)), w1(c, std::vector<double>(hidden));
    for (int i = 0; i < hidden; ++i)
      for (int j = 0; j < c; ++j) w0[i][j] = mlp.w0(i, j);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < hidden; ++j) w1[i][j] = mlp.w1(i, j);
    const auto lib_att = channel_attention(mlp, f);
    const auto ref_att = oracle::attention_loops(w0, w1, f);
    for (int i = 0; i < c; ++i) check(lib_att(i), ref_att[i]);

    // Eq. 2: weighted cross-entropy.
    Vector<double> probs = Vector<double>::NullaryExpr(4, [&](Eigen::Index) { return uniform(rng, 0.05, 1.0); });
    probs /= probs.sum();
    Vector<double> cw = Vector<double>::NullaryExpr(4, [&](Eigen::Index) { return uniform(rng, 0.5, 2.0); });
    const int label = uniform_int(rng, 0, 3);
    check(weighted_cross_entropy(probs, kAllGrades[label], cw),
          oracle::weighted_ce_loops({probs(0), probs(1), probs(2), probs(3)}, label,
                                    {cw(0), cw(1), cw(2), cw(3)}));

    // Eq. 3 and Eq. 6 arithmetic.
    const double ld = uniform(rng, 0.0, 2.0), la = uniform(rng, 0.0, 2.0);
    const double l1c = uniform(rng, 0.0, 2.0), l2c = uniform(rng, 0.0, 2.0);
    check(encoder_loss(ld, la, l1c, l2c), l1c * ld + l2c * la);
    const double a = uniform(rng, -1.0, 3.0), b = uniform(rng, -1.0, 3.0), cc = uniform(rng, -1.0, 3.0);
    check(total_loss(a, b, cc), a + b + cc);

    // Eq. 4 + 5: reconstruction with pyramid L1, plus the adversarial BCE.
    const auto ia = FeatureMap<double>::random_uniform(3, 12, 12, rng);
    const auto ib = FeatureMap<double>::random_uniform(3, 12, 12, rng);
    check(pyramid_l1_loss(ia, ib, 3), oracle::pyramid_l1_loops(ia, ib, 3));
    Matrix<double> scores = Matrix<double>::NullaryExpr(3, 3, [&](Eigen::Index) { return uniform(rng, 0.01, 0.99); });
    std::vector<double> score_vec(scores.data(), scores.data() + scores.size());
    check(adversarial_loss(scores, AdvRole::GeneratorStep), oracle::bce_loops(score_vec, 1.0));
    check(adversarial_loss(scores, AdvRole::DiscFake), oracle::bce_loops(score_vec, 0.0));
    const double gan_term = uniform(rng, 0.0, 2.0), l1_term = uniform(rng, 0.0, 2.0);
    const double l3 = uniform(rng, 0.0, 2.0), l4 = uniform(rng, 0.0, 120.0);
    check(reconstruction_loss(gan_term, l1_term, l3, l4), l3 * gan_term + l4 * l1_term);

    // MMD.
    std::vector<Vector<double>> xs, ys;
    std::vector<std::vector<double>> xs_raw, ys_raw;
    for (int i = 0; i < 4; ++i) {
      Vector<double> v = Vector<double>::NullaryExpr(3, [&](Eigen::Index) { return normal(rng, 0.0, 1.0); });
      xs.push_back(v);
      xs_raw.push_back({v(0), v(1), v(2)});
    }
    for (int i = 0; i < 5; ++i) {
      Vector<double> v = Vector<double>::NullaryExpr(3, [&](Eigen::Index) { return normal(rng, 0.4, 1.0); });
      ys.push_back(v);
      ys_raw.push_back({v(0), v(1), v(2)});
    }
    const double sigma = uniform(rng, 0.5, 2.0);
    check(mmd_distance(xs, ys, sigma), oracle::mmd_loops(xs_raw, ys_raw, sigma));

    // PSNR / SSIM.
    const auto pa = FeatureMap<double>::random_uniform(3, 13, 16, rng);
    const auto pb = FeatureMap<double>::random_uniform(3, 13, 16, rng);
    check(psnr(pa, pb), oracle::psnr_loops(pa, pb));
    check(ssim(pa, pb), oracle::ssim_loops(pa, pb));
  }
  CAPTURE(worst);
  report(1, "equation oracle suite within 1e-6", ok);
}

// --- criterion 2: Eq. 6 composite gradient check --------------------------------

TEST_CASE("criterion2") {
  nn::ParamStore<double> store;
  Rng rng = make_rng(2002);

  RunConfig tiny;
  tiny.c_s = 4;
  tiny.c_he = tiny.c_ihc = 4;
  tiny.c_reduced = 4;
  tiny.reduction_ratio = 2;
  EncoderConfig ecfg;
  ecfg.shared_channels = 4;
  ecfg.specific_channels = 4;
  FusionConfig fcfg;
  fcfg.reduced_channels = 4;
  fcfg.reduction_ratio = 2;
  GeneratorConfig gcfg;
  gcfg.base_channels = 4;
  DiscriminatorConfig dcfg;
  dcfg.base_channels = 4;

  init_shared_encoder(store, ecfg, rng);
  init_specific_encoder(store, "spec_he", ecfg, rng);
  init_specific_encoder(store, "spec_ihc", ecfg, rng);
  init_domain_head(store, 4, rng);
  init_fusion(store, 4, 4, 4, fcfg, rng, true);
  init_generator(store, gcfg, rng);
  init_discriminator(store, dcfg, rng);
  const long n_params = store.param_count();

  std::vector<std::pair<FeatureMap<double>, FeatureMap<double>>> pairs;
  Rng irng = make_rng(2003);
  for (int i = 0; i < 2; ++i)
    pairs.emplace_back(FeatureMap<double>::random_uniform(3, 16, 16, irng, 0.1, 0.9),
                       FeatureMap<double>::random_uniform(3, 16, 16, irng, 0.1, 0.9));
  Vector<double> weights(4);
  weights << 1.2, 0.8, 1.0, 1.1;
  const Vector<double> uniform2 = Vector<double>::Ones(2);
  const double lambda1 = 1.0, lambda2 = 0.1, lambda3 = 1.0, lambda4 = 100.0;

  // Full Eq. 6 composite: classification + encoder + reconstruction.
  const auto build = [&](nn::Graph<double>& g) {
    std::vector<int> cls_terms, dom_terms, adv_terms, l1_terms;
    std::vector<int> sh_he, sh_ihc;
    int label = 0;
    for (const auto& [he, ihc] : pairs) {
      const int he_id = g.input(he);
      const int ihc_id = g.input(ihc);
      const int fake = generator_nodes(g, store, he_id, gcfg);
      adv_terms.push_back(
          nn::bce_mean(g, discriminator_scores(g, store, he_id, fake, true), 1.0));
      l1_terms.push_back(pyramid_l1_nodes<double>(g, fake, ihc_id, 3));

      const int s_he = shared_encoder_nodes(g, store, he_id);
      const int s_ihc = shared_encoder_nodes(g, store, ihc_id);
      const int f_s = nn::scale(g, nn::add(g, s_he, s_ihc), 0.5);
      const int f_he = specific_encoder_nodes(g, store, "spec_he", he_id);
      const int f_ihc = specific_encoder_nodes(g, store, "spec_ihc", fake);
      const int logits = fusion_logits(g, store, f_s, f_he, f_ihc, true);
      cls_terms.push_back(nn::softmax_ce(g, logits, label++ % 4, weights));
      dom_terms.push_back(nn::softmax_ce(g, domain_logits(g, store, f_he), 0, uniform2));
      dom_terms.push_back(nn::softmax_ce(g, domain_logits(g, store, f_ihc), 1, uniform2));
      sh_he.push_back(nn::gap(g, s_he));
      sh_ihc.push_back(nn::gap(g, s_ihc));
    }
    const int cls = nn::mean_scalars(g, cls_terms);
    const int dom = nn::mean_scalars(g, dom_terms);
    const int mmd = nn::mmd_gaussian(g, sh_he, sh_ihc, 0.7);
    const int adv = nn::mean_scalars(g, adv_terms);
    const int l1 = nn::mean_scalars(g, l1_terms);
    return nn::weighted_sum(g, {cls, dom, mmd, adv, l1},
                            {1.0, lambda1, lambda2, lambda3, lambda4});
  };

  const auto fd = her2flex::testing::check_gradients(store, build, 1e-6);
  std::printf("[acceptance]   criterion 2 detail: %ld parameters, max rel err %.3e at %s\n",
              n_params, fd.max_rel_err, fd.worst.c_str());
  report(2, "Eq. 6 composite gradients vs central differences (rel < 1e-3)",
         n_params <= 20000 && fd.max_rel_err < 1e-3);
}

// --- criterion 3: selector fidelity ---------------------------------------------

TEST_CASE("criterion3") {
  const RunConfig cfg = accept_config();
  const auto ckpt = nn::load_checkpoint(run_dir() + "/selector.ckpt");
  nn::ParamStore<float> selector;
  Rng shape_rng = make_rng(0);
  init_selector(selector, SelectorConfig{cfg.selector_base}, shape_rng);
  nn::load_store(ckpt, "selector", selector);

  const auto corpus = load_dataset(cfg.data_root + "/HE", cfg.data_root + "/IHC", true);
  const auto split = split_dataset(corpus, cfg.seed);
  long correct = 0, total = 0;
  for (const auto& s : split.val) {
    correct += classify_modality(selector, *s.he).first == Modality::HE;
    correct += classify_modality(selector, *s.ihc).first == Modality::IHC;
    total += 2;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(total);
  std::printf("[acceptance]   criterion 3 detail: %.4f on %ld held-out patches (%d epochs)\n",
              acc, total, cfg.epochs_selector);
  report(3, "selector accuracy >= 99% on >= 400 held-out patches", total >= 400 && acc >= 0.99);
}

// --- criterion 4: comparative ordering ------------------------------------------

TEST_CASE("criterion4") {
  const RunConfig cfg = accept_config();
  const double full = arm_accuracy(pipeline::Arm::dual_full, cfg);
  const double he_fake = arm_accuracy(pipeline::Arm::he_plus_fake_ihc, cfg);
  const double he_only = arm_accuracy(pipeline::Arm::he_only_baseline, cfg);
  const double concat = arm_accuracy(pipeline::Arm::dual_concat_baseline, cfg);
  std::printf(
      "[acceptance]   criterion 4 detail: dual_full %.4f  he_plus_fake_ihc %.4f  "
      "he_only %.4f  dual_concat %.4f\n",
      full, he_fake, he_only, concat);
  report(4, "dual_full >= he_plus_fake_ihc >= he_only + 5pp and dual_full >= dual_concat",
         full >= he_fake && he_fake >= he_only + 0.05 && full >= concat);
}

// --- criterion 5: attention ablation under corruption ----------------------------

TEST_CASE("criterion5") {
  RunConfig cfg = accept_config();
  cfg.corrupt = "ihc";  // brightness -0.3, Gaussian noise sigma 0.1
  // Both variants read the classifier-stage checkpoint: identical budgets.
  const double with_attention =
      arm_accuracy(pipeline::Arm::dual_full, cfg, pipeline::EvalStage::classifier);
  const double without_attention =
      arm_accuracy(pipeline::Arm::dual_no_attention, cfg, pipeline::EvalStage::classifier);
  std::printf("[acceptance]   criterion 5 detail: with attention %.4f  without %.4f\n",
              with_attention, without_attention);
  report(5, "corrupted-input accuracy: attention >= no-attention",
         with_attention >= without_attention);
}

// --- criterion 6: reconstruction usefulness --------------------------------------

TEST_CASE("criterion6") {
  const RunConfig cfg = accept_config();
  const auto ckpt = nn::load_checkpoint(run_dir() + "/cmgan.ckpt");
  nn::ParamStore<float> gen;
  Rng shape_rng = make_rng(0);
  GeneratorConfig gcfg;
  gcfg.base_channels = cfg.gen_base;
  init_generator(gen, gcfg, shape_rng);
  nn::load_store(ckpt, "gen_he2ihc", gen);

  const auto corpus = load_dataset(cfg.data_root + "/HE", cfg.data_root + "/IHC", true);
  const auto split = split_dataset(corpus, cfg.seed);

  // Per-pixel mean-image baseline fit on the training split.
  ImageF mean_ihc(3, cfg.synth_size, cfg.synth_size);
  for (const auto& s : split.train) mean_ihc.data += s.ihc->data;
  mean_ihc.data /= static_cast<float>(split.train.size());

  double gen_psnr = 0, mean_psnr = 0;
  for (const auto& s : split.val) {
    gen_psnr += psnr(generator_forward(gen, *s.he, gcfg), *s.ihc);
    mean_psnr += psnr(mean_ihc, *s.ihc);
  }
  gen_psnr /= static_cast<double>(split.val.size());
  mean_psnr /= static_cast<double>(split.val.size());

  // Optimization-health oracle: a fresh tiny model overfits 4 pairs.
  std::vector<std::pair<ImageF, ImageF>> batch;
  for (int i = 0; i < 4; ++i) {
    const auto s = synth_sample(kAllGrades[i], i, 32, 7);
    batch.emplace_back(*s.he, *s.ihc);
  }
  GeneratorConfig tiny;
  tiny.base_channels = 4;
  nn::ParamStore<float> og, od;
  Rng orng = make_rng(606);
  init_generator(og, tiny, orng);
  init_discriminator(od, DiscriminatorConfig{4}, orng);
  nn::AdamW<float> go, dopt;
  go.lr0 = dopt.lr0 = 2e-3f;
  float first_l1 = -1, last_l1 = -1;
  for (int step = 0; step < 500; ++step) {
    const auto r = gan_train_step(og, od, batch, cfg.lambda3, cfg.lambda4, cfg.pyramid_levels,
                                  tiny, go, dopt);
    if (step == 0) first_l1 = r.l1;
    last_l1 = r.l1;
  }

  std::printf(
      "[acceptance]   criterion 6 detail: generator %.2f dB vs mean-image %.2f dB; "
      "overfit L1 %.4f -> %.4f\n",
      gen_psnr, mean_psnr, first_l1, last_l1);
  report(6, "HE->IHC PSNR beats the mean-image baseline by >= 2 dB and 4-pair overfit < 10%",
         gen_psnr >= mean_psnr + 2.0 && last_l1 < 0.1f * first_l1);
}

// --- criterion 7: determinism and persistence ------------------------------------

TEST_CASE("criterion7") {
  namespace fs = std::filesystem;
  const std::string root = accept_root() + "/determinism";
  fs::remove_all(root);
  fs::create_directories(root);

  auto cli = [&](const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"her2flex"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
  };
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  const std::string cfg_path = root + "/cfg.ini";
  std::ofstream(cfg_path) << "[synth]\nn_per_grade = 8\nsize = 64\n"
                          << "[train]\nseed = 3\nepochs_selector = 1\nepochs_cmgan = 1\n"
                          << "epochs_classifier = 1\nbatch_size = 8\n"
                          << "[model]\ngen_base = 4\ndisc_base = 4\nc_s = 8\nc_he = 4\nc_ihc = 4\n"
                          << "c_reduced = 8\nreduction_ratio = 4\n";

  bool ok = cli({"synth", "--config", cfg_path, "--out", root + "/c1"}) == 0 &&
            cli({"synth", "--config", cfg_path, "--out", root + "/c2"}) == 0;
  for (const std::string run : {"r1", "r2"}) {
    ok = ok &&
         cli({"train", "--config", cfg_path, "--data", root + "/c1", "--out", root + "/" + run,
              "--stage", "selector"}) == 0 &&
         cli({"train", "--config", cfg_path, "--data", root + "/c1", "--out", root + "/" + run,
              "--stage", "cmgan"}) == 0 &&
         cli({"train", "--config", cfg_path, "--data", root + "/c1", "--out", root + "/" + run,
              "--stage", "classifier"}) == 0 &&
         cli({"eval", "--config", cfg_path, "--data", root + "/c1", "--out", root + "/" + run,
              "--arm", "dual_full"}) == 0;
  }
  for (const std::string f :
       {"/selector_history.csv", "/cmgan_he2ihc_history.csv", "/cmgan_ihc2he_history.csv",
        "/classifier_history.csv", "/selector.ckpt", "/cmgan.ckpt", "/classifier.ckpt",
        "/eval_dual_full/metrics.json", "/eval_dual_full/predictions.csv"}) {
    ok = ok && slurp(root + "/r1" + f) == slurp(root + "/r2" + f);
  }
  // Synthesis determinism across directories.
  ok = ok && slurp(root + "/c1/HE/00000_synth_0.png") == slurp(root + "/c2/HE/00000_synth_0.png");

  // Checkpoint roundtrip is bitwise.
  const auto ckpt = nn::load_checkpoint(root + "/r1/classifier.ckpt");
  nn::Checkpoint copy = ckpt;
  nn::save_checkpoint(root + "/copy.ckpt", copy);
  ok = ok && slurp(root + "/r1/classifier.ckpt") == slurp(root + "/copy.ckpt");

  report(7, "byte-identical reruns and bitwise checkpoint roundtrip", ok);
}

// --- criterion 8: module property suites ------------------------------------------

TEST_CASE("criterion8") {
  bool ok = true;
  Rng rng = make_rng(808);

  // Partition laws on a shuffled corpus.
  {
    std::vector<PairedSample> samples;
    for (int i = 0; i < 57; ++i) {
      PairedSample s;
      s.id = "p" + std::to_string(1000 + i);
      s.grade = kAllGrades[i % 4];
      s.he = ImageF::constant(3, 8, 8, 0.5f);
      samples.push_back(std::move(s));
    }
    const auto split = split_dataset(samples, 17);
    ok = ok && split.train.size() + split.val.size() + split.test.size() == samples.size();
    ok = ok && split.val.size() == 5 && split.test.size() == 5;
    std::set<std::string> seen;
    for (const auto& part : {split.train, split.val, split.test})
      for (const auto& s : part) ok = ok && seen.insert(s.id).second;
    ok = ok && seen.size() == samples.size();
  }

  // MMD nonnegativity and symmetry on random batches.
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Vector<double>> xs, ys;
    for (int i = 0; i < 4; ++i) {
      xs.push_back(Vector<double>::NullaryExpr(3, [&](Eigen::Index) { return normal(rng, 0.0, 1.0); }));
      ys.push_back(Vector<double>::NullaryExpr(3, [&](Eigen::Index) { return normal(rng, 1.0, 2.0); }));
    }
    const double d = mmd_distance(xs, ys, 1.1);
    ok = ok && d >= 0.0 && std::abs(d - mmd_distance(ys, xs, 1.1)) < 1e-12;
    ok = ok && mmd_distance(xs, xs, 1.1) < 1e-9;
  }

  // Attention weights strictly inside (0, 1); softmax normalization.
  for (int trial = 0; trial < 25; ++trial) {
    AttentionMlp<double> mlp;
    mlp.w0 = Matrix<double>::NullaryExpr(2, 4, [&](Eigen::Index) { return normal(rng, 0.0, 2.0); });
    mlp.w1 = Matrix<double>::NullaryExpr(4, 2, [&](Eigen::Index) { return normal(rng, 0.0, 2.0); });
    const auto f = FeatureMap<double>::random_uniform(4, 6, 6, rng, -2.0, 2.0);
    const auto m = channel_attention(mlp, f);
    for (int i = 0; i < 4; ++i) ok = ok && m(i) > 0.0 && m(i) < 1.0;

    Matrix<double> head = Matrix<double>::NullaryExpr(4, 4, [&](Eigen::Index) { return normal(rng, 0.0, 1.0); });
    Vector<double> bias = Vector<double>::Zero(4);
    const auto probs = classify_grade(head, bias, f);
    ok = ok && std::abs(probs.sum() - 1.0) < 1e-6 && probs.minCoeff() >= 0.0;
  }

  // Confusion-matrix conservation.
  {
    std::vector<Her2Grade> truth, pred;
    for (int i = 0; i < 123; ++i) {
      truth.push_back(kAllGrades[uniform_int(rng, 0, 3)]);
      pred.push_back(kAllGrades[uniform_int(rng, 0, 3)]);
    }
    ok = ok && confusion(truth, pred).total() == 123;
  }

  report(8, "module property suites", ok);
}
