#pragma once

#include "her2flex/nn/blocks.hpp"
#include "her2flex/nn/optim.hpp"

#include <cmath>
#include <vector>

namespace her2flex {

// --- Image pyramid -----------------------------------------------------------

template <typename Scalar>
struct Pyramid {
  std::vector<FeatureMap<Scalar>> levels;  // level 0 = original
};

// Level s is 2x2 average pooling of level s-1; level dims are
// ceil(dims / 2^(s-1)).
template <typename Scalar>
Pyramid<Scalar> build_pyramid(const FeatureMap<Scalar>& img, int levels) {
  require(levels >= 1, Errc::too_many_levels, "pyramid needs at least one level");
  const int need = 1 << (levels - 1);
  require(img.height >= need && img.width >= need, Errc::too_many_levels,
          "image too small for requested pyramid depth");
  Pyramid<Scalar> pyr;
  pyr.levels.push_back(img);
  for (int s = 1; s < levels; ++s) pyr.levels.push_back(avg_pool2(pyr.levels.back()));
  return pyr;
}

// Sum over levels of the mean absolute difference; zero iff the images are
// equal, symmetric in its arguments.
template <typename Scalar>
Scalar pyramid_l1_loss(const FeatureMap<Scalar>& gen, const FeatureMap<Scalar>& target, int levels) {
  require(gen.same_shape(target), Errc::shape_mismatch, "pyramid_l1_loss shape mismatch");
  const Pyramid<Scalar> pg = build_pyramid(gen, levels);
  const Pyramid<Scalar> pt = build_pyramid(target, levels);
  Scalar total = 0;
  for (int s = 0; s < levels; ++s)
    total += (pg.levels[s].data - pt.levels[s].data).cwiseAbs().mean();
  return total;
}

// --- Adversarial loss --------------------------------------------------------

enum class AdvRole { GeneratorStep, DiscReal, DiscFake };

// Mean binary cross-entropy of post-sigmoid scores against the role's target
// (GeneratorStep and DiscReal target 1, DiscFake targets 0); non-saturating
// generator form.
template <typename Scalar>
Scalar adversarial_loss(const Matrix<Scalar>& scores, AdvRole role) {
  constexpr Scalar eps = Scalar(1e-7);
  const Scalar target = role == AdvRole::DiscFake ? Scalar(0) : Scalar(1);
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const Scalar p = std::min(std::max(scores(i), eps), Scalar(1) - eps);
    acc -= target * std::log(p) + (Scalar(1) - target) * std::log(Scalar(1) - p);
  }
  return acc / Scalar(scores.size());
}

template <typename Scalar>
Scalar reconstruction_loss(Scalar gan_term, Scalar l1_terms, Scalar lambda3, Scalar lambda4) {
  require(lambda3 >= 0 && lambda4 >= 0, Errc::bad_config, "lambda3/lambda4 must be nonnegative");
  return lambda3 * gan_term + lambda4 * l1_terms;
}

// --- Generator ---------------------------------------------------------------

struct GeneratorConfig {
  int base_channels = 12;
  int attention_kernel = 7;
  static constexpr int downsample_factor = 4;  // two stride-2 stages
};

template <typename Scalar>
void init_generator(nn::ParamStore<Scalar>& store, const GeneratorConfig& cfg, Rng& rng) {
  const int f = cfg.base_channels;
  nn::init_conv_block(store, "g.stem", f, 3, rng);
  nn::init_conv_block(store, "g.down1", 2 * f, f, rng);
  nn::init_residual_block(store, "g.res1", 2 * f, rng);
  nn::init_conv_block(store, "g.down2", 4 * f, 2 * f, rng);
  nn::init_residual_block(store, "g.res2", 4 * f, rng);
  nn::declare_conv(store, "g.att", 1, 2, cfg.attention_kernel, rng);
  nn::init_conv_block(store, "g.up1", 2 * f, 6 * f, rng);
  nn::init_conv_block(store, "g.up2", f, 3 * f, rng);
  nn::declare_conv(store, "g.head", 3, f, 3, rng);
}

// Encoder of multi-scale residual blocks, a sigmoid spatial-attention gate on
// the bottleneck, and a skip-connected decoder; sigmoid output keeps values
// in (0, 1) for any parameters.
template <typename Scalar>
int generator_nodes(nn::Graph<Scalar>& g, nn::ParamStore<Scalar>& store, int src,
                    const GeneratorConfig& cfg) {
  const int k = cfg.attention_kernel;
  const int stem = nn::conv_block(g, store, "g.stem", src);
  const int d1 = nn::conv_block(g, store, "g.down1", stem, 3, 2);
  const int r1 = nn::residual_block(g, store, "g.res1", d1);
  const int d2 = nn::conv_block(g, store, "g.down2", r1, 3, 2);
  const int r2 = nn::residual_block(g, store, "g.res2", d2);

  // Spatial attention over channel-pooled statistics of the bottleneck.
  const int pooled = nn::concat_ch(g, {nn::channel_mean_map(g, r2), nn::channel_max_map(g, r2)});
  const int mask = nn::sigmoid(
      g, nn::conv2d(g, pooled, g.param(store, "g.att.w"), g.param(store, "g.att.b"), k, 1, k / 2));
  const int gated = nn::spatial_scale(g, r2, mask);

  const int u1 = nn::conv_block(g, store, "g.up1",
                                nn::concat_ch(g, {nn::upsample2(g, gated), r1}));
  const int u2 = nn::conv_block(g, store, "g.up2",
                                nn::concat_ch(g, {nn::upsample2(g, u1), stem}));
  return nn::sigmoid(
      g, nn::conv2d(g, u2, g.param(store, "g.head.w"), g.param(store, "g.head.b"), 3, 1, 1));
}

// Inference-mode reconstruction of the missing modality from the source
// image. Deterministic; requires dims divisible by the downsampling factor.
template <typename Scalar>
FeatureMap<Scalar> generator_forward(nn::ParamStore<Scalar>& store, const FeatureMap<Scalar>& src,
                                     const GeneratorConfig& cfg) {
  require(src.height % GeneratorConfig::downsample_factor == 0 &&
              src.width % GeneratorConfig::downsample_factor == 0,
          Errc::shape_mismatch, "generator input dims must be divisible by 4");
  nn::Graph<Scalar> g(false);
  return g.feature(generator_nodes(g, store, g.input(src), cfg));
}

// --- Discriminator -----------------------------------------------------------

struct DiscriminatorConfig {
  int base_channels = 12;
};

template <typename Scalar>
void init_discriminator(nn::ParamStore<Scalar>& store, const DiscriminatorConfig& cfg, Rng& rng) {
  const int f = cfg.base_channels;
  nn::init_conv_block(store, "d.c1", f, 6, rng);
  nn::init_conv_block(store, "d.c2", 2 * f, f, rng);
  nn::declare_conv(store, "d.out", 1, 2 * f, 3, rng);
}

// Patch-wise conditional scores over (source, candidate) concatenated along
// channels; returns a post-sigmoid grid whose dims are input dims / 4.
template <typename Scalar>
int discriminator_scores(nn::Graph<Scalar>& g, nn::ParamStore<Scalar>& store, int src, int cand,
                         bool trainable) {
  auto p = [&](const std::string& name) {
    return trainable ? g.param(store, name) : g.frozen(store, name);
  };
  int h = nn::concat_ch(g, {src, cand});
  h = nn::lrelu(g, nn::conv2d(g, h, p("d.c1.w"), p("d.c1.b"), 3, 2, 1));
  h = nn::lrelu(g, nn::conv2d(g, h, p("d.c2.w"), p("d.c2.b"), 3, 2, 1));
  h = nn::conv2d(g, h, p("d.out.w"), p("d.out.b"), 3, 1, 1);
  return nn::sigmoid(g, h);
}

// In-graph pyramid L1 between a generated node and a target node.
template <typename Scalar>
int pyramid_l1_nodes(nn::Graph<Scalar>& g, int gen, int target, int levels) {
  std::vector<int> terms;
  int a = gen, b = target;
  for (int s = 0; s < levels; ++s) {
    if (s > 0) {
      a = nn::avg_pool2(g, a);
      b = nn::avg_pool2(g, b);
    }
    terms.push_back(nn::l1_mean(g, a, b));
  }
  return nn::weighted_sum(g, terms, std::vector<Scalar>(terms.size(), Scalar(1)));
}

// --- Training step -----------------------------------------------------------

template <typename Scalar>
struct GanStepResult {
  Scalar g_loss = 0;
  Scalar d_loss = 0;
  Scalar l1 = 0;
};

// Discriminator update against detached fakes: only disc_store is stepped.
template <typename Scalar>
Scalar gan_disc_step(nn::ParamStore<Scalar>& gen_store, nn::ParamStore<Scalar>& disc_store,
                     const std::vector<std::pair<FeatureMap<Scalar>, FeatureMap<Scalar>>>& batch,
                     const GeneratorConfig& gcfg, nn::AdamW<Scalar>& disc_opt) {
  require(!batch.empty(), Errc::empty_batch, "gan step needs a nonempty batch");
  nn::Graph<Scalar> g;
  std::vector<int> losses;
  for (const auto& [src, tgt] : batch) {
    const FeatureMap<Scalar> fake = generator_forward(gen_store, src, gcfg);
    const int src_id = g.input(src);
    const int real_scores = discriminator_scores(g, disc_store, src_id, g.input(tgt), true);
    const int fake_scores = discriminator_scores(g, disc_store, src_id, g.input(fake), true);
    losses.push_back(nn::bce_mean(g, real_scores, Scalar(1)));
    losses.push_back(nn::bce_mean(g, fake_scores, Scalar(0)));
  }
  const int d_loss = nn::weighted_sum(
      g, losses, std::vector<Scalar>(losses.size(), Scalar(0.5) / Scalar(batch.size())));
  const Scalar value = g.scalar_value(d_loss);
  require(std::isfinite(static_cast<double>(value)), Errc::non_finite_loss,
          "discriminator loss diverged");
  disc_store.zero_grads();
  g.backward(d_loss);
  disc_opt.step(disc_store);
  return value;
}

// Generator update on the adversarial + pyramid L1 objective with the
// discriminator frozen: only gen_store is stepped.
template <typename Scalar>
GanStepResult<Scalar> gan_gen_step(nn::ParamStore<Scalar>& gen_store,
                                   nn::ParamStore<Scalar>& disc_store,
                                   const std::vector<std::pair<FeatureMap<Scalar>, FeatureMap<Scalar>>>& batch,
                                   Scalar lambda3, Scalar lambda4, int pyramid_levels,
                                   const GeneratorConfig& gcfg, nn::AdamW<Scalar>& gen_opt) {
  require(!batch.empty(), Errc::empty_batch, "gan step needs a nonempty batch");
  nn::Graph<Scalar> g;
  std::vector<int> adv_terms, l1_terms;
  for (const auto& [src, tgt] : batch) {
    const int src_id = g.input(src);
    const int fake = generator_nodes(g, gen_store, src_id, gcfg);
    const int scores = discriminator_scores(g, disc_store, src_id, fake, false);
    adv_terms.push_back(nn::bce_mean(g, scores, Scalar(1)));
    l1_terms.push_back(pyramid_l1_nodes<Scalar>(g, fake, g.input(tgt), pyramid_levels));
  }
  const int adv = nn::mean_scalars(g, adv_terms);
  const int l1 = nn::mean_scalars(g, l1_terms);
  const int g_loss = nn::weighted_sum(g, {adv, l1}, {lambda3, lambda4});
  GanStepResult<Scalar> result;
  result.g_loss = g.scalar_value(g_loss);
  result.l1 = g.scalar_value(l1);
  require(std::isfinite(static_cast<double>(result.g_loss)), Errc::non_finite_loss,
          "generator loss diverged");
  gen_store.zero_grads();
  g.backward(g_loss);
  gen_opt.step(gen_store);
  return result;
}

// One discriminator update (real pair vs detached fake pair) then one
// generator update. The two parameter stores are strictly isolated: each
// phase steps only its own store.
template <typename Scalar>
GanStepResult<Scalar> gan_train_step(nn::ParamStore<Scalar>& gen_store,
                                     nn::ParamStore<Scalar>& disc_store,
                                     const std::vector<std::pair<FeatureMap<Scalar>, FeatureMap<Scalar>>>& batch,
                                     Scalar lambda3, Scalar lambda4, int pyramid_levels,
                                     const GeneratorConfig& gcfg, nn::AdamW<Scalar>& gen_opt,
                                     nn::AdamW<Scalar>& disc_opt) {
  const Scalar d_loss = gan_disc_step(gen_store, disc_store, batch, gcfg, disc_opt);
  GanStepResult<Scalar> result =
      gan_gen_step(gen_store, disc_store, batch, lambda3, lambda4, pyramid_levels, gcfg, gen_opt);
  result.d_loss = d_loss;
  return result;
}

}  // namespace her2flex
