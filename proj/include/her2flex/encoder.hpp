#pragma once

#include "her2flex/grades.hpp"
#include "her2flex/nn/blocks.hpp"

#include <algorithm>
#include <vector>

namespace her2flex {

struct EncoderConfig {
  int shared_channels = 16;    // C_s
  int specific_channels = 8;   // C_he = C_ihc
  static constexpr int downsample_factor = 4;
};

// Shared encoder: one weight set applied to both modalities. Four conv blocks
// (stem, residual, downsample, residual) mapping 3 x H x W to
// C_s x H/4 x W/4.
template <typename Scalar>
void init_shared_encoder(nn::ParamStore<Scalar>& store, const EncoderConfig& cfg, Rng& rng) {
  const int c = cfg.shared_channels;
  nn::init_conv_block(store, "shared.stem", c, 3, rng);
  nn::init_residual_block(store, "shared.res1", c, rng);
  nn::init_conv_block(store, "shared.down", c, c, rng);
  nn::init_residual_block(store, "shared.res2", c, rng);
}

template <typename Scalar>
int shared_encoder_nodes(nn::Graph<Scalar>& g, nn::ParamStore<Scalar>& store, int img) {
  int h = nn::conv_block(g, store, "shared.stem", img, 3, 2);
  h = nn::residual_block(g, store, "shared.res1", h);
  h = nn::conv_block(g, store, "shared.down", h, 3, 2);
  return nn::residual_block(g, store, "shared.res2", h);
}

template <typename Scalar>
FeatureMap<Scalar> encode_shared(nn::ParamStore<Scalar>& store, const FeatureMap<Scalar>& img) {
  require(img.height % EncoderConfig::downsample_factor == 0 &&
              img.width % EncoderConfig::downsample_factor == 0,
          Errc::shape_mismatch, "encoder input dims must be divisible by 4");
  nn::Graph<Scalar> g(false);
  return g.feature(shared_encoder_nodes(g, store, g.input(img)));
}

// Modality-specific branch. The two instances (prefixes "spec_he" and
// "spec_ihc") share architecture but never parameters.
template <typename Scalar>
void init_specific_encoder(nn::ParamStore<Scalar>& store, const std::string& prefix,
                           const EncoderConfig& cfg, Rng& rng) {
  const int c = cfg.specific_channels;
  nn::init_conv_block(store, prefix + ".stem", c, 3, rng);
  nn::init_residual_block(store, prefix + ".res", c, rng);
  nn::init_conv_block(store, prefix + ".down", c, c, rng);
}

template <typename Scalar>
int specific_encoder_nodes(nn::Graph<Scalar>& g, nn::ParamStore<Scalar>& store,
                           const std::string& prefix, int img) {
  int h = nn::conv_block(g, store, prefix + ".stem", img, 3, 2);
  h = nn::residual_block(g, store, prefix + ".res", h);
  return nn::conv_block(g, store, prefix + ".down", h, 3, 2);
}

inline std::string specific_prefix(Modality m) {
  return m == Modality::HE ? "spec_he" : "spec_ihc";
}

template <typename Scalar>
FeatureMap<Scalar> encode_specific(nn::ParamStore<Scalar>& store, Modality branch,
                                   const FeatureMap<Scalar>& img, Modality m) {
  require(branch == m, Errc::modality_mismatch,
          "the " + modality_name(branch) + " branch was invoked with a " + modality_name(m) +
              " image");
  nn::Graph<Scalar> g(false);
  return g.feature(specific_encoder_nodes(g, store, specific_prefix(branch), g.input(img)));
}

// Disentangled features for one sample; provenance flags mark features that
// came from a reconstructed image.
template <typename Scalar>
struct FeatureBundle {
  FeatureMap<Scalar> f_s;
  FeatureMap<Scalar> f_he;
  FeatureMap<Scalar> f_ihc;
  bool he_reconstructed = false;
  bool ihc_reconstructed = false;
};

// Domain head: GAP + linear map to a 2-way modality probability.
template <typename Scalar>
void init_domain_head(nn::ParamStore<Scalar>& store, int channels, Rng& rng) {
  nn::declare_linear(store, "domhead.fc", 2, channels, rng);
}

template <typename Scalar>
int domain_logits(nn::Graph<Scalar>& g, nn::ParamStore<Scalar>& store, int features) {
  return nn::linear(g, nn::gap(g, features), g.param(store, "domhead.fc.w"),
                    g.param(store, "domhead.fc.b"));
}

// Mean cross-entropy of the head's modality predictions against the true
// modality labels, probabilities clamped at 1e-7.
template <typename Scalar>
Scalar domain_classification_loss(nn::ParamStore<Scalar>& store,
                                  const std::vector<FeatureMap<Scalar>>& features,
                                  const std::vector<Modality>& labels) {
  require(!features.empty(), Errc::empty_batch, "domain loss needs a nonempty batch");
  require(features.size() == labels.size(), Errc::length_mismatch,
          "features/labels length mismatch");
  constexpr Scalar eps = Scalar(1e-7);
  Scalar acc = 0;
  for (size_t i = 0; i < features.size(); ++i) {
    nn::Graph<Scalar> g(false);
    const int probs = nn::softmax(g, domain_logits(g, store, g.input(features[i])));
    const Scalar p = std::max(g.value(probs)(static_cast<int>(labels[i]), 0), eps);
    acc -= std::log(p);
  }
  return acc / Scalar(features.size());
}

// Biased (V-statistic) squared MMD with a Gaussian kernel; nonnegative by
// construction and zero for identical multisets.
template <typename Scalar>
Scalar mmd_distance(const std::vector<Vector<Scalar>>& xs, const std::vector<Vector<Scalar>>& ys,
                    Scalar sigma) {
  require(!xs.empty() && !ys.empty(), Errc::empty_batch, "mmd needs nonempty sets");
  require(sigma > 0, Errc::bad_config, "mmd bandwidth must be positive");
  const Eigen::Index dim = xs[0].size();
  for (const auto& v : xs)
    require(v.size() == dim, Errc::dimension_mismatch, "mmd vectors must share dimension");
  for (const auto& v : ys)
    require(v.size() == dim, Errc::dimension_mismatch, "mmd vectors must share dimension");
  const Scalar inv2s2 = Scalar(1) / (2 * sigma * sigma);
  auto kern = [&](const Vector<Scalar>& a, const Vector<Scalar>& b) {
    return std::exp(-(a - b).squaredNorm() * inv2s2);
  };
  Scalar kxx = 0, kyy = 0, kxy = 0;
  for (const auto& a : xs)
    for (const auto& b : xs) kxx += kern(a, b);
  for (const auto& a : ys)
    for (const auto& b : ys) kyy += kern(a, b);
  for (const auto& a : xs)
    for (const auto& b : ys) kxy += kern(a, b);
  const Scalar n = Scalar(xs.size()), m = Scalar(ys.size());
  return kxx / (n * n) + kyy / (m * m) - 2 * kxy / (n * m);
}

// Median of the pairwise distances over both sets; falls back to 1 when all
// points coincide. Recomputed per batch.
template <typename Scalar>
Scalar median_heuristic_sigma(const std::vector<Vector<Scalar>>& xs,
                              const std::vector<Vector<Scalar>>& ys) {
  std::vector<Vector<Scalar>> all = xs;
  all.insert(all.end(), ys.begin(), ys.end());
  std::vector<Scalar> dists;
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j) dists.push_back((all[i] - all[j]).norm());
  if (dists.empty()) return Scalar(1);
  std::sort(dists.begin(), dists.end());
  const Scalar med = dists[dists.size() / 2];
  return med > Scalar(0) ? med : Scalar(1);
}

template <typename Scalar>
Scalar encoder_loss(Scalar domain_term, Scalar align_term, Scalar lambda1, Scalar lambda2) {
  require(lambda1 >= 0 && lambda2 >= 0, Errc::bad_config, "lambda1/lambda2 must be nonnegative");
  return lambda1 * domain_term + lambda2 * align_term;
}

}  // namespace her2flex
