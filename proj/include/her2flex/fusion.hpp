#pragma once

#include "her2flex/encoder.hpp"
#include "her2flex/grades.hpp"

namespace her2flex {

struct FusionConfig {
  int reduced_channels = 16;  // C', defaults to C_s
  int reduction_ratio = 8;    // r in the attention MLP
};

// Channel-attention MLP of Eq.-1 shape: W0 (C -> C/r), rectifier, W1 (C/r ->
// C); one weight set shared between the average-pooled and max-pooled paths.
template <typename Scalar>
struct AttentionMlp {
  Matrix<Scalar> w0;
  Matrix<Scalar> w1;
};

template <typename Scalar>
void init_fusion(nn::ParamStore<Scalar>& store, int c_s, int c_he, int c_ihc,
                 const FusionConfig& cfg, Rng& rng, bool with_attention = true) {
  const int c_in = c_s + c_he + c_ihc;
  const int cr = cfg.reduced_channels;
  require(cr % cfg.reduction_ratio == 0, Errc::bad_config,
          "reduction ratio must divide the reduced channel count");
  nn::declare_conv(store, "fuse.reduce", cr, c_in, 1, rng);
  if (with_attention) {
    nn::declare_linear(store, "fuse.att0", cr / cfg.reduction_ratio, cr, rng, /*bias=*/false);
    nn::declare_linear(store, "fuse.att1", cr, cr / cfg.reduction_ratio, rng, /*bias=*/false);
  }
  nn::declare_linear(store, "head.fc", kNumGrades, cr, rng);
}

// Channel concatenation in the order (F_s, F_he, F_ihc) followed by a 1x1
// convolution down to C' channels.
template <typename Scalar>
FeatureMap<Scalar> concat_and_reduce(const FeatureBundle<Scalar>& bundle, const Matrix<Scalar>& w,
                                     const Vector<Scalar>& b) {
  require(bundle.f_s.height == bundle.f_he.height && bundle.f_s.width == bundle.f_he.width &&
              bundle.f_s.height == bundle.f_ihc.height && bundle.f_s.width == bundle.f_ihc.width,
          Errc::spatial_mismatch, "bundle features must share spatial dims");
  const int c_total = bundle.f_s.channels() + bundle.f_he.channels() + bundle.f_ihc.channels();
  require(w.cols() == c_total && w.rows() == b.size(), Errc::shape_mismatch,
          "reducer shape does not match bundle channels");
  FeatureMap<Scalar> cat = concat_channels(concat_channels(bundle.f_s, bundle.f_he), bundle.f_ihc);
  FeatureMap<Scalar> out;
  out.height = cat.height;
  out.width = cat.width;
  out.data = w * cat.data;
  out.data.colwise() += b;
  return out;
}

// Eq.-1 channel attention: sigmoid(MLP(AvgPool(F)) + MLP(MaxPool(F))); every
// component lies strictly in (0, 1).
template <typename Scalar>
Vector<Scalar> channel_attention(const AttentionMlp<Scalar>& mlp, const FeatureMap<Scalar>& f) {
  require(mlp.w0.cols() == f.channels() && mlp.w1.rows() == f.channels() &&
              mlp.w1.cols() == mlp.w0.rows(),
          Errc::shape_mismatch, "attention MLP does not match channel count");
  const Vector<Scalar> avg = channel_means(f);
  const Vector<Scalar> mx = channel_maxima(f);
  auto mlp_path = [&](const Vector<Scalar>& v) -> Vector<Scalar> {
    Vector<Scalar> h = (mlp.w0 * v).cwiseMax(Scalar(0));
    return mlp.w1 * h;
  };
  const Vector<Scalar> pre = mlp_path(avg) + mlp_path(mx);
  return pre.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
}

// Per-channel broadcast multiply of the attention weights into the features.
template <typename Scalar>
FeatureMap<Scalar> apply_attention(const FeatureMap<Scalar>& f, const Vector<Scalar>& weights) {
  require(weights.size() == f.channels(), Errc::length_mismatch,
          "attention weight length must equal channel count");
  FeatureMap<Scalar> out = f;
  out.data.array().colwise() *= weights.array();
  return out;
}

// 4-way softmax over GAP + linear head logits.
template <typename Scalar>
Vector<Scalar> classify_grade(const Matrix<Scalar>& head_w, const Vector<Scalar>& head_b,
                              const FeatureMap<Scalar>& fused) {
  require(head_w.rows() == kNumGrades && head_w.cols() == fused.channels(), Errc::shape_mismatch,
          "classifier head does not match fused channels");
  const Vector<Scalar> v = channel_means(fused);
  Vector<Scalar> logits = head_w * v + head_b;
  Vector<Scalar> z = (logits.array() - logits.maxCoeff()).exp();
  return z / z.sum();
}

// Lowest index wins ties, so equal logits predict G0.
template <typename Scalar>
Her2Grade predicted_grade(const Vector<Scalar>& probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs(i) > probs(best)) best = i;
  return static_cast<Her2Grade>(best);
}

// Eq.-2 weighted cross-entropy for a one-hot label: -w_label * ln(p_label).
template <typename Scalar>
Scalar weighted_cross_entropy(const Vector<Scalar>& probs, Her2Grade label,
                              const Vector<Scalar>& class_weights) {
  require(probs.size() == kNumGrades && class_weights.size() == kNumGrades, Errc::length_mismatch,
          "expected 4-way distributions");
  require(std::abs(probs.sum() - Scalar(1)) <= Scalar(1e-4), Errc::invalid_distribution,
          "probabilities must sum to 1");
  require(class_weights.minCoeff() > 0, Errc::bad_config, "class weights must be positive");
  constexpr Scalar eps = Scalar(1e-7);
  const Scalar p = std::max(probs(grade_index(label)), eps);
  return -class_weights(grade_index(label)) * std::log(p);
}

template <typename Scalar>
Scalar total_loss(Scalar cls_term, Scalar enc_term, Scalar recon_term) {
  return cls_term + enc_term + recon_term;
}

// --- In-graph fused classifier ------------------------------------------------

// Concatenate, reduce, optionally gate by channel attention, then classify.
// Returns the 4-way logits node. The attention MLP weights are shared between
// the two pooled paths via parameter-node dedup.
template <typename Scalar>
int fusion_logits(nn::Graph<Scalar>& g, nn::ParamStore<Scalar>& store, int f_s, int f_he, int f_ihc,
                  bool use_attention) {
  int f = nn::conv2d(g, nn::concat_ch(g, {f_s, f_he, f_ihc}), g.param(store, "fuse.reduce.w"),
                     g.param(store, "fuse.reduce.b"), 1, 1, 0);
  if (use_attention) {
    const int w0 = g.param(store, "fuse.att0.w");
    const int w1 = g.param(store, "fuse.att1.w");
    const int avg_path = nn::matvec(g, w1, nn::relu(g, nn::matvec(g, w0, nn::gap(g, f))));
    const int max_path = nn::matvec(g, w1, nn::relu(g, nn::matvec(g, w0, nn::channel_max(g, f))));
    const int weights = nn::sigmoid(g, nn::add(g, avg_path, max_path));
    f = nn::channel_scale(g, f, weights);
  }
  return nn::linear(g, nn::gap(g, f), g.param(store, "head.fc.w"), g.param(store, "head.fc.b"));
}

}  // namespace her2flex
