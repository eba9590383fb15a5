#pragma once

#include "her2flex/nn/ops.hpp"

namespace her2flex::nn {

// conv3x3 + leaky ReLU, same padding.
template <typename Scalar>
void init_conv_block(ParamStore<Scalar>& store, const std::string& name, int c_out, int c_in,
                     Rng& rng, int k = 3) {
  declare_conv(store, name, c_out, c_in, k, rng);
}

template <typename Scalar>
int conv_block(Graph<Scalar>& g, ParamStore<Scalar>& store, const std::string& name, int x,
               int k = 3, int stride = 1) {
  const int y = conv2d(g, x, g.param(store, name + ".w"), g.param(store, name + ".b"), k, stride, k / 2);
  return lrelu(g, y);
}

// Two 3x3 convs with an identity skip; channel count is preserved.
template <typename Scalar>
void init_residual_block(ParamStore<Scalar>& store, const std::string& name, int channels, Rng& rng) {
  declare_conv(store, name + ".c1", channels, channels, 3, rng);
  declare_conv(store, name + ".c2", channels, channels, 3, rng);
}

template <typename Scalar>
int residual_block(Graph<Scalar>& g, ParamStore<Scalar>& store, const std::string& name, int x) {
  int h = conv_block(g, store, name + ".c1", x);
  h = conv2d(g, h, g.param(store, name + ".c2.w"), g.param(store, name + ".c2.b"), 3, 1, 1);
  return lrelu(g, add(g, x, h));
}

// Three stride-2 conv blocks, GAP, and a fully connected head. This is the
// selector backbone and the unimodal comparison backbone.
template <typename Scalar>
void init_small_cnn(ParamStore<Scalar>& store, const std::string& prefix, int c_in, int base,
                    int n_out, Rng& rng) {
  declare_conv(store, prefix + ".c1", base, c_in, 3, rng);
  declare_conv(store, prefix + ".c2", 2 * base, base, 3, rng);
  declare_conv(store, prefix + ".c3", 4 * base, 2 * base, 3, rng);
  declare_linear(store, prefix + ".fc", n_out, 4 * base, rng);
}

template <typename Scalar>
int small_cnn_logits(Graph<Scalar>& g, ParamStore<Scalar>& store, const std::string& prefix, int img) {
  int h = conv_block(g, store, prefix + ".c1", img, 3, 2);
  h = conv_block(g, store, prefix + ".c2", h, 3, 2);
  h = conv_block(g, store, prefix + ".c3", h, 3, 2);
  h = gap(g, h);
  return linear(g, h, g.param(store, prefix + ".fc.w"), g.param(store, prefix + ".fc.b"));
}

}  // namespace her2flex::nn
