#pragma once

#include "her2flex/types.hpp"

#include <cstdint>

namespace her2flex {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;
  int momentum_switch_iter = 250;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
};

struct TsneResult {
  MatrixD embedding;             // n x 2
  double kl_after_exaggeration;  // KL against the plain P once exaggeration ends
  double kl_final;
};

// Exact (non-approximate) t-SNE of the rows of X (n x D) into 2-D.
// Deterministic given the seed. Requires 3 * perplexity < n and D >= 2.
TsneResult tsne_embed(const MatrixD& points, const TsneConfig& cfg);

}  // namespace her2flex
