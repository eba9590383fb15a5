#pragma once

#include "her2flex/dataset.hpp"

namespace her2flex {

// Deterministic paired pseudo-stain generator. Each pair shares one latent
// tissue layout; the H&E rendering carries morphology (nuclei density and
// faint perinuclear halos that widen with expression), the IHC rendering
// carries a brown membrane stain whose intensity and arc completeness grow
// monotonically with grade. Both renderings are pixel-registered.
std::vector<PairedSample> synth_corpus(int n_per_grade, int size, std::uint64_t seed);

// Single pair for targeted tests; `index` selects the per-sample substream.
PairedSample synth_sample(Her2Grade grade, int index, int size, std::uint64_t seed);

// Brown-stain proxy used to validate the planted signal: mean(R - B) over an
// IHC image.
float brown_proxy(const ImageF& ihc);

}  // namespace her2flex
