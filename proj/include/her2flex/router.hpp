#pragma once

#include "her2flex/dataset.hpp"
#include "her2flex/nn/blocks.hpp"
#include "her2flex/nn/optim.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace her2flex {

enum class Arity { Dual, Single };

inline std::string arity_name(Arity a) { return a == Arity::Dual ? "dual" : "single"; }

// Caller-supplied request; declared_arity is the upstream manual judgment.
struct InputRequest {
  std::optional<ImageF> he;
  std::optional<ImageF> ihc;
  Arity declared_arity = Arity::Dual;
};

enum class BranchPath { DualPath, SinglePath };

struct BranchDecision {
  BranchPath path = BranchPath::DualPath;
  std::optional<ReconDirection> reconstruct_direction;
  std::optional<Modality> detected_modality;
  float confidence = 1.0f;
};

struct SelectorConfig {
  int base_channels = 8;
};

template <typename Scalar>
void init_selector(nn::ParamStore<Scalar>& store, const SelectorConfig& cfg, Rng& rng) {
  nn::init_small_cnn(store, "sel", 3, cfg.base_channels, 2, rng);
}

template <typename Scalar>
int selector_logits(nn::Graph<Scalar>& g, nn::ParamStore<Scalar>& store, int img) {
  return nn::small_cnn_logits(g, store, "sel", img);
}

// Argmax class and its softmax probability; total over both classes is 1 and
// ambiguous inputs still commit (lowest index wins ties).
template <typename Scalar>
std::pair<Modality, Scalar> classify_modality(nn::ParamStore<Scalar>& store,
                                              const FeatureMap<Scalar>& img) {
  nn::Graph<Scalar> g(false);
  const int logits = selector_logits(g, store, g.input(img));
  const int probs = nn::softmax(g, logits);
  const auto& p = g.value(probs);
  const Modality m = p(0, 0) >= p(1, 0) ? Modality::HE : Modality::IHC;
  return {m, p(static_cast<int>(m), 0)};
}

// Routing table: Dual -> direct dual path; Single -> classify the present
// image and pick the reconstruction direction for its missing counterpart.
template <typename Scalar>
BranchDecision route(const InputRequest& req, nn::ParamStore<Scalar>& selector) {
  const bool has_he = req.he.has_value();
  const bool has_ihc = req.ihc.has_value();
  if (req.declared_arity == Arity::Dual) {
    require(has_he && has_ihc, Errc::arity_violation, "dual arity requires both modalities");
    BranchDecision d;
    d.path = BranchPath::DualPath;
    d.confidence = 1.0f;
    return d;
  }
  require(has_he != has_ihc, Errc::arity_violation, "single arity requires exactly one modality");
  const FeatureMap<Scalar>& img = has_he ? *req.he : *req.ihc;
  const auto [m, conf] = classify_modality(selector, img);
  BranchDecision d;
  d.path = BranchPath::SinglePath;
  d.detected_modality = m;
  d.reconstruct_direction = direction_for(m);
  d.confidence = static_cast<float>(conf);
  return d;
}

struct EpochStats {
  float loss = 0.0f;
  float accuracy = 0.0f;
};

// Trains the modality classifier with 2-way uniform-weight cross-entropy.
// Deterministic given (parameters, data order, seed).
template <typename Scalar>
std::vector<EpochStats> train_selector(nn::ParamStore<Scalar>& store,
                                       const std::vector<std::pair<FeatureMap<Scalar>, Modality>>& data,
                                       int epochs, std::uint64_t seed, Scalar lr = Scalar(1e-3),
                                       int batch_size = 16, int epoch_offset = 0) {
  bool saw_he = false, saw_ihc = false;
  for (const auto& [img, m] : data) (m == Modality::HE ? saw_he : saw_ihc) = true;
  require(saw_he && saw_ihc, Errc::degenerate_dataset,
          "selector training needs both modalities");

  nn::AdamW<Scalar> opt;
  opt.lr0 = lr;
  opt.total_steps = 0;
  const Vector<Scalar> uniform = Vector<Scalar>::Ones(2);

  std::vector<EpochStats> history;
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng rng = make_rng(derive_seed(seed, 0x5e1ec, static_cast<std::uint64_t>(epoch_offset + epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    long correct = 0;
    for (size_t start = 0; start < order.size(); start += batch_size) {
      const size_t end = std::min(order.size(), start + batch_size);
      nn::Graph<Scalar> g;
      std::vector<int> losses;
      for (size_t i = start; i < end; ++i) {
        const auto& [img, m] = data[order[i]];
        const int logits = selector_logits(g, store, g.input(img));
        losses.push_back(nn::softmax_ce(g, logits, static_cast<int>(m), uniform));
        const auto& l = g.value(logits);
        const int pred = l(0, 0) >= l(1, 0) ? 0 : 1;
        correct += pred == static_cast<int>(m);
      }
      const int batch_loss = nn::mean_scalars(g, losses);
      const Scalar lv = g.scalar_value(batch_loss);
      require(std::isfinite(static_cast<double>(lv)), Errc::non_finite_loss,
              "selector loss diverged");
      loss_sum += static_cast<double>(lv) * static_cast<double>(end - start);
      store.zero_grads();
      g.backward(batch_loss);
      opt.step(store);
    }
    EpochStats s;
    s.loss = static_cast<float>(loss_sum / static_cast<double>(data.size()));
    s.accuracy = static_cast<float>(correct) / static_cast<float>(data.size());
    history.push_back(s);
  }
  return history;
}

}  // namespace her2flex
