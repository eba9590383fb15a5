#pragma once

#include "her2flex/nn/params.hpp"

#include <cmath>

namespace her2flex::nn {

// AdamW with decoupled weight decay and polynomial learning-rate decay
// lr(t) = lr0 * (1 - t / total_steps)^power (constant when total_steps == 0).
template <typename Scalar>
class AdamW {
 public:
  Scalar lr0 = Scalar(1e-4);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  Scalar weight_decay = Scalar(0);
  Scalar poly_power = Scalar(0.9);
  long total_steps = 0;

  Scalar current_lr() const {
    if (total_steps <= 0) return lr0;
    const Scalar frac = std::min(Scalar(1), Scalar(step_count_) / Scalar(total_steps));
    return lr0 * std::pow(Scalar(1) - frac + Scalar(1e-12), poly_power);
  }

  long steps_taken() const { return step_count_; }

  void step(ParamStore<Scalar>& store) {
    const Scalar lr = current_lr();
    ++step_count_;
    const Scalar bc1 = Scalar(1) - std::pow(beta1, Scalar(step_count_));
    const Scalar bc2 = Scalar(1) - std::pow(beta2, Scalar(step_count_));
    for (auto& [name, e] : store.entries()) {
      auto& [m, v] = moments_[name];
      if (m.size() == 0) {
        m = Matrix<Scalar>::Zero(e.value.rows(), e.value.cols());
        v = Matrix<Scalar>::Zero(e.value.rows(), e.value.cols());
      }
      m = beta1 * m + (Scalar(1) - beta1) * e.grad;
      v = beta2 * v.array() + (Scalar(1) - beta2) * e.grad.array().square();
      const auto mhat = m.array() / bc1;
      const auto vhat = v.array() / bc2;
      e.value.array() -= lr * (mhat / (vhat.sqrt() + eps) + weight_decay * e.value.array());
    }
  }

 private:
  long step_count_ = 0;
  std::map<std::string, std::pair<Matrix<Scalar>, Matrix<Scalar>>> moments_;
};

}  // namespace her2flex::nn
