#pragma once

#include "her2flex/rng.hpp"
#include "her2flex/types.hpp"

#include <cmath>
#include <map>
#include <string>

namespace her2flex::nn {

// Named parameter arrays with matching gradient slots. std::map keeps
// iteration deterministic for the optimizer and the checkpoint writer.
template <typename Scalar>
class ParamStore {
 public:
  struct Entry {
    Matrix<Scalar> value;
    Matrix<Scalar> grad;
  };

  Matrix<Scalar>& declare(const std::string& name, int rows, int cols) {
    auto it = entries_.find(name);
    if (it != entries_.end()) {
      require(it->second.value.rows() == rows && it->second.value.cols() == cols,
              Errc::shape_mismatch, "parameter '" + name + "' redeclared with different shape");
      return it->second.value;
    }
    Entry e;
    e.value = Matrix<Scalar>::Zero(rows, cols);
    e.grad = Matrix<Scalar>::Zero(rows, cols);
    return entries_.emplace(name, std::move(e)).first->second.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  Entry& at(const std::string& name) {
    auto it = entries_.find(name);
    require(it != entries_.end(), Errc::shape_mismatch, "unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries_.find(name);
    require(it != entries_.end(), Errc::shape_mismatch, "unknown parameter '" + name + "'");
    return it->second;
  }

  void zero_grads() {
    for (auto& [name, e] : entries_) e.grad.setZero();
  }

  long param_count() const {
    long n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
  }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

template <typename Scalar>
void fill_normal(Matrix<Scalar>& m, Scalar stddev, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = normal<Scalar>(rng, 0, stddev);
}

// He-style init keyed to fan-in; biases stay zero.
template <typename Scalar>
void declare_conv(ParamStore<Scalar>& store, const std::string& prefix, int c_out, int c_in, int k,
                  Rng& rng) {
  Matrix<Scalar>& w = store.declare(prefix + ".w", c_out, c_in * k * k);
  fill_normal(w, std::sqrt(Scalar(2) / Scalar(c_in * k * k)), rng);
  store.declare(prefix + ".b", c_out, 1);
}

template <typename Scalar>
void declare_linear(ParamStore<Scalar>& store, const std::string& prefix, int out, int in, Rng& rng,
                    bool bias = true) {
  Matrix<Scalar>& w = store.declare(prefix + ".w", out, in);
  fill_normal(w, std::sqrt(Scalar(2) / Scalar(in)), rng);
  if (bias) store.declare(prefix + ".b", out, 1);
}

}  // namespace her2flex::nn
