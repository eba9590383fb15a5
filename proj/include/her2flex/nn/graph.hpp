#pragma once

#include "her2flex/nn/params.hpp"
#include "her2flex/tensor.hpp"

#include <functional>
#include <map>
#include <utility>
#include <vector>

namespace her2flex::nn {

// Dynamic reverse-mode tape over channel-major feature maps. A graph is
// built once per batch, backward() is called once, then the graph is
// discarded. Nodes are created in topological order, so the reverse sweep
// visits children before parents.
template <typename Scalar>
class Graph {
 public:
  struct Node {
    Matrix<Scalar> value;
    Matrix<Scalar> grad;
    int height = 1;
    int width = 1;
    bool needs_grad = false;
    bool grad_live = false;
    std::function<void(Graph&, int)> backward;  // (graph, own node id)
    ParamStore<Scalar>* store = nullptr;  // set on parameter leaves
    std::string param_name;
  };

  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  int input(const FeatureMap<Scalar>& fm) { return input(fm.data, fm.height, fm.width); }

  int input(Matrix<Scalar> value, int height = 1, int width = 1) {
    Node n;
    n.value = std::move(value);
    n.height = height;
    n.width = width;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int scalar(Scalar v) {
    Matrix<Scalar> m(1, 1);
    m(0, 0) = v;
    return input(std::move(m));
  }

  // Trainable leaf. Repeated lookups of the same (store, name) return the
  // same node, so shared weights accumulate gradients through fan-out.
  int param(ParamStore<Scalar>& store, const std::string& name) {
    auto key = std::make_pair(static_cast<void*>(&store), name);
    auto it = param_ids_.find(key);
    if (it != param_ids_.end()) return it->second;
    Node n;
    n.value = store.at(name).value;
    n.needs_grad = recording_;
    n.store = &store;
    n.param_name = name;
    nodes_.push_back(std::move(n));
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_ids_.emplace(std::move(key), id);
    return id;
  }

  // Parameter value used as a constant; gradients flow through it to other
  // inputs but are not accumulated into the store (e.g. the frozen
  // discriminator during a generator step).
  int frozen(const ParamStore<Scalar>& store, const std::string& name) {
    return input(store.at(name).value);
  }

  template <typename BackFn>
  int make(Matrix<Scalar> value, int height, int width, std::initializer_list<int> parents,
           BackFn&& back) {
    return make_impl(std::move(value), height, width, parents.begin(), parents.end(),
                     std::forward<BackFn>(back));
  }

  template <typename BackFn>
  int make(Matrix<Scalar> value, int height, int width, const std::vector<int>& parents,
           BackFn&& back) {
    return make_impl(std::move(value), height, width, parents.begin(), parents.end(),
                     std::forward<BackFn>(back));
  }

  bool needs(int id) const { return nodes_[id].needs_grad; }

  const Matrix<Scalar>& value(int id) const { return nodes_[id].value; }
  const Matrix<Scalar>& grad(int id) const { return nodes_[id].grad; }
  bool grad_live(int id) const { return nodes_[id].grad_live; }
  int height(int id) const { return nodes_[id].height; }
  int width(int id) const { return nodes_[id].width; }

  FeatureMap<Scalar> feature(int id) const {
    FeatureMap<Scalar> fm;
    fm.data = nodes_[id].value;
    fm.height = nodes_[id].height;
    fm.width = nodes_[id].width;
    return fm;
  }

  Scalar scalar_value(int id) const {
    require(nodes_[id].value.size() == 1, Errc::shape_mismatch, "node is not a scalar");
    return nodes_[id].value(0, 0);
  }

  // Adds into a node's gradient; no-op for nodes outside the grad path.
  void accumulate(int id, const Matrix<Scalar>& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (!n.grad_live) {
      n.grad = g;
      n.grad_live = true;
    } else {
      n.grad += g;
    }
  }

  // Reverse sweep from a scalar loss; parameter gradients are added into
  // their stores (callers zero store grads between steps).
  void backward(int loss) {
    require(recording_, Errc::shape_mismatch, "backward on a non-recording graph");
    require(nodes_[loss].value.size() == 1, Errc::shape_mismatch, "loss must be scalar");
    Matrix<Scalar> one(1, 1);
    one(0, 0) = Scalar(1);
    accumulate(loss, one);
    for (int i = loss; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad_live && n.backward) n.backward(*this, i);
    }
    for (auto& [key, id] : param_ids_) {
      Node& n = nodes_[id];
      if (n.grad_live) n.store->at(n.param_name).grad += n.grad;
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  template <typename It, typename BackFn>
  int make_impl(Matrix<Scalar> value, int height, int width, It first, It last, BackFn&& back) {
    Node n;
    n.value = std::move(value);
    n.height = height;
    n.width = width;
    for (It it = first; it != last; ++it) n.needs_grad = n.needs_grad || nodes_[*it].needs_grad;
    if (recording_ && n.needs_grad) n.backward = std::forward<BackFn>(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  std::map<std::pair<void*, std::string>, int> param_ids_;
  bool recording_;
};

}  // namespace her2flex::nn
