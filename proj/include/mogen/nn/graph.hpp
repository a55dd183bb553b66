#pragma once

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mogen/core/types.hpp"

namespace mogen::nn {

// A trainable tensor with Adam state. Owned by models; outlives any Graph.
template <class S>
struct Param {
  std::string name;
  MatX<S> value;
  MatX<S> grad;
  MatX<S> adam_m;
  MatX<S> adam_v;

  Param() = default;
  Param(std::string n, MatX<S> v) : name(std::move(n)), value(std::move(v)) {
    grad = MatX<S>::Zero(value.rows(), value.cols());
    adam_m = grad;
    adam_v = grad;
  }

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

template <class S>
struct Node {
  MatX<S> value;
  MatX<S> grad;  // allocated lazily during backward
  bool grad_ready = false;

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }

  MatX<S>& g() {
    if (!grad_ready) {
      grad = MatX<S>::Zero(value.rows(), value.cols());
      grad_ready = true;
    }
    return grad;
  }
};

// Define-by-run tape. Nodes live in a deque so references stay stable while
// the tape grows. One Graph per training step; clear() drops everything.
template <class S>
class Graph {
 public:
  Node<S>* make(MatX<S> value) {
    nodes_.emplace_back();
    nodes_.back().value = std::move(value);
    return &nodes_.back();
  }

  Node<S>* constant(const MatX<S>& value) { return make(value); }

  Node<S>* leaf(Param<S>& p) {
    Node<S>* n = make(p.value);
    leaves_.emplace_back(n, &p);
    return n;
  }

  void tape(std::function<void()> backward_fn) {
    tape_.push_back(std::move(backward_fn));
  }

  // Reverse pass from a 1x1 loss node. Accumulates into Param::grad.
  void backward(Node<S>* loss) {
    require(loss->value.size() == 1, "backward: loss must be scalar");
    loss->g()(0, 0) = S(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    for (auto& [node, param] : leaves_) {
      if (node->grad_ready) param->grad += node->grad;
    }
  }

  void clear() {
    nodes_.clear();
    tape_.clear();
    leaves_.clear();
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::deque<Node<S>> nodes_;
  std::vector<std::function<void()>> tape_;
  std::vector<std::pair<Node<S>*, Param<S>*>> leaves_;
};

}  // namespace mogen::nn
