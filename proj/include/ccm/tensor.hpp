// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0
//
// N-dimensional tensors with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle onto a row-major value buffer. Operators
// (see ops.hpp) record a node into the calling thread's active Graph when a
// GradTape is open and at least one operand is tracked, i.e. it either
// requires a gradient or was itself produced by a recorded node. The graph
// is freed by backward() or when the tape goes out of scope.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
class Graph;

template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until a backward pass writes it
  bool requires_grad = false;
  // Set only for outputs of recorded operators.
  std::weak_ptr<Graph<T>> graph;
  std::ptrdiff_t node = -1;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  // Zero-filled.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }
  static Tensor full(Shape shape, T value);
  static Tensor from_data(std::shared_ptr<TensorData<T>> data);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data_->values.size(); }

  std::span<const T> values() const { return data_->values; }
  // Throws GraphError for tensors that are live nodes of a recording graph.
  std::span<T> mutable_values();
  T item() const;

  bool requires_grad() const { return data_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  // Empty when no gradient has been written.
  std::span<const T> grad() const { return data_->grad; }
  std::vector<T> grad_or_zeros() const;
  void zero_grad();

  // True when this tensor is the output of a node in a graph that is still alive.
  bool has_node() const;

  // Deep copy of the values, detached from any graph and not requiring grad.
  Tensor detach() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_->values.begin(), data_->values.end());
    return Tensor<U>(data_->shape, std::move(out));
  }

  const std::shared_ptr<TensorData<T>>& data() const { return data_; }

 private:
  std::shared_ptr<TensorData<T>> data_;
};

template <typename T>
class Graph {
 public:
  // grad_in[i] is null for operands that do not need a gradient.
  using Backward = std::function<void(std::span<const T> grad_out, std::span<std::vector<T>*> grad_in)>;

  struct Node {
    std::string_view op;
    std::vector<std::ptrdiff_t> inputs;  // node ids, -1 for untracked operands
    std::vector<std::shared_ptr<TensorData<T>>> operands;
    std::shared_ptr<TensorData<T>> output;
    Backward backward;
  };

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  bool consumed() const { return consumed_; }

  // Node id of a tracked operand, registering requires_grad leaves on first use.
  // Returns -1 for constants.
  std::ptrdiff_t operand_id(const std::shared_ptr<TensorData<T>>& data);

  std::ptrdiff_t add(std::string_view op, std::vector<std::ptrdiff_t> inputs,
                     std::vector<std::shared_ptr<TensorData<T>>> operands,
                     std::shared_ptr<TensorData<T>> output, Backward backward);

  void run_backward(std::ptrdiff_t root);
  void clear();

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const TensorData<T>*, std::ptrdiff_t> leaf_ids_;
  bool consumed_ = false;
};

// RAII recording context. Operators evaluated on this thread while a tape is
// open record into its graph. Tapes nest; the innermost one is active.
template <typename T>
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Graph<T>& graph() { return *graph_; }

 private:
  std::shared_ptr<Graph<T>> graph_;
  std::shared_ptr<Graph<T>> previous_;
};

// Suspends recording on this thread for its lifetime.
template <typename T>
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  std::shared_ptr<Graph<T>> previous_;
};

template <typename T>
std::shared_ptr<Graph<T>> active_graph();

// Writes d(loss)/d(leaf) into every requires_grad leaf of the loss's graph
// (leaves the loss does not depend on receive zeros), then frees the graph.
template <typename T>
void backward(const Tensor<T>& loss);

// Creates the output tensor of an operator, recording a node when the active
// graph tracks any operand.
template <typename T>
Tensor<T> make_result(std::string_view op, Shape shape, std::vector<T> values,
                      std::initializer_list<Tensor<T>> operands, typename Graph<T>::Backward backward);

}  // namespace ccm
