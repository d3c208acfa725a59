// Copyright 2026 The CCM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ccm/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace ccm {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

template <typename T>
void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor: rank must be at least 1");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor: extents must be positive, got " + shape_str(shape));
  }
}

template <typename T>
std::shared_ptr<Graph<T>>& active_slot() {
  thread_local std::shared_ptr<Graph<T>> slot;
  return slot;
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape) : data_(std::make_shared<TensorData<T>>()) {
  check_shape<T>(shape);
  data_->values.assign(shape_numel(shape), T(0));
  data_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : data_(std::make_shared<TensorData<T>>()) {
  check_shape<T>(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  data_->shape = std::move(shape);
  data_->values = std::move(values);
  data_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  Tensor t(std::move(shape));
  std::fill(t.data_->values.begin(), t.data_->values.end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from_data(std::shared_ptr<TensorData<T>> data) {
  Tensor t;
  t.data_ = std::move(data);
  return t;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape()));
  }
  return data_->shape[axis];
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
  if (has_node()) throw GraphError("tensor: cannot mutate a tensor recorded in a live graph");
  return data_->values;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("tensor: item() needs a single element, shape is " + shape_str(shape()));
  return data_->values[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  data_->requires_grad = on;
  return *this;
}

template <typename T>
std::vector<T> Tensor<T>::grad_or_zeros() const {
  if (data_->grad.empty()) return std::vector<T>(numel(), T(0));
  return data_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  data_->grad.assign(numel(), T(0));
}

template <typename T>
bool Tensor<T>::has_node() const {
  return data_ && data_->node >= 0 && !data_->graph.expired();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(data_->shape, data_->values);
}

template <typename T>
std::ptrdiff_t Graph<T>::operand_id(const std::shared_ptr<TensorData<T>>& data) {
  if (data->node >= 0) {
    auto owner = data->graph.lock();
    if (owner.get() == this) return data->node;
    if (owner) throw GraphError("graph: operand belongs to a different live recording context");
    // Output of a freed graph: treated as a constant.
  }
  if (!data->requires_grad) return -1;
  auto it = leaf_ids_.find(data.get());
  if (it != leaf_ids_.end()) return it->second;
  auto id = static_cast<std::ptrdiff_t>(nodes_.size());
  nodes_.push_back(Node{"leaf", {}, {}, data, nullptr});
  leaf_ids_.emplace(data.get(), id);
  return id;
}

template <typename T>
std::ptrdiff_t Graph<T>::add(std::string_view op, std::vector<std::ptrdiff_t> inputs,
                             std::vector<std::shared_ptr<TensorData<T>>> operands,
                             std::shared_ptr<TensorData<T>> output, Backward backward) {
  if (consumed_) throw GraphError("graph: recording into a consumed graph");
  auto id = static_cast<std::ptrdiff_t>(nodes_.size());
  for (auto in : inputs) {
    if (in >= id) throw GraphError("graph: node inputs must precede their consumer");
  }
  nodes_.push_back(Node{op, std::move(inputs), std::move(operands), std::move(output), std::move(backward)});
  return id;
}

template <typename T>
void Graph<T>::run_backward(std::ptrdiff_t root) {
  if (consumed_) throw GraphError("backward: graph already consumed by a previous backward pass");
  if (root < 0 || root >= static_cast<std::ptrdiff_t>(nodes_.size())) {
    throw GraphError("backward: loss is not a node of this graph");
  }
  for (const auto& [ptr, id] : leaf_ids_) {
    auto& leaf = *nodes_[static_cast<std::size_t>(id)].output;
    leaf.grad.assign(leaf.values.size(), T(0));
  }
  auto& root_out = *nodes_[static_cast<std::size_t>(root)].output;
  root_out.grad.assign(root_out.values.size(), T(1));

  std::vector<std::vector<T>*> grad_in;
  for (auto id = root; id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.backward) continue;  // leaf
    auto& out = *node.output;
    if (out.grad.empty()) continue;  // loss does not depend on this node
    grad_in.assign(node.operands.size(), nullptr);
    for (std::size_t i = 0; i < node.operands.size(); ++i) {
      if (node.inputs[i] < 0) continue;
      auto& g = node.operands[i]->grad;
      if (g.size() != node.operands[i]->values.size()) g.assign(node.operands[i]->values.size(), T(0));
      grad_in[i] = &g;
    }
    node.backward(out.grad, grad_in);
    if (id != root) std::vector<T>().swap(out.grad);
  }
  consumed_ = true;
  clear();
}

template <typename T>
void Graph<T>::clear() {
  nodes_.clear();
  leaf_ids_.clear();
}

template <typename T>
std::shared_ptr<Graph<T>> active_graph() {
  return active_slot<T>();
}

template <typename T>
GradTape<T>::GradTape() : graph_(std::make_shared<Graph<T>>()), previous_(active_slot<T>()) {
  active_slot<T>() = graph_;
}

template <typename T>
GradTape<T>::~GradTape() {
  active_slot<T>() = previous_;
  graph_->clear();
}

template <typename T>
NoGradGuard<T>::NoGradGuard() : previous_(active_slot<T>()) {
  active_slot<T>() = nullptr;
}

template <typename T>
NoGradGuard<T>::~NoGradGuard() {
  active_slot<T>() = previous_;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined()) throw GraphError("backward: undefined loss tensor");
  if (loss.numel() != 1) throw ShapeError("backward: loss must be a scalar, shape is " + shape_str(loss.shape()));
  const auto& data = loss.data();
  auto graph = data->graph.lock();
  if (data->node < 0 || !graph) {
    throw GraphError("backward: loss was not produced inside a live recording context");
  }
  graph->run_backward(data->node);
}

template <typename T>
Tensor<T> make_result(std::string_view op, Shape shape, std::vector<T> values,
                      std::initializer_list<Tensor<T>> operands, typename Graph<T>::Backward backward) {
  Tensor<T> out(std::move(shape), std::move(values));
  auto graph = active_slot<T>();
  if (!graph) return out;
  std::vector<std::ptrdiff_t> inputs;
  std::vector<std::shared_ptr<TensorData<T>>> datas;
  bool tracked = false;
  inputs.reserve(operands.size());
  for (const auto& t : operands) {
    auto id = t.defined() ? graph->operand_id(t.data()) : -1;
    tracked = tracked || id >= 0;
    inputs.push_back(id);
    datas.push_back(t.data());
  }
  if (!tracked) return out;
  const auto& od = out.data();
  od->node = graph->add(op, std::move(inputs), std::move(datas), od, std::move(backward));
  od->graph = graph;
  return out;
}

#define CCM_INSTANTIATE(T)                                                                                  \
  template class Tensor<T>;                                                                                 \
  template class Graph<T>;                                                                                  \
  template class GradTape<T>;                                                                               \
  template class NoGradGuard<T>;                                                                            \
  template std::shared_ptr<Graph<T>> active_graph<T>();                                                     \
  template void backward<T>(const Tensor<T>&);                                                              \
  template Tensor<T> make_result<T>(std::string_view, Shape, std::vector<T>, std::initializer_list<Tensor<T>>, \
                                    typename Graph<T>::Backward);

CCM_INSTANTIATE(float)
CCM_INSTANTIATE(double)

}  // namespace ccm
