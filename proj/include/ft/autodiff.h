// include/ft/autodiff.h
//
// Reverse-mode differentiation over Tensor-valued nodes. A Tape records the
// primitives executed during one forward pass; backward() replays them in
// reverse and accumulates gradients into the Parameters used as leaves.

#ifndef FT_AUTODIFF_H_
#define FT_AUTODIFF_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ft/tensor.h"

namespace ft {

struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }

  std::string name;
  Tensor value;
  Tensor grad;
};

// Per-pass gradient sink keyed by parameter. Lets several tapes run against
// one shared model and be reduced afterwards in a fixed order.
class GradBuffer {
 public:
  void accumulate(const Parameter* p, const Tensor& g);
  // Adds every buffered gradient into its parameter's grad field.
  void flush_into(std::span<Parameter* const> params) const;
  const Tensor* find(const Parameter* p) const;
  void clear() { grads_.clear(); }

 private:
  std::unordered_map<const Parameter*, Tensor> grads_;
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
 public:
  // Propagates the node's gradient to its inputs via Tape::grad().
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(Parameter& p);

  // Records a primitive. `backward` is skipped when no input needs a gradient.
  Var record(const char* op, Tensor value, std::vector<Var> inputs,
             BackwardFn backward);

  // Parameter leaves read the parameter's value in place.
  const Tensor& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.param != nullptr ? n.param->value : n.value;
  }
  const std::vector<std::uint32_t>& inputs(std::uint32_t id) const {
    return nodes_[id].inputs;
  }
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }

  // Gradient slot of a node, zero-initialised on first use.
  Tensor& grad(std::uint32_t id);

  // Accumulates d(loss)/d(param) into Parameter::grad for every parameter
  // leaf. Callers zero the grads beforehand.
  void backward(Var loss);
  // Same, but into `out` instead of the parameters.
  void backward(Var loss, GradBuffer& out);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  void run_backward(Var loss);

  std::vector<Node> nodes_;
};

// Differentiable primitives. All inputs must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_bias(Var m, Var bias);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var log_softmax(Var x);
Var scale(Var x, double factor);
Var pair_add(Var a, Var b);
Var concat_cols(Var a, Var b);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var gather_rows(Var table, std::span<const int> ids);
Var take_row(Var x, std::size_t r);
Var stack_rows(std::span<const Var> rows);
Var sum(Var x);
// Sum of x[r, c] over the listed (row, col) cells of the rank-2 view.
Var pick_sum(Var x, std::span<const std::pair<std::size_t, std::size_t>> cells);

}  // namespace ft

#endif  // FT_AUTODIFF_H_
