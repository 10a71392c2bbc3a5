// src/layers.cc

#include "ft/layers.h"

namespace ft {

namespace {

constexpr double kInitRange = 0.1;

Tensor uniform_init(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-kInitRange, kInitRange);
  return t;
}

}  // namespace

Linear::Linear(const std::string& name, std::size_t in, std::size_t out,
               Rng& rng)
    : weight(name + ".weight", uniform_init({in, out}, rng)),
      bias(name + ".bias", uniform_init({out}, rng)) {}

Linear::Bound Linear::bind(Tape& tape) {
  return {tape.param(weight), tape.param(bias)};
}

Tensor Linear::forward(const Tensor& x) const {
  return add_bias(matmul(x, weight.value), bias.value);
}

Var Linear::forward(const Bound& b, Var x) {
  return add_bias(matmul(x, b.weight), b.bias);
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Embedding::Embedding(const std::string& name, std::size_t count,
                     std::size_t dim, Rng& rng)
    : table(name + ".table", uniform_init({count, dim}, rng)) {}

Tensor Embedding::lookup(std::span<const int> ids) const {
  return gather_rows(table.value, ids);
}

Var Embedding::lookup(Tape& tape, std::span<const int> ids) {
  return gather_rows(tape.param(table), ids);
}

GruCell::GruCell(const std::string& name, std::size_t in, std::size_t hidden,
                 Rng& rng)
    : w_x(name + ".w_x", uniform_init({in, 2 * hidden}, rng)),
      w_h(name + ".w_h", uniform_init({hidden, 2 * hidden}, rng)),
      bias(name + ".bias", uniform_init({2 * hidden}, rng)) {}

GruCell::Bound GruCell::bind(Tape& tape) {
  return {tape.param(w_x), tape.param(w_h), tape.param(bias)};
}

Tensor GruCell::step_from_projection(const Tensor& xw, const Tensor& h) const {
  if (h.size() != hidden_dim()) {
    throw DimensionError("recurrent state of shape " + shape_string(h.shape()) +
                         " for hidden size " + std::to_string(hidden_dim()));
  }
  const std::size_t H = hidden_dim();
  const Tensor a = add(xw, matmul(h, w_h.value));
  const Tensor z = sigmoid(slice_cols(a, 0, H));
  const Tensor c = tanh(slice_cols(a, H, 2 * H));
  return add(h, mul(z, sub(c, h)));
}

Tensor GruCell::step(const Tensor& x, const Tensor& h) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("recurrent input of shape " + shape_string(x.shape()) +
                         " for input size " + std::to_string(input_dim()));
  }
  return step_from_projection(add_bias(matmul(x, w_x.value), bias.value), h);
}

Tensor GruCell::run(const Tensor& inputs) const {
  if (inputs.rank() != 2 || inputs.cols() != input_dim()) {
    throw DimensionError("recurrent inputs of shape " +
                         shape_string(inputs.shape()) + " for input size " +
                         std::to_string(input_dim()));
  }
  const Tensor xw = add_bias(matmul(inputs, w_x.value), bias.value);
  const std::size_t T = inputs.rows(), H = hidden_dim();
  Tensor out({T, H});
  Tensor h = zero_state();
  for (std::size_t t = 0; t < T; ++t) {
    h = step_from_projection(take_row(xw, t), h);
    std::copy(h.data().begin(), h.data().end(), out.row(t).begin());
  }
  return out;
}

Var GruCell::run(Tape& tape, const Bound& b, Var inputs) const {
  if (inputs.value().rank() != 2 || inputs.value().cols() != input_dim()) {
    throw DimensionError("recurrent inputs of shape " +
                         shape_string(inputs.value().shape()) +
                         " for input size " + std::to_string(input_dim()));
  }
  const std::size_t T = inputs.value().rows(), H = hidden_dim();
  const Var xw = add_bias(matmul(inputs, b.w_x), b.bias);
  Var h = tape.constant(zero_state());
  std::vector<Var> outputs;
  outputs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Var a = add(take_row(xw, t), matmul(h, b.w_h));
    const Var z = sigmoid(slice_cols(a, 0, H));
    const Var c = tanh(slice_cols(a, H, 2 * H));
    h = add(h, mul(z, sub(c, h)));
    outputs.push_back(h);
  }
  return stack_rows(outputs);
}

void GruCell::collect(std::vector<Parameter*>& out) {
  out.push_back(&w_x);
  out.push_back(&w_h);
  out.push_back(&bias);
}

std::pair<Tensor, Tensor> recurrent_step(const GruCell& cell, const Tensor& x,
                                         const Tensor& state) {
  Tensor h = cell.step(x, state);
  return {h, h};
}

}  // namespace ft
