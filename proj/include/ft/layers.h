// include/ft/layers.h
//
// Parameterised building blocks. Each block has a tape path used for training
// and a plain Tensor path used for inference; both run the same kernels in the
// same order, so their outputs agree bit for bit.

#ifndef FT_LAYERS_H_
#define FT_LAYERS_H_

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ft/autodiff.h"
#include "ft/rng.h"
#include "ft/tensor.h"

namespace ft {

// Affine map y = x * W + b, W stored as [in x out].
struct Linear {
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  struct Bound {
    Var weight, bias;
  };
  Bound bind(Tape& tape);

  Tensor forward(const Tensor& x) const;
  static Var forward(const Bound& b, Var x);

  std::size_t in_dim() const { return weight.value.dim(0); }
  std::size_t out_dim() const { return weight.value.dim(1); }
  void collect(std::vector<Parameter*>& out);

  Parameter weight;
  Parameter bias;
};

struct Embedding {
  Embedding() = default;
  Embedding(const std::string& name, std::size_t count, std::size_t dim,
            Rng& rng);

  Tensor lookup(std::span<const int> ids) const;
  Var lookup(Tape& tape, std::span<const int> ids);

  std::size_t count() const { return table.value.dim(0); }
  std::size_t dim() const { return table.value.dim(1); }
  void collect(std::vector<Parameter*>& out) { out.push_back(&table); }

  Parameter table;
};

// Gated recurrent cell with one update gate and a candidate state:
//   z  = sigmoid(x Wxz + h Whz + bz)
//   c  = tanh(x Wxc + h Whc + bc)
//   h' = h + z * (c - h)
// The gate and candidate weights are packed side by side: columns [0, H) hold
// the gate, [H, 2H) the candidate.
struct GruCell {
  GruCell() = default;
  GruCell(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  struct Bound {
    Var w_x, w_h, bias;
  };
  Bound bind(Tape& tape);

  std::size_t input_dim() const { return w_x.value.dim(0); }
  std::size_t hidden_dim() const { return w_h.value.dim(0); }

  Tensor zero_state() const { return Tensor({1, hidden_dim()}); }

  // One step from precomputed input activations xw = x Wx + b, both [1 x 2H].
  Tensor step_from_projection(const Tensor& xw, const Tensor& h) const;
  // One step on a single input row x [1 x in].
  Tensor step(const Tensor& x, const Tensor& h) const;
  // Runs the whole sequence [T x in] from the zero state, returns [T x H].
  Tensor run(const Tensor& inputs) const;
  Var run(Tape& tape, const Bound& b, Var inputs) const;

  void collect(std::vector<Parameter*>& out);

  Parameter w_x;
  Parameter w_h;
  Parameter bias;
};

// (output, next state) of a single recurrent step. The cell carries one state
// vector, so both halves are the same tensor.
std::pair<Tensor, Tensor> recurrent_step(const GruCell& cell, const Tensor& x,
                                         const Tensor& state);

}  // namespace ft

#endif  // FT_LAYERS_H_
