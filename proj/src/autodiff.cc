// src/autodiff.cc

#include "ft/autodiff.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ft {

void GradBuffer::accumulate(const Parameter* p, const Tensor& g) {
  auto it = grads_.find(p);
  if (it == grads_.end()) {
    grads_.emplace(p, g);
    return;
  }
  Tensor& acc = it->second;
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

void GradBuffer::flush_into(std::span<Parameter* const> params) const {
  for (Parameter* p : params) {
    auto it = grads_.find(p);
    if (it == grads_.end()) continue;
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += it->second[i];
  }
}

const Tensor* GradBuffer::find(const Parameter* p) const {
  auto it = grads_.find(p);
  return it == grads_.end() ? nullptr : &it->second;
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs,
                 BackwardFn backward) {
  check_finite(value, op);
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    if (v.tape() != this) {
      throw std::invalid_argument(std::string(op) +
                                  ": input recorded on a different tape");
    }
    n.inputs.push_back(v.id());
    n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

void Tape::run_backward(Var loss) {
  if (loss.tape() != this || loss.id() >= nodes_.size()) {
    throw std::invalid_argument("backward: loss was not recorded on this tape");
  }
  if (value(loss.id()).size() != 1) {
    throw DimensionError("backward: loss must be a scalar, got shape " +
                         shape_string(value(loss.id()).shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad(loss.id())[0] = 1.0;
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

void Tape::backward(Var loss) {
  run_backward(loss);
  for (Node& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    Tensor& g = n.param->grad;
    if (g.shape() != n.param->value.shape()) g = Tensor(n.param->value.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

void Tape::backward(Var loss, GradBuffer& out) {
  run_backward(loss);
  for (Node& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    out.accumulate(n.param, n.grad);
  }
}

// ---------------------------------------------------------------------------

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operation on an unbound Var");
  return *a.tape();
}

void accumulate(Tape& t, std::uint32_t id, const Tensor& g) {
  if (!t.needs_grad(id)) return;
  Tensor& dst = t.grad(id);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record(
      "matmul", matmul(a.value(), b.value()), {a, b},
      [](Tape& t, std::uint32_t self) {
        const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
        const Tensor& A = t.value(ia);
        const Tensor& B = t.value(ib);
        const Tensor& dC = t.grad(self);
        const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
        if (t.needs_grad(ia)) {
          // dA = dC * B^T
          Tensor& dA = t.grad(ia);
          for (std::size_t i = 0; i < m; ++i) {
            const double* dc = dC.data().data() + i * n;
            double* da = dA.data().data() + i * k;
            for (std::size_t p = 0; p < k; ++p) {
              const double* br = B.data().data() + p * n;
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += dc[j] * br[j];
              da[p] += s;
            }
          }
        }
        if (t.needs_grad(ib)) {
          // dB = A^T * dC
          Tensor& dB = t.grad(ib);
          for (std::size_t i = 0; i < m; ++i) {
            const double* dc = dC.data().data() + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double av = A.data()[i * k + p];
              if (av == 0.0) continue;
              double* db = dB.data().data() + p * n;
              for (std::size_t j = 0; j < n; ++j) db[j] += av * dc[j];
            }
          }
        }
      });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record("add", add(a.value(), b.value()), {a, b},
                  [](Tape& t, std::uint32_t self) {
                    const Tensor& g = t.grad(self);
                    accumulate(t, t.inputs(self)[0], g);
                    accumulate(t, t.inputs(self)[1], g);
                  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record("sub", sub(a.value(), b.value()), {a, b},
                  [](Tape& t, std::uint32_t self) {
                    const Tensor& g = t.grad(self);
                    accumulate(t, t.inputs(self)[0], g);
                    accumulate(t, t.inputs(self)[1], scale(g, -1.0));
                  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record("mul", mul(a.value(), b.value()), {a, b},
                  [](Tape& t, std::uint32_t self) {
                    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
                    const Tensor& g = t.grad(self);
                    if (t.needs_grad(ia)) accumulate(t, ia, mul(g, t.value(ib)));
                    if (t.needs_grad(ib)) accumulate(t, ib, mul(g, t.value(ia)));
                  });
}

Var add_bias(Var m, Var bias) {
  Tape& t = tape_of(m);
  return t.record("add_bias", add_bias(m.value(), bias.value()), {m, bias},
                  [](Tape& t, std::uint32_t self) {
                    const auto im = t.inputs(self)[0], ib = t.inputs(self)[1];
                    const Tensor& g = t.grad(self);
                    accumulate(t, im, g);
                    if (!t.needs_grad(ib)) return;
                    Tensor& db = t.grad(ib);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      auto gr = g.row(r);
                      for (std::size_t c = 0; c < gr.size(); ++c) db[c] += gr[c];
                    }
                  });
}

Var relu(Var x) {
  Tape& t = tape_of(x);
  return t.record("relu", relu(x.value()), {x},
                  [](Tape& t, std::uint32_t self) {
                    const auto ix = t.inputs(self)[0];
                    const Tensor& in = t.value(ix);
                    const Tensor& g = t.grad(self);
                    Tensor& dx = t.grad(ix);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      if (in[i] > 0.0) dx[i] += g[i];
                    }
                  });
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  return t.record("sigmoid", sigmoid(x.value()), {x},
                  [](Tape& t, std::uint32_t self) {
                    const Tensor& y = t.value(self);
                    const Tensor& g = t.grad(self);
                    Tensor& dx = t.grad(t.inputs(self)[0]);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      dx[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                  });
}

Var tanh(Var x) {
  Tape& t = tape_of(x);
  return t.record("tanh", tanh(x.value()), {x},
                  [](Tape& t, std::uint32_t self) {
                    const Tensor& y = t.value(self);
                    const Tensor& g = t.grad(self);
                    Tensor& dx = t.grad(t.inputs(self)[0]);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      dx[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                  });
}

Var log_softmax(Var x) {
  Tape& t = tape_of(x);
  return t.record("log_softmax", log_softmax(x.value()), {x},
                  [](Tape& t, std::uint32_t self) {
                    const Tensor& y = t.value(self);
                    const Tensor& g = t.grad(self);
                    Tensor& dx = t.grad(t.inputs(self)[0]);
                    const std::size_t cols = y.cols();
                    for (std::size_t r = 0; r < y.rows(); ++r) {
                      auto yr = y.row(r);
                      auto gr = g.row(r);
                      auto dr = dx.row(r);
                      double gsum = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) gsum += gr[c];
                      for (std::size_t c = 0; c < cols; ++c) {
                        dr[c] += gr[c] - std::exp(yr[c]) * gsum;
                      }
                    }
                  });
}

Var scale(Var x, double factor) {
  Tape& t = tape_of(x);
  return t.record("scale", scale(x.value(), factor), {x},
                  [factor](Tape& t, std::uint32_t self) {
                    accumulate(t, t.inputs(self)[0], scale(t.grad(self), factor));
                  });
}

Var pair_add(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record("pair_add", pair_add(a.value(), b.value()), {a, b},
                  [](Tape& t, std::uint32_t self) {
                    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
                    const std::size_t na = t.value(ia).rows();
                    const std::size_t nb = t.value(ib).rows();
                    const Tensor& g = t.grad(self);
                    const bool ga = t.needs_grad(ia), gb = t.needs_grad(ib);
                    for (std::size_t i = 0; i < na; ++i) {
                      for (std::size_t j = 0; j < nb; ++j) {
                        auto gr = g.row(i * nb + j);
                        if (ga) {
                          auto d = t.grad(ia).row(i);
                          for (std::size_t c = 0; c < gr.size(); ++c) d[c] += gr[c];
                        }
                        if (gb) {
                          auto d = t.grad(ib).row(j);
                          for (std::size_t c = 0; c < gr.size(); ++c) d[c] += gr[c];
                        }
                      }
                    }
                  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record("concat_cols", concat_cols(a.value(), b.value()), {a, b},
                  [](Tape& t, std::uint32_t self) {
                    const auto ia = t.inputs(self)[0], ib = t.inputs(self)[1];
                    const std::size_t p = t.value(ia).cols();
                    const Tensor& g = t.grad(self);
                    if (t.needs_grad(ia)) {
                      accumulate(t, ia, slice_cols(g, 0, p));
                    }
                    if (t.needs_grad(ib)) {
                      accumulate(t, ib, slice_cols(g, p, g.cols()));
                    }
                  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(x);
  return t.record("slice_cols", slice_cols(x.value(), begin, end), {x},
                  [begin](Tape& t, std::uint32_t self) {
                    const Tensor& g = t.grad(self);
                    Tensor& dx = t.grad(t.inputs(self)[0]);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      auto gr = g.row(r);
                      auto dr = dx.row(r);
                      for (std::size_t c = 0; c < gr.size(); ++c) {
                        dr[begin + c] += gr[c];
                      }
                    }
                  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  Tape& t = tape_of(table);
  std::vector<int> idx(ids.begin(), ids.end());
  return t.record("gather_rows", gather_rows(table.value(), ids), {table},
                  [idx = std::move(idx)](Tape& t, std::uint32_t self) {
                    const Tensor& g = t.grad(self);
                    Tensor& dt = t.grad(t.inputs(self)[0]);
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      auto gr = g.row(i);
                      auto dr = dt.row(static_cast<std::size_t>(idx[i]));
                      for (std::size_t c = 0; c < gr.size(); ++c) dr[c] += gr[c];
                    }
                  });
}

Var take_row(Var x, std::size_t r) {
  Tape& t = tape_of(x);
  return t.record("take_row", take_row(x.value(), r), {x},
                  [r](Tape& t, std::uint32_t self) {
                    auto gr = t.grad(self).row(0);
                    auto dr = t.grad(t.inputs(self)[0]).row(r);
                    for (std::size_t c = 0; c < gr.size(); ++c) dr[c] += gr[c];
                  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  Tape& t = tape_of(rows[0]);
  const std::size_t cols = rows[0].value().cols();
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& v = rows[i].value();
    if (v.size() != cols) {
      throw DimensionError("stack_rows: ragged rows " + shape_string(v.shape()));
    }
    std::copy(v.data().begin(), v.data().end(), out.row(i).begin());
  }
  return t.record("stack_rows", std::move(out),
                  std::vector<Var>(rows.begin(), rows.end()),
                  [](Tape& t, std::uint32_t self) {
                    const Tensor& g = t.grad(self);
                    const auto& in = t.inputs(self);
                    for (std::size_t i = 0; i < in.size(); ++i) {
                      if (!t.needs_grad(in[i])) continue;
                      auto gr = g.row(i);
                      Tensor& d = t.grad(in[i]);
                      for (std::size_t c = 0; c < gr.size(); ++c) d[c] += gr[c];
                    }
                  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return t.record("sum", Tensor::scalar(s), {x},
                  [](Tape& t, std::uint32_t self) {
                    const double g = t.grad(self)[0];
                    Tensor& dx = t.grad(t.inputs(self)[0]);
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g;
                  });
}

Var pick_sum(Var x,
             std::span<const std::pair<std::size_t, std::size_t>> cells) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  double s = 0.0;
  for (auto [r, c] : cells) {
    if (r >= v.rows() || c >= v.cols()) {
      throw DimensionError("pick_sum: cell outside " + shape_string(v.shape()));
    }
    s += v.at(r, c);
  }
  std::vector<std::pair<std::size_t, std::size_t>> picked(cells.begin(),
                                                          cells.end());
  return t.record("pick_sum", Tensor::scalar(s), {x},
                  [picked = std::move(picked)](Tape& t, std::uint32_t self) {
                    const double g = t.grad(self)[0];
                    Tensor& dx = t.grad(t.inputs(self)[0]);
                    for (auto [r, c] : picked) dx.at(r, c) += g;
                  });
}

}  // namespace ft
