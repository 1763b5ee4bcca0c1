#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "iccn/errors.hpp"
#include "iccn/linalg.hpp"
#include "iccn/tensor.hpp"

// Minimal define-by-run reverse-mode automatic differentiation. A graph is
// built per minibatch and discarded after the backward pass; children own
// their parents via shared_ptr, so there are no reference cycles.
namespace iccn::ad {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;  // null for leaves and constants
  const char* op = "leaf";
  bool requires_grad = true;

  Tensor& grad_ref() {
    if (grad.numel() == 0) grad = Tensor(value.shape());
    return grad;
  }
};

namespace detail {

inline Var make(Tensor value, const char* op, std::vector<Var> parents,
                std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  node->requires_grad = false;
  for (const auto& p : parents) {
    if (p->requires_grad) node->requires_grad = true;
  }
  node->parents = std::move(parents);
  if (node->requires_grad) node->backward_fn = std::move(backward);
  return node;
}

inline void accumulate(const Var& target, const Tensor& g) {
  if (!target->requires_grad) return;
  target->grad_ref() += g;
}

}  // namespace detail

/// Trainable leaf.
inline Var leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "leaf";
  return node;
}

/// Non-trainable input (no gradient flows into it).
inline Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "const";
  node->requires_grad = false;
  return node;
}

/// Post-order over the subgraph that requires gradients.
inline std::vector<Node*> topo_order(const Var& root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (!root->requires_grad) return order;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

/// Reverse-mode sweep from a scalar root. Gradients accumulate into
/// Node::grad; leaves keep theirs until the graph is dropped.
inline void backward(const Var& root) {
  if (root->value.numel() != 1) {
    throw ContractViolation("backward: root must be scalar, got shape " +
                            shape_str(root->value.shape()));
  }
  root->grad_ref()[0] += 1.0;
  std::vector<Node*> order = topo_order(root);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.numel() != 0) {
      node->backward_fn(*node);
    }
  }
}

/// True when some node in the graph under root carries the given op tag.
inline bool graph_contains_op(const Var& root, const char* op) {
  std::vector<Node*> stack{root.get()};
  std::unordered_set<Node*> seen{root.get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (std::string_view(n->op) == op) return true;
    for (const auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  return detail::make(a->value + b->value, "add", {a, b}, [](Node& self) {
    detail::accumulate(self.parents[0], self.grad);
    detail::accumulate(self.parents[1], self.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::make(a->value - b->value, "sub", {a, b}, [](Node& self) {
    detail::accumulate(self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor neg = self.grad;
      neg *= -1.0;
      detail::accumulate(self.parents[1], neg);
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  return detail::make(hadamard(a->value, b->value), "mul", {a, b},
                      [](Node& self) {
                        detail::accumulate(self.parents[0],
                                           hadamard(self.grad,
                                                    self.parents[1]->value));
                        detail::accumulate(self.parents[1],
                                           hadamard(self.grad,
                                                    self.parents[0]->value));
                      });
}

inline Var scale(const Var& a, double c) {
  return detail::make(a->value * c, "scale", {a}, [c](Node& self) {
    detail::accumulate(self.parents[0], self.grad * c);
  });
}

inline Var relu(const Var& a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(out[i], 0.0);
  return detail::make(std::move(out), "relu", {a}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (x[i] <= 0.0) g[i] = 0.0;
    detail::accumulate(self.parents[0], g);
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return detail::make(std::move(out), "sigmoid", {a}, [](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double s = self.value[i];
      g[i] *= s * (1.0 - s);
    }
    detail::accumulate(self.parents[0], g);
  });
}

inline Var tanh_op(const Var& a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return detail::make(std::move(out), "tanh", {a}, [](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double t = self.value[i];
      g[i] *= 1.0 - t * t;
    }
    detail::accumulate(self.parents[0], g);
  });
}

inline Var abs_op(const Var& a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
  return detail::make(std::move(out), "abs", {a}, [](Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      g[i] *= (x[i] > 0.0) ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
    }
    detail::accumulate(self.parents[0], g);
  });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

inline Var reshape(const Var& a, Shape shape) {
  Shape original = a->value.shape();
  return detail::make(a->value.reshaped(std::move(shape)), "reshape", {a},
                      [original](Node& self) {
                        detail::accumulate(self.parents[0],
                                           self.grad.reshaped(original));
                      });
}

inline Var flatten(const Var& a) { return reshape(a, {a->value.numel()}); }

inline Var slice1d(const Var& a, std::size_t begin, std::size_t len) {
  if (a->value.rank() != 1 || begin + len > a->value.numel()) {
    throw ContractViolation("slice1d: range out of bounds");
  }
  Tensor out({len});
  for (std::size_t i = 0; i < len; ++i) out[i] = a->value[begin + i];
  return detail::make(std::move(out), "slice", {a}, [begin, len](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor& g = self.parents[0]->grad_ref();
    for (std::size_t i = 0; i < len; ++i) g[begin + i] += self.grad[i];
  });
}

/// Column t of a (rows x cols) matrix as a vector.
inline Var column(const Var& a, std::size_t t) {
  const Tensor& av = a->value;
  if (av.rank() != 2 || t >= av.cols()) {
    throw ContractViolation("column: index out of range");
  }
  const std::size_t rows = av.rows();
  Tensor out({rows});
  for (std::size_t i = 0; i < rows; ++i) out[i] = av(i, t);
  return detail::make(std::move(out), "column", {a}, [t, rows](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor& g = self.parents[0]->grad_ref();
    const std::size_t cols = self.parents[0]->value.cols();
    for (std::size_t i = 0; i < rows; ++i) g[i * cols + t] += self.grad[i];
  });
}

inline Var concat1d(const std::vector<Var>& parts) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p->value.numel();
  Tensor out({total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) out[off + i] = p->value[i];
    off += p->value.numel();
  }
  return detail::make(std::move(out), "concat", parts, [](Node& self) {
    std::size_t off = 0;
    for (auto& parent : self.parents) {
      const std::size_t n = parent->value.numel();
      if (parent->requires_grad) {
        Tensor& g = parent->grad_ref();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

/// Stack equal-length vectors as the rows of an m x d matrix.
inline Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ContractViolation("stack_rows: no rows");
  const std::size_t d = rows[0]->value.numel();
  Tensor out({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r]->value.numel() != d) {
      throw ContractViolation("stack_rows: row width mismatch");
    }
    for (std::size_t j = 0; j < d; ++j) out(r, j) = rows[r]->value[j];
  }
  return detail::make(std::move(out), "stack_rows", rows, [d](Node& self) {
    for (std::size_t r = 0; r < self.parents.size(); ++r) {
      auto& parent = self.parents[r];
      if (!parent->requires_grad) continue;
      Tensor& g = parent->grad_ref();
      for (std::size_t j = 0; j < d; ++j) g[j] += self.grad(r, j);
    }
  });
}

// ---------------------------------------------------------------------------
// linear-algebra ops
// ---------------------------------------------------------------------------

/// W (m x n) times x (n) -> (m).
inline Var matvec(const Var& w, const Var& x) {
  const Tensor& wv = w->value;
  const Tensor& xv = x->value;
  if (wv.rank() != 2 || xv.rank() != 1 || wv.cols() != xv.numel()) {
    throw ContractViolation("matvec: incompatible shapes " +
                            shape_str(wv.shape()) + " x " +
                            shape_str(xv.shape()));
  }
  const std::size_t m = wv.rows(), n = wv.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += wv(i, j) * xv[j];
    out[i] = s;
  }
  return detail::make(std::move(out), "matvec", {w, x}, [m, n](Node& self) {
    const Tensor& wv = self.parents[0]->value;
    const Tensor& xv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& gw = self.parents[0]->grad_ref();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gw(i, j) += self.grad[i] * xv[j];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& gx = self.parents[1]->grad_ref();
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += self.grad[i] * wv(i, j);
        gx[j] += s;
      }
    }
  });
}

/// A (m x k) times B (k x n) -> (m x n).
inline Var matmul(const Var& a, const Var& b) {
  Tensor out = iccn::matmul(a->value, b->value);
  return detail::make(std::move(out), "matmul", {a, b}, [](Node& self) {
    Eigen::MatrixXd g = to_eigen(self.grad);
    if (self.parents[0]->requires_grad) {
      Eigen::MatrixXd ga = g * to_eigen(self.parents[1]->value).transpose();
      self.parents[0]->grad_ref() += from_eigen(ga);
    }
    if (self.parents[1]->requires_grad) {
      Eigen::MatrixXd gb = to_eigen(self.parents[0]->value).transpose() * g;
      self.parents[1]->grad_ref() += from_eigen(gb);
    }
  });
}

/// X (m x in) times W^T (W stored out x in) -> (m x out). The batched form
/// of a dense layer.
inline Var matmul_nt(const Var& x, const Var& w) {
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  if (xv.rank() != 2 || wv.rank() != 2 || xv.cols() != wv.cols()) {
    throw ContractViolation("matmul_nt: incompatible shapes " +
                            shape_str(xv.shape()) + " x " +
                            shape_str(wv.shape()) + "^T");
  }
  Tensor out = from_eigen(to_eigen(xv) * to_eigen(wv).transpose());
  return detail::make(std::move(out), "matmul_nt", {x, w}, [](Node& self) {
    Eigen::MatrixXd g = to_eigen(self.grad);
    if (self.parents[0]->requires_grad) {
      self.parents[0]->grad_ref() +=
          from_eigen(g * to_eigen(self.parents[1]->value));
    }
    if (self.parents[1]->requires_grad) {
      self.parents[1]->grad_ref() +=
          from_eigen(g.transpose() * to_eigen(self.parents[0]->value));
    }
  });
}

/// Broadcast-add a row vector b (n) to every row of X (m x n).
inline Var add_rowvec(const Var& x, const Var& b) {
  const Tensor& xv = x->value;
  const Tensor& bv = b->value;
  if (xv.rank() != 2 || bv.rank() != 1 || xv.cols() != bv.numel()) {
    throw ContractViolation("add_rowvec: incompatible shapes");
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) out(i, j) += bv[j];
  return detail::make(std::move(out), "add_rowvec", {x, b}, [](Node& self) {
    detail::accumulate(self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor& gb = self.parents[1]->grad_ref();
      const std::size_t m = self.grad.rows(), n = self.grad.cols();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += self.grad(i, j);
    }
  });
}

/// Outer product u (m) x v (n) -> (m x n).
inline Var outer(const Var& u, const Var& v) {
  const Tensor& uv = u->value;
  const Tensor& vv = v->value;
  if (uv.rank() != 1 || vv.rank() != 1) {
    throw ContractViolation("outer: expects two vectors");
  }
  const std::size_t m = uv.numel(), n = vv.numel();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = uv[i] * vv[j];
  return detail::make(std::move(out), "outer", {u, v}, [m, n](Node& self) {
    const Tensor& uv = self.parents[0]->value;
    const Tensor& vv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& gu = self.parents[0]->grad_ref();
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += self.grad(i, j) * vv[j];
        gu[i] += s;
      }
    }
    if (self.parents[1]->requires_grad) {
      Tensor& gv = self.parents[1]->grad_ref();
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += self.grad(i, j) * uv[i];
        gv[j] += s;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline Var sum_all(const Var& a) {
  return detail::make(Tensor::scalar(a->value.sum()), "sum", {a},
                      [](Node& self) {
                        if (!self.parents[0]->requires_grad) return;
                        Tensor& g = self.parents[0]->grad_ref();
                        const double s = self.grad[0];
                        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s;
                      });
}

inline Var mean_all(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->value.numel());
  return detail::make(Tensor::scalar(a->value.sum() * inv), "mean", {a},
                      [inv](Node& self) {
                        if (!self.parents[0]->requires_grad) return;
                        Tensor& g = self.parents[0]->grad_ref();
                        const double s = self.grad[0] * inv;
                        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s;
                      });
}

// ---------------------------------------------------------------------------
// convolution / pooling
// ---------------------------------------------------------------------------

/// Valid 1D convolution. x: (Cin x L), w: (Cout x Cin x k), b: (Cout).
/// Output (Cout x L-k+1).
inline Var conv1d(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  if (xv.rank() != 2 || wv.rank() != 3 || xv.dim(0) != wv.dim(1)) {
    throw ContractViolation("conv1d: incompatible shapes " +
                            shape_str(xv.shape()) + " and kernel " +
                            shape_str(wv.shape()));
  }
  const std::size_t cin = xv.dim(0), len = xv.dim(1);
  const std::size_t cout = wv.dim(0), k = wv.dim(2);
  if (len < k) {
    throw DegenerateInputError("conv1d: sequence length " +
                               std::to_string(len) + " shorter than kernel " +
                               std::to_string(k));
  }
  const std::size_t lout = len - k + 1;
  Tensor out({cout, lout});
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t t = 0; t < lout; ++t) {
      double s = b->value[o];
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t j = 0; j < k; ++j) s += wv(o, c, j) * xv(c, t + j);
      out(o, t) = s;
    }
  }
  return detail::make(
      std::move(out), "conv1d", {x, w, b},
      [cin, cout, k, lout](Node& self) {
        const Tensor& xv = self.parents[0]->value;
        const Tensor& wv = self.parents[1]->value;
        const Tensor& g = self.grad;
        if (self.parents[0]->requires_grad) {
          Tensor& gx = self.parents[0]->grad_ref();
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t t = 0; t < lout; ++t)
              for (std::size_t c = 0; c < cin; ++c)
                for (std::size_t j = 0; j < k; ++j)
                  gx(c, t + j) += g(o, t) * wv(o, c, j);
        }
        if (self.parents[1]->requires_grad) {
          Tensor& gw = self.parents[1]->grad_ref();
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t t = 0; t < lout; ++t)
              for (std::size_t c = 0; c < cin; ++c)
                for (std::size_t j = 0; j < k; ++j)
                  gw(o, c, j) += g(o, t) * xv(c, t + j);
        }
        if (self.parents[2]->requires_grad) {
          Tensor& gb = self.parents[2]->grad_ref();
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t t = 0; t < lout; ++t) gb[o] += g(o, t);
        }
      });
}

/// Valid 2D convolution. x: (Cin x H x W), w: (Cout x Cin x kh x kw),
/// b: (Cout). Output (Cout x H-kh+1 x W-kw+1).
inline Var conv2d(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  if (xv.rank() != 3 || wv.rank() != 4 || xv.dim(0) != wv.dim(1)) {
    throw ContractViolation("conv2d: incompatible shapes " +
                            shape_str(xv.shape()) + " and kernel " +
                            shape_str(wv.shape()));
  }
  const std::size_t cin = xv.dim(0), h = xv.dim(1), w_in = xv.dim(2);
  const std::size_t cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  if (h < kh || w_in < kw) {
    throw DegenerateInputError("conv2d: input " + shape_str(xv.shape()) +
                               " smaller than kernel " +
                               shape_str(wv.shape()));
  }
  const std::size_t ho = h - kh + 1, wo = w_in - kw + 1;
  Tensor out({cout, ho, wo});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) {
        double s = b->value[o];
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t bb = 0; bb < kw; ++bb)
              s += wv.at4(o, c, a, bb) * xv(c, i + a, j + bb);
        out(o, i, j) = s;
      }
  return detail::make(
      std::move(out), "conv2d", {x, w, b},
      [cin, cout, kh, kw, ho, wo](Node& self) {
        const Tensor& xv = self.parents[0]->value;
        const Tensor& wv = self.parents[1]->value;
        const Tensor& g = self.grad;
        if (self.parents[0]->requires_grad) {
          Tensor& gx = self.parents[0]->grad_ref();
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t i = 0; i < ho; ++i)
              for (std::size_t j = 0; j < wo; ++j) {
                const double gij = g(o, i, j);
                for (std::size_t c = 0; c < cin; ++c)
                  for (std::size_t a = 0; a < kh; ++a)
                    for (std::size_t bb = 0; bb < kw; ++bb)
                      gx(c, i + a, j + bb) += gij * wv.at4(o, c, a, bb);
              }
        }
        if (self.parents[1]->requires_grad) {
          Tensor& gw = self.parents[1]->grad_ref();
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t i = 0; i < ho; ++i)
              for (std::size_t j = 0; j < wo; ++j) {
                const double gij = g(o, i, j);
                for (std::size_t c = 0; c < cin; ++c)
                  for (std::size_t a = 0; a < kh; ++a)
                    for (std::size_t bb = 0; bb < kw; ++bb)
                      gw.at4(o, c, a, bb) += gij * xv(c, i + a, j + bb);
              }
        }
        if (self.parents[2]->requires_grad) {
          Tensor& gb = self.parents[2]->grad_ref();
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t i = 0; i < ho; ++i)
              for (std::size_t j = 0; j < wo; ++j) gb[o] += g(o, i, j);
        }
      });
}

/// Max pooling with square window = stride. x: (C x H x W). Trailing rows
/// or columns that do not fill a window are dropped. Ties break toward the
/// first element scanned, which keeps the backward pass deterministic.
inline Var maxpool2d(const Var& x, std::size_t pool) {
  const Tensor& xv = x->value;
  if (xv.rank() != 3 || pool == 0) {
    throw ContractViolation("maxpool2d: expects (C x H x W) and pool >= 1");
  }
  const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const std::size_t ho = h / pool, wo = w / pool;
  if (ho == 0 || wo == 0) {
    throw DegenerateInputError("maxpool2d: input " + shape_str(xv.shape()) +
                               " collapses below 1x1 at pool " +
                               std::to_string(pool));
  }
  Tensor out({c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(c * ho * wo);
  std::size_t idx = 0;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j, ++idx) {
        double best = xv(ch, i * pool, j * pool);
        std::size_t best_flat = (ch * h + i * pool) * w + j * pool;
        for (std::size_t a = 0; a < pool; ++a)
          for (std::size_t b = 0; b < pool; ++b) {
            const double v = xv(ch, i * pool + a, j * pool + b);
            if (v > best) {
              best = v;
              best_flat = (ch * h + i * pool + a) * w + j * pool + b;
            }
          }
        out(ch, i, j) = best;
        (*argmax)[idx] = best_flat;
      }
  return detail::make(std::move(out), "maxpool2d", {x},
                      [argmax](Node& self) {
                        if (!self.parents[0]->requires_grad) return;
                        Tensor& gx = self.parents[0]->grad_ref();
                        for (std::size_t i = 0; i < argmax->size(); ++i)
                          gx[(*argmax)[i]] += self.grad[i];
                      });
}

}  // namespace iccn::ad
