#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pnfrec/errors.hpp"
#include "pnfrec/rng.hpp"
#include "pnfrec/tensor.hpp"

namespace pnfrec::ad {

// Reverse-mode autodiff on a per-step tape. Nodes are appended in
// topological order (an operation may only reference existing nodes), so
// the backward pass is a single reverse sweep that visits each node once.
//
// The tape is built for one forward pass, backward() is called once, and
// the graph is discarded. Parameter gradients are read off leaf nodes by
// the caller.
template <typename Real>
class Graph {
 public:
  struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const { return id != static_cast<std::size_t>(-1); }
  };

  explicit Graph(bool check_finite = false) : check_finite_(check_finite) {}

  std::size_t size() const { return nodes_.size(); }

  const Tensor<Real>& value(Var v) const { return nodes_[v.id].value; }

  const Tensor<Real>& grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (!n.requires_grad) {
      throw Error("grad() on a node that does not require gradients");
    }
    return n.grad;
  }

  Real scalar_value(Var v) const {
    const Tensor<Real>& t = nodes_[v.id].value;
    if (t.size() != 1) {
      throw DimensionError("scalar_value: node has shape " + shape_to_string(t.shape()));
    }
    return t[0];
  }

  // ---- graph inputs ----

  Var constant(Tensor<Real> v) { return push(std::move(v), false, {}, nullptr); }

  Var leaf(Tensor<Real> v) { return push(std::move(v), true, {}, nullptr); }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    require_same_shape(val(a), val(b), "add");
    Tensor<Real> out = val(a);
    const Tensor<Real>& vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    return push(std::move(out), needs(a, b), {a.id, b.id},
                [](Graph& g, std::size_t self) {
                  const Node& n = g.nodes_[self];
                  g.accumulate(n.parents[0], n.grad);
                  g.accumulate(n.parents[1], n.grad);
                });
  }

  Var sub(Var a, Var b) {
    require_same_shape(val(a), val(b), "sub");
    Tensor<Real> out = val(a);
    const Tensor<Real>& vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    return push(std::move(out), needs(a, b), {a.id, b.id},
                [](Graph& g, std::size_t self) {
                  const Node& n = g.nodes_[self];
                  g.accumulate(n.parents[0], n.grad);
                  if (g.nodes_[n.parents[1]].requires_grad) {
                    Tensor<Real>& gb = g.nodes_[n.parents[1]].grad;
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i];
                  }
                });
  }

  Var mul(Var a, Var b) {
    require_same_shape(val(a), val(b), "mul");
    Tensor<Real> out = val(a);
    const Tensor<Real>& vb = val(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    return push(std::move(out), needs(a, b), {a.id, b.id},
                [](Graph& g, std::size_t self) {
                  const Node& n = g.nodes_[self];
                  const Tensor<Real>& va = g.nodes_[n.parents[0]].value;
                  const Tensor<Real>& vb2 = g.nodes_[n.parents[1]].value;
                  if (g.nodes_[n.parents[0]].requires_grad) {
                    Tensor<Real>& ga = g.nodes_[n.parents[0]].grad;
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * vb2[i];
                  }
                  if (g.nodes_[n.parents[1]].requires_grad) {
                    Tensor<Real>& gb = g.nodes_[n.parents[1]].grad;
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * va[i];
                  }
                });
  }

  Var scale(Var a, Real c) {
    Tensor<Real> out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return push(std::move(out), needs(a), {a.id},
                [c](Graph& g, std::size_t self) {
                  const Node& n = g.nodes_[self];
                  Tensor<Real>& ga = g.nodes_[n.parents[0]].grad;
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * n.grad[i];
                });
  }

  Var exp(Var a) {
    Tensor<Real> out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    return push(std::move(out), needs(a), {a.id},
                [](Graph& g, std::size_t self) {
                  const Node& n = g.nodes_[self];
                  Tensor<Real>& ga = g.nodes_[n.parents[0]].grad;
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * n.value[i];
                });
  }

  Var log(Var a) {
    Tensor<Real> out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
    return push(std::move(out), needs(a), {a.id},
                [](Graph& g, std::size_t self) {
                  const Node& n = g.nodes_[self];
                  const Tensor<Real>& va = g.nodes_[n.parents[0]].value;
                  Tensor<Real>& ga = g.nodes_[n.parents[0]].grad;
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] / va[i];
                });
  }

  Var relu(Var a) {
    Tensor<Real> out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > Real(0) ? out[i] : Real(0);
    return push(std::move(out), needs(a), {a.id},
                [](Graph& g, std::size_t self) {
                  const Node& n = g.nodes_[self];
                  const Tensor<Real>& va = g.nodes_[n.parents[0]].value;
                  Tensor<Real>& ga = g.nodes_[n.parents[0]].grad;
                  for (std::size_t i = 0; i < ga.size(); ++i) {
                    if (va[i] > Real(0)) ga[i] += n.grad[i];
                  }
                });
  }

  // Inverted dropout; builds no node when rate == 0. Masks come from the
  // supplied stream so separate model branches can keep independent,
  // reproducible streams.
  Var dropout(Var a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    const Real keep_scale = Real(1.0 / (1.0 - rate));
    const Tensor<Real>& va = val(a);
    std::vector<Real> mask(va.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = rng.uniform() < rate ? Real(0) : keep_scale;
    }
    Tensor<Real> out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return push(std::move(out), needs(a), {a.id},
                [mask = std::move(mask)](Graph& g, std::size_t self) {
                  const Node& n = g.nodes_[self];
                  Tensor<Real>& ga = g.nodes_[n.parents[0]].grad;
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * mask[i];
                });
  }

  // ---- broadcast / reduction ----

  // a (m x n) + b (n), broadcast over rows.
  Var add_rowvec(Var a, Var b) {
    require_matrix(val(a), "add_rowvec");
    const std::size_t m = val(a).rows(), n = val(a).cols();
    if (val(b).rank() != 1 || val(b).size() != n) {
      throw DimensionError("add_rowvec: " + shape_to_string(val(a).shape()) + " vs " +
                           shape_to_string(val(b).shape()));
    }
    Tensor<Real> out = val(a);
    const Tensor<Real>& vb = val(b);
    for (std::size_t i = 0; i < m; ++i) {
      Real* r = out.row(i);
      for (std::size_t j = 0; j < n; ++j) r[j] += vb[j];
    }
    return push(std::move(out), needs(a, b), {a.id, b.id},
                [m, n](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  g.accumulate(nd.parents[0], nd.grad);
                  if (g.nodes_[nd.parents[1]].requires_grad) {
                    Tensor<Real>& gb = g.nodes_[nd.parents[1]].grad;
                    for (std::size_t i = 0; i < m; ++i) {
                      const Real* gr = nd.grad.row(i);
                      for (std::size_t j = 0; j < n; ++j) gb[j] += gr[j];
                    }
                  }
                });
  }

  // Row-wise sum: (m x n) -> (m)
  Var row_sum(Var a) {
    require_matrix(val(a), "row_sum");
    const std::size_t m = val(a).rows(), n = val(a).cols();
    Tensor<Real> out({m});
    for (std::size_t i = 0; i < m; ++i) {
      const Real* r = val(a).row(i);
      Real acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += r[j];
      out[i] = acc;
    }
    return push(std::move(out), needs(a), {a.id},
                [m, n](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  Tensor<Real>& ga = g.nodes_[nd.parents[0]].grad;
                  for (std::size_t i = 0; i < m; ++i) {
                    Real* gr = ga.row(i);
                    const Real gi = nd.grad[i];
                    for (std::size_t j = 0; j < n; ++j) gr[j] += gi;
                  }
                });
  }

  // Row-wise dot product of two equal-shaped matrices: -> (m)
  Var row_dot(Var a, Var b) {
    require_matrix(val(a), "row_dot");
    require_same_shape(val(a), val(b), "row_dot");
    const std::size_t m = val(a).rows(), n = val(a).cols();
    Tensor<Real> out({m});
    for (std::size_t i = 0; i < m; ++i) {
      out[i] = lin::dot(val(a).row(i), val(b).row(i), n);
    }
    return push(std::move(out), needs(a, b), {a.id, b.id},
                [m, n](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  const Tensor<Real>& va = g.nodes_[nd.parents[0]].value;
                  const Tensor<Real>& vb = g.nodes_[nd.parents[1]].value;
                  if (g.nodes_[nd.parents[0]].requires_grad) {
                    Tensor<Real>& ga = g.nodes_[nd.parents[0]].grad;
                    for (std::size_t i = 0; i < m; ++i) {
                      Real* gr = ga.row(i);
                      const Real* br = vb.row(i);
                      const Real gi = nd.grad[i];
                      for (std::size_t j = 0; j < n; ++j) gr[j] += gi * br[j];
                    }
                  }
                  if (g.nodes_[nd.parents[1]].requires_grad) {
                    Tensor<Real>& gb = g.nodes_[nd.parents[1]].grad;
                    for (std::size_t i = 0; i < m; ++i) {
                      Real* gr = gb.row(i);
                      const Real* ar = va.row(i);
                      const Real gi = nd.grad[i];
                      for (std::size_t j = 0; j < n; ++j) gr[j] += gi * ar[j];
                    }
                  }
                });
  }

  Var sum_all(Var a) {
    const Tensor<Real>& va = val(a);
    Real acc = 0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i];
    return push(Tensor<Real>::scalar(acc), needs(a), {a.id},
                [](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  Tensor<Real>& ga = g.nodes_[nd.parents[0]].grad;
                  const Real gi = nd.grad[0];
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gi;
                });
  }

  // ---- matrix products ----

  Var matmul(Var a, Var b) {
    require_matrix(val(a), "matmul");
    require_matrix(val(b), "matmul");
    const std::size_t m = val(a).rows(), k = val(a).cols();
    if (val(b).rows() != k) {
      throw DimensionError("matmul: inner dimensions disagree: " +
                           shape_to_string(val(a).shape()) + " x " +
                           shape_to_string(val(b).shape()));
    }
    const std::size_t n = val(b).cols();
    Tensor<Real> out({m, n});
    lin::gemm_nn_acc(out.data(), val(a).data(), val(b).data(), m, k, n);
    return push(std::move(out), needs(a, b), {a.id, b.id},
                [m, k, n](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  const Tensor<Real>& va = g.nodes_[nd.parents[0]].value;
                  const Tensor<Real>& vb = g.nodes_[nd.parents[1]].value;
                  if (g.nodes_[nd.parents[0]].requires_grad) {
                    // ga += grad * b^T
                    lin::gemm_nt_acc(g.nodes_[nd.parents[0]].grad.data(), nd.grad.data(),
                                     vb.data(), m, n, k);
                  }
                  if (g.nodes_[nd.parents[1]].requires_grad) {
                    // gb += a^T * grad
                    lin::gemm_tn_acc(g.nodes_[nd.parents[1]].grad.data(), va.data(),
                                     nd.grad.data(), m, k, n);
                  }
                });
  }

  // a (m x k) * b^T where b is (n x k); result (m x n).
  Var matmul_nt(Var a, Var b) {
    require_matrix(val(a), "matmul_nt");
    require_matrix(val(b), "matmul_nt");
    const std::size_t m = val(a).rows(), k = val(a).cols();
    if (val(b).cols() != k) {
      throw DimensionError("matmul_nt: inner dimensions disagree: " +
                           shape_to_string(val(a).shape()) + " x " +
                           shape_to_string(val(b).shape()) + "^T");
    }
    const std::size_t n = val(b).rows();
    Tensor<Real> out({m, n});
    lin::gemm_nt_acc(out.data(), val(a).data(), val(b).data(), m, k, n);
    return push(std::move(out), needs(a, b), {a.id, b.id},
                [m, k, n](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  const Tensor<Real>& va = g.nodes_[nd.parents[0]].value;
                  const Tensor<Real>& vb = g.nodes_[nd.parents[1]].value;
                  if (g.nodes_[nd.parents[0]].requires_grad) {
                    // ga += grad * b
                    lin::gemm_nn_acc(g.nodes_[nd.parents[0]].grad.data(), nd.grad.data(),
                                     vb.data(), m, n, k);
                  }
                  if (g.nodes_[nd.parents[1]].requires_grad) {
                    // gb += grad^T * a
                    lin::gemm_tn_acc(g.nodes_[nd.parents[1]].grad.data(), nd.grad.data(),
                                     va.data(), m, n, k);
                  }
                });
  }

  // ---- gather / slice / concat ----

  // Row lookup with additive scatter on the way back; duplicate indices
  // accumulate.
  Var gather_rows(Var a, std::vector<int> indices) {
    require_matrix(val(a), "gather_rows");
    const std::size_t rows = val(a).rows(), n = val(a).cols();
    for (int idx : indices) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= rows) {
        throw IndexError("gather_rows: index " + std::to_string(idx) +
                         " out of range [0, " + std::to_string(rows) + ")");
      }
    }
    Tensor<Real> out({indices.size(), n});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const Real* src = val(a).row(static_cast<std::size_t>(indices[i]));
      std::copy(src, src + n, out.row(i));
    }
    return push(std::move(out), needs(a), {a.id},
                [indices = std::move(indices), n](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  Tensor<Real>& ga = g.nodes_[nd.parents[0]].grad;
                  for (std::size_t i = 0; i < indices.size(); ++i) {
                    Real* dst = ga.row(static_cast<std::size_t>(indices[i]));
                    const Real* src = nd.grad.row(i);
                    for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
                  }
                });
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    require_matrix(val(a), "slice_cols");
    const std::size_t m = val(a).rows(), n = val(a).cols();
    if (c0 >= c1 || c1 > n) {
      throw DimensionError("slice_cols: invalid range [" + std::to_string(c0) + ", " +
                           std::to_string(c1) + ") for " + shape_to_string(val(a).shape()));
    }
    const std::size_t w = c1 - c0;
    Tensor<Real> out({m, w});
    for (std::size_t i = 0; i < m; ++i) {
      const Real* src = val(a).row(i) + c0;
      std::copy(src, src + w, out.row(i));
    }
    return push(std::move(out), needs(a), {a.id},
                [m, w, c0](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  Tensor<Real>& ga = g.nodes_[nd.parents[0]].grad;
                  for (std::size_t i = 0; i < m; ++i) {
                    Real* dst = ga.row(i) + c0;
                    const Real* src = nd.grad.row(i);
                    for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
                  }
                });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t m = val(parts[0]).rows();
    std::size_t total = 0;
    bool any_grad = false;
    std::vector<std::size_t> widths, ids;
    for (Var p : parts) {
      require_matrix(val(p), "concat_cols");
      if (val(p).rows() != m) {
        throw DimensionError("concat_cols: row counts disagree");
      }
      widths.push_back(val(p).cols());
      ids.push_back(p.id);
      total += val(p).cols();
      any_grad = any_grad || nodes_[p.id].requires_grad;
    }
    Tensor<Real> out({m, total});
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const Tensor<Real>& vp = val(parts[pi]);
      for (std::size_t i = 0; i < m; ++i) {
        std::copy(vp.row(i), vp.row(i) + widths[pi], out.row(i) + off);
      }
      off += widths[pi];
    }
    return push(std::move(out), any_grad, ids,
                [m, widths](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  std::size_t off2 = 0;
                  for (std::size_t pi = 0; pi < nd.parents.size(); ++pi) {
                    Node& parent = g.nodes_[nd.parents[pi]];
                    if (parent.requires_grad) {
                      for (std::size_t i = 0; i < m; ++i) {
                        const Real* src = nd.grad.row(i) + off2;
                        Real* dst = parent.grad.row(i);
                        for (std::size_t j = 0; j < widths[pi]; ++j) dst[j] += src[j];
                      }
                    }
                    off2 += widths[pi];
                  }
                });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t n = val(parts[0]).cols();
    std::size_t total = 0;
    bool any_grad = false;
    std::vector<std::size_t> heights, ids;
    for (Var p : parts) {
      require_matrix(val(p), "concat_rows");
      if (val(p).cols() != n) {
        throw DimensionError("concat_rows: column counts disagree");
      }
      heights.push_back(val(p).rows());
      ids.push_back(p.id);
      total += val(p).rows();
      any_grad = any_grad || nodes_[p.id].requires_grad;
    }
    Tensor<Real> out({total, n});
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const Tensor<Real>& vp = val(parts[pi]);
      std::copy(vp.data(), vp.data() + vp.size(), out.row(off));
      off += heights[pi];
    }
    return push(std::move(out), any_grad, ids,
                [n, heights](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  std::size_t off2 = 0;
                  for (std::size_t pi = 0; pi < nd.parents.size(); ++pi) {
                    Node& parent = g.nodes_[nd.parents[pi]];
                    if (parent.requires_grad) {
                      const Real* src = nd.grad.row(off2);
                      Real* dst = parent.grad.data();
                      for (std::size_t i = 0; i < heights[pi] * n; ++i) dst[i] += src[i];
                    }
                    off2 += heights[pi];
                  }
                });
  }

  // ---- normalization / softmax ----

  // Row-wise softmax with max subtraction.
  Var softmax_rows(Var a) {
    require_matrix(val(a), "softmax_rows");
    const std::size_t m = val(a).rows(), n = val(a).cols();
    Tensor<Real> out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      const Real* x = val(a).row(i);
      Real* y = out.row(i);
      Real mx = x[0];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
      Real sum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
      }
      const Real inv = Real(1) / sum;
      for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
    }
    return push(std::move(out), needs(a), {a.id},
                [m, n](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  Tensor<Real>& ga = g.nodes_[nd.parents[0]].grad;
                  for (std::size_t i = 0; i < m; ++i) {
                    const Real* y = nd.value.row(i);
                    const Real* gr = nd.grad.row(i);
                    Real dot = 0;
                    for (std::size_t j = 0; j < n; ++j) dot += gr[j] * y[j];
                    Real* dst = ga.row(i);
                    for (std::size_t j = 0; j < n; ++j) dst[j] += y[j] * (gr[j] - dot);
                  }
                });
  }

  // Row-wise L2 normalization: y = x / (||x|| + eps). The eps keeps
  // zero-norm rows defined instead of failing.
  Var normalize_rows(Var a, Real eps = Real(1e-8)) {
    require_matrix(val(a), "normalize_rows");
    const std::size_t m = val(a).rows(), n = val(a).cols();
    Tensor<Real> out({m, n});
    std::vector<Real> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
      const Real* x = val(a).row(i);
      const Real r = std::sqrt(lin::dot(x, x, n));
      norms[i] = r;
      const Real inv = Real(1) / (r + eps);
      Real* y = out.row(i);
      for (std::size_t j = 0; j < n; ++j) y[j] = x[j] * inv;
    }
    return push(std::move(out), needs(a), {a.id},
                [m, n, eps, norms = std::move(norms)](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  const Tensor<Real>& va = g.nodes_[nd.parents[0]].value;
                  Tensor<Real>& ga = g.nodes_[nd.parents[0]].grad;
                  for (std::size_t i = 0; i < m; ++i) {
                    const Real r = norms[i];
                    const Real denom = r + eps;
                    const Real* x = va.row(i);
                    const Real* gr = nd.grad.row(i);
                    Real* dst = ga.row(i);
                    const Real gdotx = lin::dot(gr, x, n);
                    const Real coef = r > Real(0) ? gdotx / (r * denom * denom) : Real(0);
                    for (std::size_t j = 0; j < n; ++j) {
                      dst[j] += gr[j] / denom - coef * x[j];
                    }
                  }
                });
  }

  // Row-wise layer normalization with affine parameters gamma, beta (d).
  Var layer_norm(Var x, Var gamma, Var beta, Real eps = Real(1e-8)) {
    require_matrix(val(x), "layer_norm");
    const std::size_t m = val(x).rows(), d = val(x).cols();
    if (val(gamma).rank() != 1 || val(gamma).size() != d ||
        val(beta).rank() != 1 || val(beta).size() != d) {
      throw DimensionError("layer_norm: gamma/beta must have shape [" +
                           std::to_string(d) + "]");
    }
    Tensor<Real> out({m, d});
    Tensor<Real> xhat({m, d});
    std::vector<Real> inv_std(m);
    const Tensor<Real>& vg = val(gamma);
    const Tensor<Real>& vb = val(beta);
    for (std::size_t i = 0; i < m; ++i) {
      const Real* xr = val(x).row(i);
      Real mean = 0;
      for (std::size_t j = 0; j < d; ++j) mean += xr[j];
      mean /= Real(d);
      Real var = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const Real c = xr[j] - mean;
        var += c * c;
      }
      var /= Real(d);
      const Real inv = Real(1) / std::sqrt(var + eps);
      inv_std[i] = inv;
      Real* xh = xhat.row(i);
      Real* y = out.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        xh[j] = (xr[j] - mean) * inv;
        y[j] = vg[j] * xh[j] + vb[j];
      }
    }
    return push(std::move(out), needs(x, gamma) || nodes_[beta.id].requires_grad,
                {x.id, gamma.id, beta.id},
                [m, d, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  Node& nx = g.nodes_[nd.parents[0]];
                  Node& ngamma = g.nodes_[nd.parents[1]];
                  Node& nbeta = g.nodes_[nd.parents[2]];
                  const Tensor<Real>& vg = ngamma.value;
                  for (std::size_t i = 0; i < m; ++i) {
                    const Real* gr = nd.grad.row(i);
                    const Real* xh = xhat.row(i);
                    if (nbeta.requires_grad) {
                      for (std::size_t j = 0; j < d; ++j) nbeta.grad[j] += gr[j];
                    }
                    if (ngamma.requires_grad) {
                      for (std::size_t j = 0; j < d; ++j) ngamma.grad[j] += gr[j] * xh[j];
                    }
                    if (nx.requires_grad) {
                      Real mean_dxhat = 0, mean_dxhat_xhat = 0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const Real dxh = gr[j] * vg[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xh[j];
                      }
                      mean_dxhat /= Real(d);
                      mean_dxhat_xhat /= Real(d);
                      Real* dst = nx.grad.row(i);
                      for (std::size_t j = 0; j < d; ++j) {
                        const Real dxh = gr[j] * vg[j];
                        dst[j] += inv_std[i] * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
                      }
                    }
                  }
                });
  }

  // ---- losses ----

  // Mean of -log softmax(logits)[target] over rows, with log-sum-exp
  // stabilization. Targets index columns directly.
  Var cross_entropy_from_logits(Var logits, std::vector<int> targets) {
    require_matrix(val(logits), "cross_entropy_from_logits");
    const std::size_t m = val(logits).rows(), n = val(logits).cols();
    if (targets.size() != m) {
      throw DimensionError("cross_entropy_from_logits: " + std::to_string(targets.size()) +
                           " targets for " + std::to_string(m) + " rows");
    }
    if (m == 0) throw DataError("cross_entropy_from_logits: no rows");
    for (int t : targets) {
      if (t < 0 || static_cast<std::size_t>(t) >= n) {
        throw IndexError("cross_entropy_from_logits: target " + std::to_string(t) +
                         " out of range [0, " + std::to_string(n) + ")");
      }
    }
    Tensor<Real> probs({m, n});
    Real total = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const Real* x = val(logits).row(i);
      Real mx = x[0];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
      Real sum = 0;
      Real* p = probs.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        p[j] = std::exp(x[j] - mx);
        sum += p[j];
      }
      const Real inv = Real(1) / sum;
      for (std::size_t j = 0; j < n; ++j) p[j] *= inv;
      const Real lse = mx + std::log(sum);
      total += lse - x[static_cast<std::size_t>(targets[i])];
    }
    total /= Real(m);
    return push(Tensor<Real>::scalar(total), needs(logits), {logits.id},
                [m, n, targets = std::move(targets),
                 probs = std::move(probs)](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  Tensor<Real>& gl = g.nodes_[nd.parents[0]].grad;
                  const Real gscale = nd.grad[0] / Real(m);
                  for (std::size_t i = 0; i < m; ++i) {
                    const Real* p = probs.row(i);
                    Real* dst = gl.row(i);
                    for (std::size_t j = 0; j < n; ++j) dst[j] += gscale * p[j];
                    dst[static_cast<std::size_t>(targets[i])] -= gscale;
                  }
                });
  }

  // Cosine similarity of two vectors with the eps-padded norms rule:
  // dot(a, b) / ((||a|| + eps) * (||b|| + eps)).
  Var cosine_similarity(Var a, Var b, Real eps = Real(1e-8)) {
    if (val(a).rank() != 1 || val(b).rank() != 1) {
      throw DimensionError("cosine_similarity: expected vectors, got " +
                           shape_to_string(val(a).shape()) + " and " +
                           shape_to_string(val(b).shape()));
    }
    require_same_shape(val(a), val(b), "cosine_similarity");
    const std::size_t n = val(a).size();
    const Real* av = val(a).data();
    const Real* bv = val(b).data();
    const Real s = lin::dot(av, bv, n);
    const Real ra = std::sqrt(lin::dot(av, av, n));
    const Real rb = std::sqrt(lin::dot(bv, bv, n));
    const Real da = ra + eps, db = rb + eps;
    const Real c = s / (da * db);
    return push(Tensor<Real>::scalar(c), needs(a, b), {a.id, b.id},
                [n, s, ra, rb, da, db](Graph& g, std::size_t self) {
                  const Node& nd = g.nodes_[self];
                  const Real gi = nd.grad[0];
                  const Tensor<Real>& va = g.nodes_[nd.parents[0]].value;
                  const Tensor<Real>& vb = g.nodes_[nd.parents[1]].value;
                  if (g.nodes_[nd.parents[0]].requires_grad) {
                    Tensor<Real>& ga = g.nodes_[nd.parents[0]].grad;
                    const Real coef = ra > Real(0) ? s / (ra * da * da * db) : Real(0);
                    for (std::size_t i = 0; i < n; ++i) {
                      ga[i] += gi * (vb[i] / (da * db) - coef * va[i]);
                    }
                  }
                  if (g.nodes_[nd.parents[1]].requires_grad) {
                    Tensor<Real>& gb = g.nodes_[nd.parents[1]].grad;
                    const Real coef = rb > Real(0) ? s / (rb * db * db * da) : Real(0);
                    for (std::size_t i = 0; i < n; ++i) {
                      gb[i] += gi * (va[i] / (da * db) - coef * vb[i]);
                    }
                  }
                });
  }

  // ---- backward ----

  // Single reverse sweep from a scalar root. May be called once per graph.
  void backward(Var root) {
    if (ran_backward_) throw Error("backward() already ran on this graph");
    ran_backward_ = true;
    Node& r = nodes_[root.id];
    if (r.value.size() != 1) {
      throw DimensionError("backward: root must be a scalar, got shape " +
                           shape_to_string(r.value.shape()));
    }
    if (!r.requires_grad) {
      throw Error("backward: root does not require gradients");
    }
    std::vector<char> reachable(nodes_.size(), 0);
    reachable[root.id] = 1;
    r.grad[0] = Real(1);
    for (std::size_t id = root.id + 1; id-- > 0;) {
      if (!reachable[id]) continue;
      Node& n = nodes_[id];
      for (std::size_t p : n.parents) {
        if (nodes_[p].requires_grad) reachable[p] = 1;
      }
      if (n.backfn) n.backfn(*this, id);
    }
  }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    std::function<void(Graph&, std::size_t)> backfn;
  };

  const Tensor<Real>& val(Var v) const { return nodes_[v.id].value; }

  bool needs(Var a) const { return nodes_[a.id].requires_grad; }
  bool needs(Var a, Var b) const {
    return nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  }

  void accumulate(std::size_t parent, const Tensor<Real>& g) {
    Node& p = nodes_[parent];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g[i];
  }

  Var push(Tensor<Real> value, bool requires_grad, std::vector<std::size_t> parents,
           std::function<void(Graph&, std::size_t)> backfn) {
    if (check_finite_) require_finite(value, "graph node");
    Node n;
    n.requires_grad = requires_grad;
    if (requires_grad) {
      n.grad = Tensor<Real>(value.shape());
      n.backfn = std::move(backfn);
    }
    n.value = std::move(value);
    n.parents = std::move(parents);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  bool check_finite_ = false;
  bool ran_backward_ = false;
  std::vector<Node> nodes_;
};

}  // namespace pnfrec::ad
