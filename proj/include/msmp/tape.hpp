#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "tensor.hpp"

namespace msmp {

using Var = int32_t;

// Reverse-mode differentiation tape over dense tensors. Ops evaluate eagerly
// and push a backward closure; backward() runs the closures in reverse and
// accumulates adjoints. Single-threaded per tape; independent tapes may run
// on parallel threads.
template <class Real>
class Tape {
 public:
  // -- variables ------------------------------------------------------------

  Var leaf(Tensor<Real> v, bool needs_grad = false) {
    slots_.push_back(Slot{std::move(v), nullptr, {}, needs_grad, false});
    return static_cast<Var>(slots_.size() - 1);
  }

  // Leaf whose storage lives outside the tape (parameters). Must outlive it.
  Var leaf_ref(const Tensor<Real>* v, bool needs_grad = true) {
    slots_.push_back(Slot{{}, v, {}, needs_grad, false});
    return static_cast<Var>(slots_.size() - 1);
  }

  // Gradient-stopped copy: value flows, adjoints do not.
  Var detach(Var x) { return leaf(val(x), false); }

  const Tensor<Real>& val(Var v) const {
    const Slot& s = slots_[static_cast<size_t>(v)];
    return s.external ? *s.external : s.value;
  }

  bool needs_grad(Var v) const { return slots_[static_cast<size_t>(v)].needs_grad; }
  bool grad_touched(Var v) const { return slots_[static_cast<size_t>(v)].grad_ready; }
  size_t slot_count() const { return slots_.size(); }
  size_t node_count() const { return nodes_.size(); }

  // Adjoint of v; zeros if v was never reached during backward.
  const Tensor<Real>& grad_of(Var v) {
    Slot& s = slots_[static_cast<size_t>(v)];
    if (!s.grad_ready) {
      s.grad = Tensor<Real>::zeros(val(v).shape);
      s.grad_ready = true;
    }
    return s.grad;
  }

  void backward(Var out) {
    MSMP_CHECK(val(out).numel() == 1, "backward: output must be a scalar");
    MSMP_CHECK(needs_grad(out), "backward: output is not connected to any differentiable leaf");
    ensure_grad(out).data[0] = Real(1);
    for (size_t i = nodes_.size(); i-- > 0;) nodes_[i](*this);
  }

  // -- elementwise ----------------------------------------------------------

  Var add(Var a, Var b) { return binary(a, b, /*sub=*/false); }
  Var sub(Var a, Var b) { return binary(a, b, /*sub=*/true); }

  Var mul(Var a, Var b) {
    const Tensor<Real>&A = val(a), &B = val(b);
    MSMP_CHECK(A.same_shape(B), "mul: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor<Real> out = A;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= B.data[i];
    Var o = result(std::move(out), needs_grad(a) || needs_grad(b));
    if (needs_grad(o))
      push([a, b, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        if (t.needs_grad(a)) {
          Tensor<Real>& ga = t.ensure_grad(a);
          const Tensor<Real>& B = t.val(b);
          for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * B.data[i];
        }
        if (t.needs_grad(b)) {
          Tensor<Real>& gb = t.ensure_grad(b);
          const Tensor<Real>& A = t.val(a);
          for (int64_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i] * A.data[i];
        }
      });
    return o;
  }

  Var one_minus(Var a) {
    Tensor<Real> out = val(a);
    for (auto& v : out.data) v = Real(1) - v;
    Var o = result(std::move(out), needs_grad(a));
    if (needs_grad(o))
      push([a, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(a)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        Tensor<Real>& ga = t.ensure_grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] -= g.data[i];
      });
    return o;
  }

  Var scale(Var a, Real c) {
    Tensor<Real> out = val(a);
    for (auto& v : out.data) v *= c;
    Var o = result(std::move(out), needs_grad(a));
    if (needs_grad(o))
      push([a, o, c](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(a)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        Tensor<Real>& ga = t.ensure_grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += c * g.data[i];
      });
    return o;
  }

  Var sigmoid(Var a) {
    Tensor<Real> out = val(a);
    for (auto& v : out.data) v = stable_sigmoid(v);
    Var o = result(std::move(out), needs_grad(a));
    if (needs_grad(o))
      push([a, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(a)) return;
        const Tensor<Real>&g = t.grad_of_ro(o), &y = t.val(o);
        Tensor<Real>& ga = t.ensure_grad(a);
        for (int64_t i = 0; i < g.numel(); ++i)
          ga.data[i] += g.data[i] * y.data[i] * (Real(1) - y.data[i]);
      });
    return o;
  }

  Var tanh_(Var a) {
    Tensor<Real> out = val(a);
    for (auto& v : out.data) v = std::tanh(v);
    Var o = result(std::move(out), needs_grad(a));
    if (needs_grad(o))
      push([a, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(a)) return;
        const Tensor<Real>&g = t.grad_of_ro(o), &y = t.val(o);
        Tensor<Real>& ga = t.ensure_grad(a);
        for (int64_t i = 0; i < g.numel(); ++i)
          ga.data[i] += g.data[i] * (Real(1) - y.data[i] * y.data[i]);
      });
    return o;
  }

  // swish(x) = x * sigmoid(x)
  Var swish(Var a) {
    const Tensor<Real>& A = val(a);
    Tensor<Real> out = A;
    for (auto& v : out.data) v = v * stable_sigmoid(v);
    Var o = result(std::move(out), needs_grad(a));
    if (needs_grad(o))
      push([a, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(a)) return;
        const Tensor<Real>&g = t.grad_of_ro(o), &x = t.val(a);
        Tensor<Real>& ga = t.ensure_grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) {
          const Real s = stable_sigmoid(x.data[i]);
          ga.data[i] += g.data[i] * s * (Real(1) + x.data[i] * (Real(1) - s));
        }
      });
    return o;
  }

  // -- linear algebra ---------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Tensor<Real>&A = val(a), &B = val(b);
    MSMP_CHECK(A.cols() == B.rows(),
          "matmul: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor<Real> out({A.rows(), B.cols()});
    gemm_acc(A.data.data(), B.data.data(), out.data.data(), A.rows(), A.cols(), B.cols());
    Var o = result(std::move(out), needs_grad(a) || needs_grad(b));
    if (needs_grad(o))
      push([a, b, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        const Tensor<Real>&A = t.val(a), &B = t.val(b);
        if (t.needs_grad(a)) {
          std::vector<Real> scratch;
          gemm_nt_acc(g.data.data(), B.data.data(), t.ensure_grad(a).data.data(), g.rows(),
                      g.cols(), B.rows(), scratch);
        }
        if (t.needs_grad(b))
          gemm_tn_acc(A.data.data(), g.data.data(), t.ensure_grad(b).data.data(), A.rows(),
                      A.cols(), g.cols());
      });
    return o;
  }

  struct CatInput {
    Var x;
    // When set, rows are gathered: row r of the block is x[index[r], :].
    std::shared_ptr<const std::vector<int32_t>> index;
  };

  // out = [block_0, block_1, ...] * [W_0; W_1; ...] + b, where block_k is
  // inputs[k] (optionally row-gathered). Avoids materializing the concat.
  Var linear_cat(const std::vector<CatInput>& inputs, const std::vector<Var>& weights, Var b) {
    MSMP_CHECK(inputs.size() == weights.size(), "linear_cat: inputs/weights count mismatch");
    MSMP_CHECK(!inputs.empty(), "linear_cat: no inputs");
    const int64_t n = val(b).numel();
    int64_t rows = -1;
    bool ng = needs_grad(b);
    for (size_t k = 0; k < inputs.size(); ++k) {
      const Tensor<Real>& X = val(inputs[k].x);
      const Tensor<Real>& W = val(weights[k]);
      MSMP_CHECK(X.cols() == W.rows(), "linear_cat: block " + std::to_string(k) + " shape mismatch " +
                                      X.shape_str() + " vs " + W.shape_str());
      MSMP_CHECK(W.cols() == n, "linear_cat: weight cols mismatch bias size");
      int64_t r = inputs[k].index ? static_cast<int64_t>(inputs[k].index->size()) : X.rows();
      if (rows < 0) rows = r;
      MSMP_CHECK(r == rows, "linear_cat: row count mismatch across blocks");
      ng = ng || needs_grad(inputs[k].x) || needs_grad(weights[k]);
    }
    Tensor<Real> out({rows, n});
    {
      const Tensor<Real>& B = val(b);
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < n; ++j) out.data[static_cast<size_t>(i * n + j)] = B.data[j];
    }
    for (size_t k = 0; k < inputs.size(); ++k) {
      const Tensor<Real>& X = val(inputs[k].x);
      const Tensor<Real>& W = val(weights[k]);
      if (!inputs[k].index) {
        gemm_acc(X.data.data(), W.data.data(), out.data.data(), rows, X.cols(), n);
      } else {
        const auto& idx = *inputs[k].index;
        const int64_t c = X.cols();
        for (int64_t i = 0; i < rows; ++i) {
          const Real* xr = X.data.data() + static_cast<int64_t>(idx[i]) * c;
          Real* cr = out.data.data() + i * n;
          for (int64_t l = 0; l < c; ++l) {
            const Real a = xr[l];
            if (a == Real(0)) continue;
            const Real* w = W.data.data() + l * n;
            for (int64_t j = 0; j < n; ++j) cr[j] += a * w[j];
          }
        }
      }
    }
    Var o = result(std::move(out), ng);
    if (needs_grad(o))
      push([inputs, weights, b, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        const int64_t rows = g.rows(), n = g.cols();
        if (t.needs_grad(b)) {
          Tensor<Real>& gb = t.ensure_grad(b);
          for (int64_t i = 0; i < rows; ++i) {
            const Real* gr = g.data.data() + i * n;
            for (int64_t j = 0; j < n; ++j) gb.data[j] += gr[j];
          }
        }
        std::vector<Real> scratch;
        for (size_t k = 0; k < inputs.size(); ++k) {
          const Tensor<Real>& X = t.val(inputs[k].x);
          const Tensor<Real>& W = t.val(weights[k]);
          const int64_t c = X.cols();
          if (t.needs_grad(weights[k])) {
            Tensor<Real>& gw = t.ensure_grad(weights[k]);
            if (!inputs[k].index) {
              gemm_tn_acc(X.data.data(), g.data.data(), gw.data.data(), rows, c, n);
            } else {
              const auto& idx = *inputs[k].index;
              for (int64_t i = 0; i < rows; ++i) {
                const Real* xr = X.data.data() + static_cast<int64_t>(idx[i]) * c;
                const Real* gr = g.data.data() + i * n;
                for (int64_t l = 0; l < c; ++l) {
                  const Real a = xr[l];
                  if (a == Real(0)) continue;
                  Real* w = gw.data.data() + l * n;
                  for (int64_t j = 0; j < n; ++j) w[j] += a * gr[j];
                }
              }
            }
          }
          if (t.needs_grad(inputs[k].x)) {
            Tensor<Real>& gx = t.ensure_grad(inputs[k].x);
            if (!inputs[k].index) {
              gemm_nt_acc(g.data.data(), W.data.data(), gx.data.data(), rows, n, c, scratch);
            } else {
              // dX[idx[r], :] += g[r, :] * W^T
              Tensor<Real> tmp({rows, c});
              gemm_nt_acc(g.data.data(), W.data.data(), tmp.data.data(), rows, n, c, scratch);
              const auto& idx = *inputs[k].index;
              for (int64_t i = 0; i < rows; ++i) {
                Real* dst = gx.data.data() + static_cast<int64_t>(idx[i]) * c;
                const Real* src = tmp.data.data() + i * c;
                for (int64_t l = 0; l < c; ++l) dst[l] += src[l];
              }
            }
          }
        }
      });
    return o;
  }

  Var linear(Var x, Var w, Var b) { return linear_cat({CatInput{x, nullptr}}, {w}, b); }

  // X[m,n] + b[n] broadcast over rows (second bias of the LSTM gates).
  Var add_rowvec(Var x, Var b) { return rowvec_op(x, b, /*mul=*/false); }
  // X[m,n] * v[n] broadcast over rows.
  Var mul_rowvec(Var x, Var v) { return rowvec_op(x, v, /*mul=*/true); }

  // X[m,n] + a[m] broadcast over columns.
  Var add_colvec(Var x, Var a) {
    const Tensor<Real>&X = val(x), &A = val(a);
    MSMP_CHECK(A.numel() == X.rows(), "add_colvec: size mismatch");
    Tensor<Real> out = X;
    const int64_t n = X.cols();
    for (int64_t i = 0; i < X.rows(); ++i)
      for (int64_t j = 0; j < n; ++j) out.data[static_cast<size_t>(i * n + j)] += A.data[i];
    Var o = result(std::move(out), needs_grad(x) || needs_grad(a));
    if (needs_grad(o))
      push([x, a, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        const int64_t n = g.cols();
        if (t.needs_grad(x)) {
          Tensor<Real>& gx = t.ensure_grad(x);
          for (int64_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
        }
        if (t.needs_grad(a)) {
          Tensor<Real>& ga = t.ensure_grad(a);
          for (int64_t i = 0; i < g.rows(); ++i)
            for (int64_t j = 0; j < n; ++j) ga.data[i] += g.data[static_cast<size_t>(i * n + j)];
        }
      });
    return o;
  }

  // -- structure ops ----------------------------------------------------------

  // Sums message rows into their destination node: out[dst[e], :] += m[e, :].
  Var segment_sum(Var msgs, std::shared_ptr<const std::vector<int32_t>> dst, int64_t n_out) {
    const Tensor<Real>& M = val(msgs);
    MSMP_CHECK(static_cast<int64_t>(dst->size()) == M.rows(), "segment_sum: index size mismatch");
    const int64_t d = M.cols();
    Tensor<Real> out({n_out, d});
    for (int64_t e = 0; e < M.rows(); ++e) {
      Real* o = out.data.data() + static_cast<int64_t>((*dst)[e]) * d;
      const Real* m = M.data.data() + e * d;
      for (int64_t j = 0; j < d; ++j) o[j] += m[j];
    }
    Var o = result(std::move(out), needs_grad(msgs));
    if (needs_grad(o))
      push([msgs, dst, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(msgs)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        Tensor<Real>& gm = t.ensure_grad(msgs);
        const int64_t d = g.cols();
        for (int64_t e = 0; e < gm.rows(); ++e) {
          const Real* src = g.data.data() + static_cast<int64_t>((*dst)[e]) * d;
          Real* dstp = gm.data.data() + e * d;
          for (int64_t j = 0; j < d; ++j) dstp[j] += src[j];
        }
      });
    return o;
  }

  Var concat_cols(const std::vector<Var>& xs) {
    MSMP_CHECK(!xs.empty(), "concat_cols: empty");
    const int64_t rows = val(xs[0]).rows();
    int64_t cols = 0;
    bool ng = false;
    for (Var x : xs) {
      MSMP_CHECK(val(x).rows() == rows, "concat_cols: row mismatch");
      cols += val(x).cols();
      ng = ng || needs_grad(x);
    }
    Tensor<Real> out({rows, cols});
    int64_t off = 0;
    for (Var x : xs) {
      const Tensor<Real>& X = val(x);
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < X.cols(); ++j) out.at(i, off + j) = X.at(i, j);
      off += X.cols();
    }
    Var o = result(std::move(out), ng);
    if (needs_grad(o))
      push([xs, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        int64_t off = 0;
        for (Var x : xs) {
          const int64_t c = t.val(x).cols();
          if (t.needs_grad(x)) {
            Tensor<Real>& gx = t.ensure_grad(x);
            for (int64_t i = 0; i < g.rows(); ++i)
              for (int64_t j = 0; j < c; ++j) gx.at(i, j) += g.at(i, off + j);
          }
          off += c;
        }
      });
    return o;
  }

  // 1D convolution over x viewed as [batch, c_in, l_in] flat; w is
  // [c_out, c_in, k]. same_pad implies stride 1 and odd k.
  Var conv1d(Var x, int64_t batch, int64_t c_in, int64_t l_in, Var w, Var b, int64_t stride,
             bool same_pad) {
    const Tensor<Real>&X = val(x), &W = val(w), &B = val(b);
    MSMP_CHECK(X.numel() == batch * c_in * l_in, "conv1d: input numel mismatch");
    MSMP_CHECK(W.shape.size() == 3 && W.shape[1] == c_in, "conv1d: kernel shape mismatch");
    const int64_t c_out = W.shape[0], k = W.shape[2];
    MSMP_CHECK(B.numel() == c_out, "conv1d: bias size mismatch");
    const int64_t pad = same_pad ? (k - 1) / 2 : 0;
    if (same_pad) MSMP_CHECK(stride == 1 && k % 2 == 1, "conv1d: same padding needs stride 1, odd k");
    const int64_t l_out = same_pad ? l_in : (l_in - k) / stride + 1;
    MSMP_CHECK(l_out >= 1, "conv1d: kernel does not fit input length");
    Tensor<Real> out({batch, c_out, l_out});
    for (int64_t bi = 0; bi < batch; ++bi)
      for (int64_t co = 0; co < c_out; ++co)
        for (int64_t ol = 0; ol < l_out; ++ol) {
          Real acc = B.data[co];
          for (int64_t ci = 0; ci < c_in; ++ci) {
            const Real* xr = X.data.data() + (bi * c_in + ci) * l_in;
            const Real* wr = W.data.data() + (co * c_in + ci) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
              const int64_t il = ol * stride + kk - pad;
              if (il >= 0 && il < l_in) acc += xr[il] * wr[kk];
            }
          }
          out.data[static_cast<size_t>((bi * c_out + co) * l_out + ol)] = acc;
        }
    Var o = result(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(b));
    if (needs_grad(o))
      push([x, w, b, o, batch, c_in, l_in, stride, pad](Tape& t) {
        if (!t.grad_touched(o)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        const Tensor<Real>&X = t.val(x), &W = t.val(w);
        const int64_t c_out = W.shape[0], k = W.shape[2], l_out = g.shape[2];
        if (t.needs_grad(b)) {
          Tensor<Real>& gb = t.ensure_grad(b);
          for (int64_t bi = 0; bi < batch; ++bi)
            for (int64_t co = 0; co < c_out; ++co)
              for (int64_t ol = 0; ol < l_out; ++ol)
                gb.data[co] += g.data[static_cast<size_t>((bi * c_out + co) * l_out + ol)];
        }
        for (int64_t bi = 0; bi < batch; ++bi)
          for (int64_t co = 0; co < c_out; ++co) {
            const Real* gr = g.data.data() + (bi * c_out + co) * l_out;
            for (int64_t ci = 0; ci < c_in; ++ci) {
              const Real* xr = X.data.data() + (bi * c_in + ci) * l_in;
              const Real* wr = W.data.data() + (co * c_in + ci) * k;
              Real* gxr = t.needs_grad(x)
                              ? t.ensure_grad(x).data.data() + (bi * c_in + ci) * l_in
                              : nullptr;
              Real* gwr = t.needs_grad(w)
                              ? t.ensure_grad(w).data.data() + (co * c_in + ci) * k
                              : nullptr;
              for (int64_t ol = 0; ol < l_out; ++ol) {
                const Real gv = gr[ol];
                if (gv == Real(0)) continue;
                for (int64_t kk = 0; kk < k; ++kk) {
                  const int64_t il = ol * stride + kk - pad;
                  if (il < 0 || il >= l_in) continue;
                  if (gxr) gxr[il] += gv * wr[kk];
                  if (gwr) gwr[kk] += gv * xr[il];
                }
              }
            }
          }
      });
    return o;
  }

  Var reshape(Var a, std::vector<int64_t> shape) {
    MSMP_CHECK(Tensor<Real>::numel_of(shape) == val(a).numel(), "reshape: numel mismatch");
    Tensor<Real> out = val(a);
    out.shape = std::move(shape);
    Var o = result(std::move(out), needs_grad(a));
    if (needs_grad(o))
      push([a, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(a)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        Tensor<Real>& ga = t.ensure_grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
      });
    return o;
  }

  // -- reductions ---------------------------------------------------------

  Var sum_all(Var a) {
    const Tensor<Real>& A = val(a);
    Tensor<Real> out({1});
    Real acc = 0;
    for (Real v : A.data) acc += v;
    out.data[0] = acc;
    Var o = result(std::move(out), needs_grad(a));
    if (needs_grad(o))
      push([a, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(a)) return;
        const Real g = t.grad_of_ro(o).data[0];
        Tensor<Real>& ga = t.ensure_grad(a);
        for (auto& v : ga.data) v += g;
      });
    return o;
  }

  Var mean_all(Var a) {
    const int64_t n = val(a).numel();
    return scale(sum_all(a), Real(1) / static_cast<Real>(n));
  }

  Var sqrt_scalar(Var a) {
    MSMP_CHECK(val(a).numel() == 1, "sqrt_scalar: not a scalar");
    Tensor<Real> out({1});
    out.data[0] = std::sqrt(val(a).data[0]);
    Var o = result(std::move(out), needs_grad(a));
    if (needs_grad(o))
      push([a, o](Tape& t) {
        if (!t.grad_touched(o)) return;
        if (!t.needs_grad(a)) return;
        const Real y = t.val(o).data[0];
        // Subgradient 0 at y == 0 keeps an exactly-zero loss from poisoning
        // downstream zeros with inf * 0.
        const Real d = y > Real(0) ? t.grad_of_ro(o).data[0] / (Real(2) * y) : Real(0);
        t.ensure_grad(a).data[0] += d;
      });
    return o;
  }

  static Real stable_sigmoid(Real x) {
    if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
    const Real e = std::exp(x);
    return e / (Real(1) + e);
  }

 private:
  struct Slot {
    Tensor<Real> value;
    const Tensor<Real>* external = nullptr;
    Tensor<Real> grad;
    bool needs_grad = false;
    bool grad_ready = false;
  };

  Tensor<Real>& ensure_grad(Var v) {
    Slot& s = slots_[static_cast<size_t>(v)];
    if (!s.grad_ready) {
      s.grad = Tensor<Real>::zeros(val(v).shape);
      s.grad_ready = true;
    }
    return s.grad;
  }

  // Read-only adjoint access in closures; untouched adjoints read as zeros.
  const Tensor<Real>& grad_of_ro(Var v) { return ensure_grad(v); }

  Var result(Tensor<Real> value, bool needs_grad) {
    slots_.push_back(Slot{std::move(value), nullptr, {}, needs_grad, false});
    return static_cast<Var>(slots_.size() - 1);
  }

  void push(std::function<void(Tape&)> fn) { nodes_.push_back(std::move(fn)); }

  Var binary(Var a, Var b, bool is_sub) {
    const Tensor<Real>&A = val(a), &B = val(b);
    MSMP_CHECK(A.same_shape(B), std::string(is_sub ? "sub" : "add") + ": shape mismatch " +
                               A.shape_str() + " vs " + B.shape_str());
    Tensor<Real> out = A;
    if (is_sub)
      for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= B.data[i];
    else
      for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
    Var o = result(std::move(out), needs_grad(a) || needs_grad(b));
    if (needs_grad(o))
      push([a, b, o, is_sub](Tape& t) {
        if (!t.grad_touched(o)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        if (t.needs_grad(a)) {
          Tensor<Real>& ga = t.ensure_grad(a);
          for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
        }
        if (t.needs_grad(b)) {
          Tensor<Real>& gb = t.ensure_grad(b);
          if (is_sub)
            for (int64_t i = 0; i < g.numel(); ++i) gb.data[i] -= g.data[i];
          else
            for (int64_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
        }
      });
    return o;
  }

  Var rowvec_op(Var x, Var v, bool is_mul) {
    const Tensor<Real>&X = val(x), &V = val(v);
    MSMP_CHECK(V.numel() == X.cols(), std::string(is_mul ? "mul" : "add") + "_rowvec: size mismatch " +
                                     X.shape_str() + " vs " + V.shape_str());
    Tensor<Real> out = X;
    const int64_t n = X.cols();
    for (int64_t i = 0; i < X.rows(); ++i)
      for (int64_t j = 0; j < n; ++j) {
        Real& e = out.data[static_cast<size_t>(i * n + j)];
        if (is_mul)
          e *= V.data[j];
        else
          e += V.data[j];
      }
    Var o = result(std::move(out), needs_grad(x) || needs_grad(v));
    if (needs_grad(o))
      push([x, v, o, is_mul](Tape& t) {
        if (!t.grad_touched(o)) return;
        const Tensor<Real>& g = t.grad_of_ro(o);
        const int64_t n = g.cols();
        if (t.needs_grad(x)) {
          Tensor<Real>& gx = t.ensure_grad(x);
          if (is_mul) {
            const Tensor<Real>& V = t.val(v);
            for (int64_t i = 0; i < g.rows(); ++i)
              for (int64_t j = 0; j < n; ++j)
                gx.data[static_cast<size_t>(i * n + j)] +=
                    g.data[static_cast<size_t>(i * n + j)] * V.data[j];
          } else {
            for (int64_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
          }
        }
        if (t.needs_grad(v)) {
          Tensor<Real>& gv = t.ensure_grad(v);
          const Tensor<Real>& X = t.val(x);
          for (int64_t i = 0; i < g.rows(); ++i)
            for (int64_t j = 0; j < n; ++j) {
              const Real gij = g.data[static_cast<size_t>(i * n + j)];
              gv.data[j] += is_mul ? gij * X.data[static_cast<size_t>(i * n + j)] : gij;
            }
        }
      });
    return o;
  }

  std::vector<Slot> slots_;
  std::vector<std::function<void(Tape&)>> nodes_;
};

}  // namespace msmp
