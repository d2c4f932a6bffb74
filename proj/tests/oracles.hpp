// Test-only straight-line transcriptions of the model equations, written
// with plain loops against the named parameter tensors. They share nothing
// with the tape-based forward pass they verify.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "msmp/graph.hpp"
#include "msmp/params.hpp"
#include "msmp/tensor.hpp"

namespace oracle {

using msmp::GraphTopology;
using msmp::ParamStore;
using msmp::Tensor;

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double swish(double x) { return x * sig(x); }

// y = x * W + b for one row vector.
inline std::vector<double> affine_row(const std::vector<double>& x, const Tensor<double>& W,
                                      const Tensor<double>& b) {
  std::vector<double> y(b.data.begin(), b.data.end());
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t o = 0; o < y.size(); ++o)
      y[o] += x[i] * W.data[i * y.size() + o];
  return y;
}

inline void add_affine_row(std::vector<double>& acc, const std::vector<double>& x,
                           const Tensor<double>& W) {
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t o = 0; o < acc.size(); ++o)
      acc[o] += x[i] * W.data[i * acc.size() + o];
}

struct LemVecs {
  std::vector<double> z, y;
};

// The two-gate LEM update, line by line: both gate pre-activations read
// y_{n-1}; z_n updates first and the fresh z_n feeds the y_n candidate.
inline LemVecs lem_step(const ParamStore<double>& ps, const std::string& p,
                        const std::vector<double>& z, const std::vector<double>& y,
                        const std::vector<double>& u, double dt) {
  auto pre = [&](const char* g) {
    std::vector<double> a = affine_row(y, ps.tensor(p + ".W" + g), ps.tensor(p + ".b" + g));
    add_affine_row(a, u, ps.tensor(p + ".V" + g));
    return a;
  };
  const size_t h = y.size();
  std::vector<double> dt1 = pre("1"), dt2 = pre("2"), zc = pre("z");
  for (size_t i = 0; i < h; ++i) {
    dt1[i] = dt * sig(dt1[i]);
    dt2[i] = dt * sig(dt2[i]);
    zc[i] = std::tanh(zc[i]);
  }
  LemVecs out;
  out.z.resize(h);
  for (size_t i = 0; i < h; ++i) out.z[i] = (1.0 - dt1[i]) * z[i] + dt1[i] * zc[i];
  std::vector<double> yc = affine_row(out.z, ps.tensor(p + ".Wy"), ps.tensor(p + ".by"));
  add_affine_row(yc, u, ps.tensor(p + ".Vy"));
  out.y.resize(h);
  for (size_t i = 0; i < h; ++i) out.y[i] = (1.0 - dt2[i]) * y[i] + dt2[i] * std::tanh(yc[i]);
  return out;
}

struct LstmVecs {
  std::vector<double> h, c;
};

// Textbook LSTM with separate input-side and hidden-side biases per gate.
inline LstmVecs lstm_step(const ParamStore<double>& ps, const std::string& p,
                          const std::vector<double>& h, const std::vector<double>& c,
                          const std::vector<double>& u) {
  auto pre = [&](const char* g) {
    std::vector<double> a =
        affine_row(u, ps.tensor(p + ".Wx_" + g), ps.tensor(p + ".bx_" + g));
    add_affine_row(a, h, ps.tensor(p + ".Wh_" + g));
    const Tensor<double>& bh = ps.tensor(p + ".bh_" + g);
    for (size_t i = 0; i < a.size(); ++i) a[i] += bh.data[i];
    return a;
  };
  std::vector<double> gi = pre("i"), gf = pre("f"), gg = pre("g"), go = pre("o");
  const size_t n = h.size();
  LstmVecs out;
  out.h.resize(n);
  out.c.resize(n);
  for (size_t i = 0; i < n; ++i) {
    out.c[i] = sig(gf[i]) * c[i] + sig(gi[i]) * std::tanh(gg[i]);
    out.h[i] = sig(go[i]) * std::tanh(out.c[i]);
  }
  return out;
}

// One message-passing network: per edge j -> i the message input is
// [X_i, X_j, u_i - u_j, x_i - x_j, eta]; messages pass through
// Linear-Swish-Linear-Swish, sum into destinations, and the node update
// [X_i, sum, eta] passes through Linear-Swish-Linear.
inline Tensor<double> mpnn(const ParamStore<double>& ps, const std::string& p,
                           const GraphTopology& g, const Tensor<double>& X,
                           const Tensor<double>& window, const std::vector<double>& eta) {
  const int64_t N = g.n_nodes, H = X.cols(), WC = window.cols();
  Tensor<double> agg({N, H});
  for (int64_t e = 0; e < g.n_edges(); ++e) {
    const int32_t i = (*g.dst)[static_cast<size_t>(e)], j = (*g.src)[static_cast<size_t>(e)];
    std::vector<double> min;
    for (int64_t q = 0; q < H; ++q) min.push_back(X.at(i, q));
    for (int64_t q = 0; q < H; ++q) min.push_back(X.at(j, q));
    for (int64_t q = 0; q < WC; ++q) min.push_back(window.at(i, q) - window.at(j, q));
    min.push_back(g.rel_pos(i, j));
    for (double e2 : eta) min.push_back(e2);
    // first phi weight is stored in blocks (X_i | X_j | edge features)
    std::vector<double> m1(ps.tensor(p + ".phi.b0").data.begin(),
                           ps.tensor(p + ".phi.b0").data.end());
    add_affine_row(m1, std::vector<double>(min.begin(), min.begin() + H),
                   ps.tensor(p + ".phi.W0xi"));
    add_affine_row(m1, std::vector<double>(min.begin() + H, min.begin() + 2 * H),
                   ps.tensor(p + ".phi.W0xj"));
    add_affine_row(m1, std::vector<double>(min.begin() + 2 * H, min.end()),
                   ps.tensor(p + ".phi.W0e"));
    for (auto& v : m1) v = swish(v);
    std::vector<double> m2 = affine_row(m1, ps.tensor(p + ".phi.W1"), ps.tensor(p + ".phi.b1"));
    for (auto& v : m2) v = swish(v);
    for (int64_t q = 0; q < H; ++q) agg.at(i, q) += m2[static_cast<size_t>(q)];
  }
  Tensor<double> out({N, H});
  for (int64_t i = 0; i < N; ++i) {
    std::vector<double> u1(ps.tensor(p + ".psi.b0").data.begin(),
                           ps.tensor(p + ".psi.b0").data.end());
    std::vector<double> xi, ai;
    for (int64_t q = 0; q < H; ++q) xi.push_back(X.at(i, q));
    for (int64_t q = 0; q < H; ++q) ai.push_back(agg.at(i, q));
    add_affine_row(u1, xi, ps.tensor(p + ".psi.W0x"));
    add_affine_row(u1, ai, ps.tensor(p + ".psi.W0a"));
    if (!eta.empty()) add_affine_row(u1, eta, ps.tensor(p + ".psi.W0e"));
    for (auto& v : u1) v = swish(v);
    std::vector<double> u2 = affine_row(u1, ps.tensor(p + ".psi.W1"), ps.tensor(p + ".psi.b1"));
    for (int64_t q = 0; q < H; ++q) out.at(i, q) = u2[static_cast<size_t>(q)];
  }
  return out;
}

// X^n = (1 - sig(F_gate(X))) . X + sig(F_gate(X)) . tanh(F_main(X))
inline Tensor<double> gated_layer(const ParamStore<double>& ps, const std::string& base,
                                  const GraphTopology& g, const Tensor<double>& X,
                                  const Tensor<double>& window, const std::vector<double>& eta) {
  Tensor<double> fm = mpnn(ps, base + ".main", g, X, window, eta);
  Tensor<double> fg = mpnn(ps, base + ".gate", g, X, window, eta);
  Tensor<double> out({X.rows(), X.cols()});
  for (int64_t i = 0; i < X.numel(); ++i) {
    const double gate = sig(fg.data[static_cast<size_t>(i)]);
    out.data[static_cast<size_t>(i)] =
        (1.0 - gate) * X.data[static_cast<size_t>(i)] +
        gate * std::tanh(fm.data[static_cast<size_t>(i)]);
  }
  return out;
}

}  // namespace oracle
