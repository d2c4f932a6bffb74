#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace msmp {

// Named parameter tensors with a stable flat-vector view. Entry order is
// insertion order and defines the flat layout, the optimizer state layout,
// and the checkpoint payload layout.
template <class Real>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<Real> tensor;
    int64_t fan_in = 1;
  };

  Tensor<Real>& add(const std::string& name, std::vector<int64_t> shape, int64_t fan_in) {
    check(index_.find(name) == index_.end(), "ParamStore: duplicate parameter " + name);
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, Tensor<Real>::zeros(std::move(shape)), fan_in});
    return entries_.back().tensor;
  }

  int64_t total_count() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
  }

  size_t size() const { return entries_.size(); }
  Entry& entry(size_t i) { return entries_[i]; }
  const Entry& entry(size_t i) const { return entries_[i]; }

  Tensor<Real>& tensor(const std::string& name) {
    auto it = index_.find(name);
    check(it != index_.end(), "ParamStore: unknown parameter " + name);
    return entries_[it->second].tensor;
  }
  const Tensor<Real>& tensor(const std::string& name) const {
    return const_cast<ParamStore*>(this)->tensor(name);
  }
  size_t entry_index(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), "ParamStore: unknown parameter " + name);
    return it->second;
  }

  // Every weight and bias is drawn U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
  void init_uniform(uint64_t seed) {
    Rng rng(derive_seed(seed, {0x57u}));
    for (auto& e : entries_) {
      const double s = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
      for (auto& v : e.tensor.data) v = static_cast<Real>(rng.uniform(-s, s));
    }
  }

  std::vector<Real> flat() const {
    std::vector<Real> out;
    out.reserve(static_cast<size_t>(total_count()));
    for (const auto& e : entries_) out.insert(out.end(), e.tensor.data.begin(), e.tensor.data.end());
    return out;
  }

  void set_flat(const std::vector<Real>& flat) {
    check(static_cast<int64_t>(flat.size()) == total_count(), "ParamStore: flat size mismatch");
    size_t off = 0;
    for (auto& e : entries_) {
      std::copy(flat.begin() + off, flat.begin() + off + e.tensor.data.size(),
                e.tensor.data.begin());
      off += e.tensor.data.size();
    }
  }

  template <class To>
  ParamStore<To> cast() const {
    ParamStore<To> out;
    for (const auto& e : entries_) {
      auto& t = out.add(e.name, e.tensor.shape, e.fan_in);
      for (size_t i = 0; i < e.tensor.data.size(); ++i)
        t.data[i] = static_cast<To>(e.tensor.data[i]);
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// Parameters registered as leaves on one tape. Rebind per forward/backward.
template <class Real>
struct BoundParams {
  const ParamStore<Real>* store = nullptr;
  std::vector<Var> vars;

  Var var(const std::string& name) const { return vars[store->entry_index(name)]; }
};

template <class Real>
BoundParams<Real> bind_params(Tape<Real>& tape, const ParamStore<Real>& ps) {
  BoundParams<Real> bp;
  bp.store = &ps;
  bp.vars.reserve(ps.size());
  for (size_t i = 0; i < ps.size(); ++i)
    bp.vars.push_back(tape.leaf_ref(&ps.entry(i).tensor, /*needs_grad=*/true));
  return bp;
}

// Adjoints of every parameter in flat order; parameters the loss never
// reached (detached subgraphs) contribute zeros.
template <class Real>
std::vector<Real> collect_param_grads(Tape<Real>& tape, const BoundParams<Real>& bp) {
  std::vector<Real> out;
  out.reserve(static_cast<size_t>(bp.store->total_count()));
  for (size_t i = 0; i < bp.store->size(); ++i) {
    const Tensor<Real>& g = tape.grad_of(bp.vars[i]);
    out.insert(out.end(), g.data.begin(), g.data.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference verification of reverse-mode gradients (f64 only; the
// comparison is meaningless in f32).
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
};

// forward: (Tape<double>&, const BoundParams<double>&) -> Var (scalar).
// Checks min(coords_per_tensor, numel) random coordinates of every tensor
// plus every coordinate of every bias (1-D) vector against central
// differences. Relative error uses an absolute floor so that near-zero
// gradient pairs (both below FD noise) do not register as spurious error.
template <class Forward>
GradCheckReport grad_check(ParamStore<double>& ps, Forward&& forward, uint64_t seed,
                           int coords_per_tensor = 64, double h = 1e-4) {
  std::vector<double> analytic;
  {
    Tape<double> tape;
    BoundParams<double> bp = bind_params(tape, ps);
    Var loss = forward(tape, bp);
    tape.backward(loss);
    analytic = collect_param_grads(tape, bp);
  }
  auto eval = [&]() {
    Tape<double> tape;
    BoundParams<double> bp = bind_params(tape, ps);
    return tape.val(forward(tape, bp)).data[0];
  };
  GradCheckReport rep;
  Rng rng(derive_seed(seed, {0x9cu}));
  size_t flat_off = 0;
  for (size_t ei = 0; ei < ps.size(); ++ei) {
    auto& e = ps.entry(ei);
    const int64_t n = e.tensor.numel();
    std::vector<int64_t> picks;
    if (e.tensor.shape.size() <= 1 || n <= coords_per_tensor) {
      picks.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) picks[static_cast<size_t>(i)] = i;
    } else {
      std::vector<char> seen(static_cast<size_t>(n), 0);
      while (static_cast<int>(picks.size()) < coords_per_tensor) {
        int64_t i = rng.uniform_int(0, n - 1);
        if (!seen[static_cast<size_t>(i)]) {
          seen[static_cast<size_t>(i)] = 1;
          picks.push_back(i);
        }
      }
    }
    for (int64_t i : picks) {
      double& theta = e.tensor.data[static_cast<size_t>(i)];
      const double save = theta;
      theta = save + h;
      const double fp = eval();
      theta = save - h;
      const double fm = eval();
      theta = save;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = analytic[flat_off + static_cast<size_t>(i)];
      const double denom = std::max({std::fabs(ad), std::fabs(fd), 1e-3});
      const double rel = std::fabs(ad - fd) / denom;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = e.name;
        rep.worst_index = i;
      }
    }
    flat_off += static_cast<size_t>(n);
  }
  return rep;
}

}  // namespace msmp
