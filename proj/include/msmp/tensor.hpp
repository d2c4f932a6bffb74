#pragma once

#include <cstdint>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace msmp {

// Dense row-major tensor. Real is float in training mode and double in
// verification mode; the whole model stack is templated on it.
template <class Real>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), Real(0));
  }

  static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int64_t> s, Real v) {
    Tensor t(std::move(s));
    for (auto& e : t.data) e = v;
    return t;
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool empty() const { return data.empty(); }

  int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
  int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  Real& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  Real at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
  }

  bool all_finite() const {
    for (Real v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <class To>
  Tensor<To> cast() const {
    Tensor<To> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<To>(data[i]);
    return out;
  }
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

// Hot-path variant: the message expression is only evaluated on failure.
#define MSMP_CHECK(cond, msg)                       \
  do {                                              \
    if (!(cond)) throw std::runtime_error(msg);     \
  } while (0)

// ---------------------------------------------------------------------------
// Matrix kernels. All three are written in axpy/broadcast form so they
// vectorize without float reassociation (no -ffast-math required).
// ---------------------------------------------------------------------------

// C[m,n] += A[m,k] * B[k,n]
template <class Real>
void gemm_acc(const Real* A, const Real* B, Real* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const Real* a = A + i * k;
    Real* c = C + i * n;
    for (int64_t l = 0; l < k; ++l) {
      const Real al = a[l];
      if (al == Real(0)) continue;
      const Real* b = B + l * n;
      for (int64_t j = 0; j < n; ++j) c[j] += al * b[j];
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
template <class Real>
void gemm_tn_acc(const Real* A, const Real* B, Real* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const Real* a = A + i * k;
    const Real* b = B + i * n;
    for (int64_t l = 0; l < k; ++l) {
      const Real al = a[l];
      if (al == Real(0)) continue;
      Real* c = C + l * n;
      for (int64_t j = 0; j < n; ++j) c[j] += al * b[j];
    }
  }
}

// B[n,m] = A[m,n]^T
template <class Real>
void transpose(const Real* A, Real* B, int64_t m, int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) B[j * m + i] = A[i * n + j];
}

// C[m,k] += A[m,n] * B[k,n]^T, implemented via an explicit transpose of B.
template <class Real>
void gemm_nt_acc(const Real* A, const Real* B, Real* C, int64_t m, int64_t n, int64_t k,
                 std::vector<Real>& scratch) {
  scratch.resize(static_cast<size_t>(n * k));
  transpose(B, scratch.data(), k, n);
  gemm_acc(A, scratch.data(), C, m, n, k);
}

}  // namespace msmp
