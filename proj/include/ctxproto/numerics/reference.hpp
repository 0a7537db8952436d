#pragma once

// Straightforward re-implementations of the kernels, generic over the scalar
// type. Instantiated with Quad they serve as the finite-difference oracle;
// instantiated with long double they serve as forward-value oracles in tests.
// No counters, no validation beyond what indexing needs.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/multiprecision/float128.hpp>

#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::reference {

using Quad = boost::multiprecision::float128;

template <class T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, T(0)) {}
  T& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::span<T> row(std::size_t r) { return {v.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {v.data() + r * cols, cols}; }
};

template <class T>
Mat<T> lift(const numerics::DenseMatrix& m) {
  Mat<T> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.v[i] = T(m.data()[i]);
  return out;
}

template <class T>
Mat<T> lift(std::span<const T> flat, std::size_t rows, std::size_t cols) {
  Mat<T> out(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) out.v[i] = flat[i];
  return out;
}

template <class T>
std::vector<T> lift_vec(std::span<const double> x) {
  return std::vector<T>(x.begin(), x.end());
}

// ---- scalar functions ------------------------------------------------------

template <class T>
T sigmoid(const T& x) {
  using std::exp;
  return T(1) / (T(1) + exp(-x));
}

template <class T>
T relu(const T& x) {
  return x > T(0) ? x : T(0);
}

// ---- products --------------------------------------------------------------

template <class T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  Mat<T> c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      T acc(0);
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  return c;
}

// a * transpose(b)
template <class T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b) {
  Mat<T> c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      T acc(0);
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      c(i, j) = acc;
    }
  return c;
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T acc(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// sum_ij y(i,j) * w(i,j)
template <class T>
T contract(const Mat<T>& y, const numerics::DenseMatrix& w) {
  T acc(0);
  for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * T(w.data()[i]);
  return acc;
}

template <class T>
T contract(std::span<const T> y, std::span<const double> w) {
  T acc(0);
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * T(w[i]);
  return acc;
}

template <class T>
std::vector<T> affine(const Mat<T>& w, std::span<const T> x, std::span<const T> b) {
  std::vector<T> y(w.rows);
  for (std::size_t i = 0; i < w.rows; ++i) y[i] = dot<T>(w.row(i), x) + b[i];
  return y;
}

// X W^T + 1 b^T
template <class T>
Mat<T> affine_rows(const Mat<T>& x, const Mat<T>& w, std::span<const T> b) {
  Mat<T> y = matmul_nt(x, w);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += b[j];
  return y;
}

template <class T>
Mat<T> concat_cols(const Mat<T>& a, const Mat<T>& b) {
  Mat<T> out(a.rows, a.cols + b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols; ++j) out(i, a.cols + j) = b(i, j);
  }
  return out;
}

template <class T, class F>
Mat<T> map(const Mat<T>& x, F f) {
  Mat<T> y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = f(x.v[i]);
  return y;
}

// ---- softmax ---------------------------------------------------------------

template <class T>
Mat<T> softmax_rows(const Mat<T>& x) {
  using std::exp;
  Mat<T> y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    T peak = x(i, 0);
    for (std::size_t j = 1; j < x.cols; ++j)
      if (x(i, j) > peak) peak = x(i, j);
    T sum(0);
    for (std::size_t j = 0; j < x.cols; ++j) {
      y(i, j) = exp(x(i, j) - peak);
      sum += y(i, j);
    }
    for (std::size_t j = 0; j < x.cols; ++j) y(i, j) /= sum;
  }
  return y;
}

// ---- layer norm ------------------------------------------------------------

template <class T>
std::vector<T> layer_norm(std::span<const T> x, std::span<const T> gain, std::span<const T> bias,
                          double epsilon) {
  using std::sqrt;
  const T n(static_cast<double>(x.size()));
  T mean(0);
  for (const T& v : x) mean += v;
  mean /= n;
  T var(0);
  for (const T& v : x) var += (v - mean) * (v - mean);
  var /= n;
  const T inv = T(1) / sqrt(var + T(epsilon));
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gain[i] * (x[i] - mean) * inv + bias[i];
  return y;
}

template <class T>
Mat<T> layer_norm_rows(const Mat<T>& x, std::span<const T> gain, std::span<const T> bias,
                       double epsilon) {
  Mat<T> y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = layer_norm<T>(x.row(i), gain, bias, epsilon);
    for (std::size_t j = 0; j < x.cols; ++j) y(i, j) = r[j];
  }
  return y;
}

// ---- GRU cell (gate blocks r, z, n) ---------------------------------------

template <class T>
struct Gru {
  Mat<T> input_weight;   // 3d x d_in
  Mat<T> hidden_weight;  // 3d x d
  std::vector<T> input_bias;
  std::vector<T> hidden_bias;
};

template <class T>
std::vector<T> gru_cell(std::span<const T> x, std::span<const T> h, const Gru<T>& w) {
  using std::tanh;
  const std::size_t d = h.size();
  const auto gi = affine<T>(w.input_weight, x, w.input_bias);
  const auto gh = affine<T>(w.hidden_weight, h, w.hidden_bias);
  std::vector<T> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    const T r = sigmoid(gi[i] + gh[i]);
    const T z = sigmoid(gi[d + i] + gh[d + i]);
    const T n = tanh(gi[2 * d + i] + r * gh[2 * d + i]);
    out[i] = (T(1) - z) * n + z * h[i];
  }
  return out;
}

// ---- norms and similarities ------------------------------------------------

template <class T>
T l2_norm(std::span<const T> x) {
  using std::sqrt;
  return sqrt(dot<T>(x, x));
}

template <class T>
std::vector<T> l2_normalize(std::span<const T> x) {
  const T norm = l2_norm<T>(x);
  std::vector<T> y(x.size(), T(0));
  if (norm == T(0)) return y;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / norm;
  return y;
}

template <class T>
Mat<T> l2_normalize_rows(const Mat<T>& x) {
  Mat<T> y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = l2_normalize<T>(x.row(i));
    for (std::size_t j = 0; j < x.cols; ++j) y(i, j) = r[j];
  }
  return y;
}

template <class T>
T squared_distance(std::span<const T> a, std::span<const T> b) {
  T acc(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

template <class T>
T cosine_similarity(std::span<const T> a, std::span<const T> b) {
  const T na = l2_norm<T>(a), nb = l2_norm<T>(b);
  if (na == T(0) || nb == T(0)) return T(0);
  return dot<T>(a, b) / (na * nb);
}

// ---- attention -------------------------------------------------------------

template <class T>
Mat<T> cross_attention(const Mat<T>& query_source, const Mat<T>& key_source, const Mat<T>& wq,
                       const Mat<T>& wk, const Mat<T>& wv) {
  using std::sqrt;
  const Mat<T> q = matmul_nt(query_source, wq);
  const Mat<T> k = matmul_nt(key_source, wk);
  const Mat<T> v = matmul_nt(key_source, wv);
  Mat<T> scores = matmul_nt(q, k);
  const T scale = T(1) / sqrt(T(static_cast<double>(q.cols)));
  for (auto& s : scores.v) s *= scale;
  return matmul(softmax_rows(scores), v);
}

}  // namespace ctxproto::reference
