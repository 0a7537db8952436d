#include "ctxproto/numerics/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ctxproto/error.hpp"
#include "ctxproto/numerics/op_counter.hpp"

namespace ctxproto::numerics {

namespace {

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(fmt::format("{}: length {} does not match expected {}", what, got, want));
  }
}

template <typename F>
DenseMatrix map_elements(const DenseMatrix& x, F f) {
  DenseMatrix y(x.rows(), x.cols());
  const auto& in = x.data();
  auto& out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  detail::record_elementwise(in.size());
  return y;
}

template <typename F>
DenseMatrix zip_elements(const DenseMatrix& x, const DenseMatrix& dy, const char* what, F f) {
  require_same_shape(x, dy, what);
  DenseMatrix dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) dx.data()[i] = f(x.data()[i], dy.data()[i]);
  detail::record_elementwise(x.size());
  return dx;
}

}  // namespace

// ---- matrix products -------------------------------------------------------

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError(
        fmt::format("matmul: cannot multiply {} by {}", a.shape_string(), b.shape_string()));
  }
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  detail::record_mul_adds(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.cols());
  return c;
}

MatmulGrads matmul_backward(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& dc) {
  if (dc.rows() != a.rows() || dc.cols() != b.cols()) {
    throw DimensionError(fmt::format("matmul_backward: upstream {} inconsistent with {} x {}",
                                     dc.shape_string(), a.shape_string(), b.shape_string()));
  }
  return {matmul_nt(dc, b), matmul(transpose(a), dc)};
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError(fmt::format("matmul_nt: cannot multiply {} by transpose of {}",
                                     a.shape_string(), b.shape_string()));
  }
  DenseMatrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  detail::record_mul_adds(static_cast<std::uint64_t>(a.rows()) * b.rows() * a.cols());
  return c;
}

MatmulGrads matmul_nt_backward(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& dc) {
  if (dc.rows() != a.rows() || dc.cols() != b.rows()) {
    throw DimensionError(fmt::format("matmul_nt_backward: upstream {} inconsistent with {} x {}^T",
                                     dc.shape_string(), a.shape_string(), b.shape_string()));
  }
  // C = A B^T  =>  dA = dC B,  dB = dC^T A
  return {matmul(dc, b), matmul(transpose(dc), a)};
}

// ---- softmax ---------------------------------------------------------------

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  if (logits.cols() == 0) {
    throw DegenerateInputError("softmax_rows: rows have no columns");
  }
  DenseMatrix probs(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto out = probs.row(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - peak);
      total += out[c];
    }
    for (double& v : out) v /= total;
  }
  detail::record_elementwise(logits.size());
  return probs;
}

DenseMatrix softmax_rows_backward(const DenseMatrix& probs, const DenseMatrix& dprobs) {
  require_same_shape(probs, dprobs, "softmax_rows_backward");
  DenseMatrix dlogits(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto y = probs.row(r);
    auto dy = dprobs.row(r);
    double inner = 0.0;
    for (std::size_t c = 0; c < y.size(); ++c) inner += y[c] * dy[c];
    auto dx = dlogits.row(r);
    for (std::size_t c = 0; c < y.size(); ++c) dx[c] = y[c] * (dy[c] - inner);
  }
  detail::record_elementwise(probs.size());
  return dlogits;
}

// ---- elementwise -----------------------------------------------------------

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DenseMatrix sigmoid(const DenseMatrix& x) {
  return map_elements(x, [](double v) { return sigmoid(v); });
}

DenseMatrix sigmoid_backward(const DenseMatrix& x, const DenseMatrix& dy) {
  return zip_elements(x, dy, "sigmoid_backward", [](double v, double g) {
    const double s = sigmoid(v);
    return g * s * (1.0 - s);
  });
}

DenseMatrix tanh(const DenseMatrix& x) {
  return map_elements(x, [](double v) { return std::tanh(v); });
}

DenseMatrix tanh_backward(const DenseMatrix& x, const DenseMatrix& dy) {
  return zip_elements(x, dy, "tanh_backward", [](double v, double g) {
    const double t = std::tanh(v);
    return g * (1.0 - t * t);
  });
}

DenseMatrix relu(const DenseMatrix& x) {
  return map_elements(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

DenseMatrix relu_backward(const DenseMatrix& x, const DenseMatrix& dy) {
  return zip_elements(x, dy, "relu_backward",
                      [](double v, double g) { return v > 0.0 ? g : 0.0; });
}

// ---- vector ops ------------------------------------------------------------

Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::pair<Vector, Vector> concat_backward(std::span<const double> dy, std::size_t a_len) {
  if (a_len > dy.size()) {
    throw DimensionError(
        fmt::format("concat_backward: split point {} beyond length {}", a_len, dy.size()));
  }
  return {Vector(dy.begin(), dy.begin() + static_cast<std::ptrdiff_t>(a_len)),
          Vector(dy.begin() + static_cast<std::ptrdiff_t>(a_len), dy.end())};
}

DenseMatrix concat_cols(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError(fmt::format("concat_cols: row counts differ ({} vs {})",
                                     a.shape_string(), b.shape_string()));
  }
  DenseMatrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

std::pair<DenseMatrix, DenseMatrix> concat_cols_backward(const DenseMatrix& dy,
                                                         std::size_t a_cols) {
  if (a_cols > dy.cols()) {
    throw DimensionError("concat_cols_backward: split point beyond width");
  }
  DenseMatrix da(dy.rows(), a_cols);
  DenseMatrix db(dy.rows(), dy.cols() - a_cols);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto src = dy.row(r);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(a_cols), da.row(r).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(a_cols), src.end(), db.row(r).begin());
  }
  return {std::move(da), std::move(db)};
}

Vector affine(const DenseMatrix& weight, std::span<const double> x, std::span<const double> bias) {
  require_length(x.size(), weight.cols(), "affine input");
  require_length(bias.size(), weight.rows(), "affine bias");
  Vector y(weight.rows());
  for (std::size_t r = 0; r < weight.rows(); ++r) {
    auto w = weight.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) acc += w[c] * x[c];
    y[r] = acc + bias[r];
  }
  detail::record_mul_adds(static_cast<std::uint64_t>(weight.rows()) * weight.cols());
  return y;
}

AffineGrads affine_backward(const DenseMatrix& weight, std::span<const double> x,
                            std::span<const double> dy) {
  require_length(x.size(), weight.cols(), "affine_backward input");
  require_length(dy.size(), weight.rows(), "affine_backward upstream");
  AffineGrads g{DenseMatrix(weight.rows(), weight.cols()), Vector(x.size(), 0.0),
                Vector(dy.begin(), dy.end())};
  for (std::size_t r = 0; r < weight.rows(); ++r) {
    auto w = weight.row(r);
    auto dw = g.dweight.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) {
      dw[c] = dy[r] * x[c];
      g.dx[c] += w[c] * dy[r];
    }
  }
  detail::record_mul_adds(2ULL * weight.rows() * weight.cols());
  return g;
}

DenseMatrix affine_rows(const DenseMatrix& x, const DenseMatrix& weight,
                        std::span<const double> bias) {
  require_length(bias.size(), weight.rows(), "affine_rows bias");
  DenseMatrix y = matmul_nt(x, weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
  return y;
}

AffineRowsGrads affine_rows_backward(const DenseMatrix& x, const DenseMatrix& weight,
                                     const DenseMatrix& dy) {
  auto [dx, dw] = matmul_nt_backward(x, weight, dy);
  Vector db(weight.rows(), 0.0);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto row = dy.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
  }
  return {std::move(dx), std::move(dw), std::move(db)};
}

// ---- layer norm ------------------------------------------------------------

namespace {

struct Moments {
  double mean;
  double inv_std;
};

Moments moments(std::span<const double> x, double epsilon) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  return {mean, 1.0 / std::sqrt(var + epsilon)};
}

void check_layer_norm_args(std::size_t n, std::size_t gain, std::size_t bias, double epsilon) {
  if (n == 0) throw DegenerateInputError("layer_norm: empty input");
  require_length(gain, n, "layer_norm gain");
  require_length(bias, n, "layer_norm bias");
  if (!(epsilon > 0.0)) throw DegenerateInputError("layer_norm: epsilon must be positive");
}

}  // namespace

Vector layer_norm(std::span<const double> x, std::span<const double> gain,
                  std::span<const double> bias, double epsilon) {
  check_layer_norm_args(x.size(), gain.size(), bias.size(), epsilon);
  const Moments m = moments(x, epsilon);
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gain[i] * (x[i] - m.mean) * m.inv_std + bias[i];
  detail::record_elementwise(3 * x.size());
  return y;
}

LayerNormGrads layer_norm_backward(std::span<const double> x, std::span<const double> gain,
                                   std::span<const double> dy, double epsilon) {
  check_layer_norm_args(x.size(), gain.size(), dy.size(), epsilon);
  const std::size_t n = x.size();
  const Moments m = moments(x, epsilon);
  LayerNormGrads g{Vector(n), Vector(n), Vector(dy.begin(), dy.end())};
  Vector xhat(n), dxhat(n);
  double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xhat[i] = (x[i] - m.mean) * m.inv_std;
    dxhat[i] = dy[i] * gain[i];
    g.dgain[i] = dy[i] * xhat[i];
    mean_dxhat += dxhat[i];
    mean_dxhat_xhat += dxhat[i] * xhat[i];
  }
  mean_dxhat /= static_cast<double>(n);
  mean_dxhat_xhat /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.dx[i] = m.inv_std * (dxhat[i] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
  }
  detail::record_elementwise(6 * n);
  return g;
}

DenseMatrix layer_norm_rows(const DenseMatrix& x, std::span<const double> gain,
                            std::span<const double> bias, double epsilon) {
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) y.set_row(r, layer_norm(x.row(r), gain, bias, epsilon));
  return y;
}

LayerNormRowsGrads layer_norm_rows_backward(const DenseMatrix& x, std::span<const double> gain,
                                            const DenseMatrix& dy, double epsilon) {
  require_same_shape(x, dy, "layer_norm_rows_backward");
  LayerNormRowsGrads g{DenseMatrix(x.rows(), x.cols()), Vector(x.cols(), 0.0),
                       Vector(x.cols(), 0.0)};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto rg = layer_norm_backward(x.row(r), gain, dy.row(r), epsilon);
    g.dx.set_row(r, rg.dx);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      g.dgain[c] += rg.dgain[c];
      g.dbias[c] += rg.dbias[c];
    }
  }
  return g;
}

// ---- GRU cell --------------------------------------------------------------

GruWeights GruWeights::zeros(std::size_t input_size, std::size_t hidden_size) {
  return {DenseMatrix(3 * hidden_size, input_size), DenseMatrix(3 * hidden_size, hidden_size),
          Vector(3 * hidden_size, 0.0), Vector(3 * hidden_size, 0.0)};
}

namespace {

struct GruState {
  Vector r, z, n, hidden_proj_n;  // hidden_proj_n = W_hn h + b_hn
};

void check_gru_args(std::span<const double> input, std::span<const double> hidden,
                    const GruWeights& w) {
  const std::size_t d = hidden.size();
  if (w.hidden_weight.rows() != 3 * d || w.hidden_weight.cols() != d ||
      w.input_weight.rows() != 3 * d || w.input_weight.cols() != input.size() ||
      w.input_bias.size() != 3 * d || w.hidden_bias.size() != 3 * d) {
    throw DimensionError(fmt::format(
        "gru_cell: input {} / hidden {} inconsistent with weights {} and {} (biases {}, {})",
        input.size(), d, w.input_weight.shape_string(), w.hidden_weight.shape_string(),
        w.input_bias.size(), w.hidden_bias.size()));
  }
}

GruState gru_state(std::span<const double> input, std::span<const double> hidden,
                   const GruWeights& w) {
  check_gru_args(input, hidden, w);
  const std::size_t d = hidden.size();
  const Vector gi = affine(w.input_weight, input, w.input_bias);
  const Vector gh = affine(w.hidden_weight, hidden, w.hidden_bias);
  GruState s{Vector(d), Vector(d), Vector(d), Vector(d)};
  for (std::size_t i = 0; i < d; ++i) {
    s.r[i] = sigmoid(gi[i] + gh[i]);
    s.z[i] = sigmoid(gi[d + i] + gh[d + i]);
    s.hidden_proj_n[i] = gh[2 * d + i];
    s.n[i] = std::tanh(gi[2 * d + i] + s.r[i] * s.hidden_proj_n[i]);
  }
  detail::record_elementwise(4 * d);
  return s;
}

}  // namespace

Vector gru_cell(std::span<const double> input, std::span<const double> hidden,
                const GruWeights& weights) {
  const GruState s = gru_state(input, hidden, weights);
  Vector out(hidden.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - s.z[i]) * s.n[i] + s.z[i] * hidden[i];
  }
  return out;
}

GruGrads gru_cell_backward(std::span<const double> input, std::span<const double> hidden,
                           const GruWeights& weights, std::span<const double> dy) {
  const GruState s = gru_state(input, hidden, weights);
  const std::size_t d = hidden.size();
  require_length(dy.size(), d, "gru_cell_backward upstream");

  Vector d_input_pre(3 * d), d_hidden_pre(3 * d);
  Vector dhidden(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double dn = dy[i] * (1.0 - s.z[i]);
    const double dz = dy[i] * (hidden[i] - s.n[i]);
    dhidden[i] = dy[i] * s.z[i];
    const double dn_pre = dn * (1.0 - s.n[i] * s.n[i]);
    const double dr = dn_pre * s.hidden_proj_n[i];
    const double dz_pre = dz * s.z[i] * (1.0 - s.z[i]);
    const double dr_pre = dr * s.r[i] * (1.0 - s.r[i]);
    d_input_pre[i] = dr_pre;
    d_input_pre[d + i] = dz_pre;
    d_input_pre[2 * d + i] = dn_pre;
    d_hidden_pre[i] = dr_pre;
    d_hidden_pre[d + i] = dz_pre;
    d_hidden_pre[2 * d + i] = dn_pre * s.r[i];
  }

  auto gi = affine_backward(weights.input_weight, input, d_input_pre);
  auto gh = affine_backward(weights.hidden_weight, hidden, d_hidden_pre);
  for (std::size_t i = 0; i < d; ++i) dhidden[i] += gh.dx[i];

  return {std::move(gi.dx), std::move(dhidden),
          GruWeights{std::move(gi.dweight), std::move(gh.dweight), std::move(gi.dbias),
                     std::move(gh.dbias)}};
}

// ---- norms and similarities ------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) {
  require_length(b.size(), a.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  detail::record_mul_adds(a.size());
  return acc;
}

double l2_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc);
}

Vector l2_normalize(std::span<const double> x) {
  const double norm = l2_norm(x);
  Vector y(x.size(), 0.0);
  if (norm == 0.0) return y;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / norm;
  return y;
}

Vector l2_normalize_backward(std::span<const double> x, std::span<const double> dy) {
  require_length(dy.size(), x.size(), "l2_normalize_backward");
  const double norm = l2_norm(x);
  Vector dx(x.size(), 0.0);
  if (norm == 0.0) return dx;
  double inner = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) inner += x[i] * dy[i];
  inner /= norm * norm;
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = (dy[i] - x[i] * inner) / norm;
  return dx;
}

DenseMatrix l2_normalize_rows(const DenseMatrix& x) {
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) y.set_row(r, l2_normalize(x.row(r)));
  return y;
}

DenseMatrix l2_normalize_rows_backward(const DenseMatrix& x, const DenseMatrix& dy) {
  require_same_shape(x, dy, "l2_normalize_rows_backward");
  DenseMatrix dx(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) dx.set_row(r, l2_normalize_backward(x.row(r), dy.row(r)));
  return dx;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_length(b.size(), a.size(), "squared_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  detail::record_mul_adds(a.size());
  return acc;
}

std::pair<Vector, Vector> squared_distance_backward(std::span<const double> a,
                                                    std::span<const double> b, double dy) {
  require_length(b.size(), a.size(), "squared_distance_backward");
  Vector da(a.size()), db(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[i] = 2.0 * dy * (a[i] - b[i]);
    db[i] = -da[i];
  }
  return {std::move(da), std::move(db)};
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_length(b.size(), a.size(), "cosine_similarity");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::pair<Vector, Vector> cosine_similarity_backward(std::span<const double> a,
                                                     std::span<const double> b, double dy) {
  require_length(b.size(), a.size(), "cosine_similarity_backward");
  Vector da(a.size(), 0.0), db(b.size(), 0.0);
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return {std::move(da), std::move(db)};
  const double cos = dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[i] = dy * (b[i] / (na * nb) - cos * a[i] / (na * na));
    db[i] = dy * (a[i] / (na * nb) - cos * b[i] / (nb * nb));
  }
  return {std::move(da), std::move(db)};
}

}  // namespace ctxproto::numerics
