#pragma once

// Dense kernels with their vector-Jacobian products. Every forward/backward
// pair is a pure function; reductions run in a fixed left-to-right order so
// results are bit-identical across runs and threads.

#include <span>
#include <utility>

#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::numerics {

inline constexpr double kDefaultLayerNormEpsilon = 1e-5;

// ---- matrix products -------------------------------------------------------

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

struct MatmulGrads {
  DenseMatrix da;
  DenseMatrix db;
};
MatmulGrads matmul_backward(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& dc);

// a * transpose(b); the natural form for row-stacked inputs times a weight matrix.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
MatmulGrads matmul_nt_backward(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& dc);

// ---- softmax ---------------------------------------------------------------

// Row-wise softmax, stabilised by subtracting each row's maximum.
DenseMatrix softmax_rows(const DenseMatrix& logits);
// Takes the forward output, not the logits.
DenseMatrix softmax_rows_backward(const DenseMatrix& probs, const DenseMatrix& dprobs);

// ---- elementwise -----------------------------------------------------------

DenseMatrix sigmoid(const DenseMatrix& x);
DenseMatrix sigmoid_backward(const DenseMatrix& x, const DenseMatrix& dy);
DenseMatrix tanh(const DenseMatrix& x);
DenseMatrix tanh_backward(const DenseMatrix& x, const DenseMatrix& dy);
DenseMatrix relu(const DenseMatrix& x);
DenseMatrix relu_backward(const DenseMatrix& x, const DenseMatrix& dy);

double sigmoid(double x) noexcept;

// ---- vector ops ------------------------------------------------------------

Vector concat(std::span<const double> a, std::span<const double> b);
std::pair<Vector, Vector> concat_backward(std::span<const double> dy, std::size_t a_len);

DenseMatrix concat_cols(const DenseMatrix& a, const DenseMatrix& b);
std::pair<DenseMatrix, DenseMatrix> concat_cols_backward(const DenseMatrix& dy, std::size_t a_cols);

// y = W x + b
Vector affine(const DenseMatrix& weight, std::span<const double> x, std::span<const double> bias);

struct AffineGrads {
  DenseMatrix dweight;
  Vector dx;
  Vector dbias;
};
AffineGrads affine_backward(const DenseMatrix& weight, std::span<const double> x,
                            std::span<const double> dy);

// Row-batched affine map: Y = X W^T + 1 b^T.
DenseMatrix affine_rows(const DenseMatrix& x, const DenseMatrix& weight,
                        std::span<const double> bias);

struct AffineRowsGrads {
  DenseMatrix dx;
  DenseMatrix dweight;
  Vector dbias;
};
AffineRowsGrads affine_rows_backward(const DenseMatrix& x, const DenseMatrix& weight,
                                     const DenseMatrix& dy);

// ---- layer norm ------------------------------------------------------------

Vector layer_norm(std::span<const double> x, std::span<const double> gain,
                  std::span<const double> bias, double epsilon = kDefaultLayerNormEpsilon);

struct LayerNormGrads {
  Vector dx;
  Vector dgain;
  Vector dbias;
};
LayerNormGrads layer_norm_backward(std::span<const double> x, std::span<const double> gain,
                                   std::span<const double> dy,
                                   double epsilon = kDefaultLayerNormEpsilon);

DenseMatrix layer_norm_rows(const DenseMatrix& x, std::span<const double> gain,
                            std::span<const double> bias, double epsilon = kDefaultLayerNormEpsilon);

struct LayerNormRowsGrads {
  DenseMatrix dx;
  Vector dgain;
  Vector dbias;
};
LayerNormRowsGrads layer_norm_rows_backward(const DenseMatrix& x, std::span<const double> gain,
                                            const DenseMatrix& dy,
                                            double epsilon = kDefaultLayerNormEpsilon);

// ---- GRU cell --------------------------------------------------------------

// Gate blocks are stacked in the order reset (r), update (z), candidate (n):
// rows [0,d) of each weight/bias belong to r, [d,2d) to z, [2d,3d) to n.
struct GruWeights {
  DenseMatrix input_weight;   // 3d x d_in
  DenseMatrix hidden_weight;  // 3d x d
  Vector input_bias;          // 3d
  Vector hidden_bias;         // 3d

  std::size_t hidden_size() const noexcept { return hidden_weight.cols(); }
  std::size_t input_size() const noexcept { return input_weight.cols(); }
  static GruWeights zeros(std::size_t input_size, std::size_t hidden_size);
};

//   r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
Vector gru_cell(std::span<const double> input, std::span<const double> hidden,
                const GruWeights& weights);

struct GruGrads {
  Vector dinput;
  Vector dhidden;
  GruWeights dweights;
};
GruGrads gru_cell_backward(std::span<const double> input, std::span<const double> hidden,
                           const GruWeights& weights, std::span<const double> dy);

// ---- norms and similarities ------------------------------------------------

Vector l2_normalize(std::span<const double> x);
Vector l2_normalize_backward(std::span<const double> x, std::span<const double> dy);
DenseMatrix l2_normalize_rows(const DenseMatrix& x);
DenseMatrix l2_normalize_rows_backward(const DenseMatrix& x, const DenseMatrix& dy);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> x);

double squared_distance(std::span<const double> a, std::span<const double> b);
std::pair<Vector, Vector> squared_distance_backward(std::span<const double> a,
                                                    std::span<const double> b, double dy);

// Zero-norm operands give similarity 0 and zero gradients.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
std::pair<Vector, Vector> cosine_similarity_backward(std::span<const double> a,
                                                     std::span<const double> b, double dy);

}  // namespace ctxproto::numerics
