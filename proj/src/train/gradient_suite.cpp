#include "ctxproto/train/gradient_suite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <type_traits>

#include <fmt/format.h>

#include "ctxproto/error.hpp"
#include "ctxproto/losses/losses.hpp"
#include "ctxproto/model/model.hpp"
#include "ctxproto/model/params.hpp"
#include "ctxproto/numerics/kernels.hpp"
#include "ctxproto/numerics/reference.hpp"
#include "ctxproto/train/objective.hpp"
#include "ctxproto/train/reference_objective.hpp"

namespace ctxproto::train {

namespace nx = numerics;
namespace rf = reference;
using nx::DenseMatrix;
using nx::Vector;
using rf::Quad;
using QMat = rf::Mat<Quad>;
using QSpan = std::span<const Quad>;
using DSpan = std::span<const double>;

namespace {

// Carves consecutive matrices and vectors out of a flat point.
template <class T>
class Reader {
 public:
  explicit Reader(std::span<const T> flat) : flat_(flat) {}
  auto mat(std::size_t rows, std::size_t cols) {
    auto s = take(rows * cols);
    if constexpr (std::is_same_v<T, double>) {
      return DenseMatrix(rows, cols, Vector(s.begin(), s.end()));
    } else {
      return rf::lift<T>(s, rows, cols);
    }
  }
  std::vector<T> vec(std::size_t n) {
    auto s = take(n);
    return std::vector<T>(s.begin(), s.end());
  }

 private:
  std::span<const T> take(std::size_t n) {
    auto s = flat_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const T> flat_;
  std::size_t pos_ = 0;
};

class Writer {
 public:
  Writer& add(const DenseMatrix& m) { return add(DSpan(m.data())); }
  Writer& add(DSpan v) {
    out_.insert(out_.end(), v.begin(), v.end());
    return *this;
  }
  Vector take() { return std::move(out_); }

 private:
  Vector out_;
};

DenseMatrix gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  DenseMatrix m(rows, cols);
  for (auto& v : m.data()) v = g(rng);
  return m;
}

Vector gaussian_vec(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  return gaussian(1, n, rng, sd).data();
}

Vector concat_all(std::initializer_list<DSpan> parts) {
  Writer w;
  for (auto p : parts) w.add(p);
  return w.take();
}

struct Case {
  nx::DifferentiableFunction fn;
  Vector point;
};

using CaseFactory = std::function<Case(std::mt19937_64&, const GradientSuiteDims&)>;

struct NamedCase {
  std::string name;
  CaseFactory make;
};

// ---- kernel cases ----------------------------------------------------------

Case matmul_case(std::mt19937_64& rng, bool transposed) {
  const std::size_t m = 3, k = 4, n = 2;
  const DenseMatrix a = gaussian(m, k, rng);
  const DenseMatrix b = transposed ? gaussian(n, k, rng) : gaussian(k, n, rng);
  const DenseMatrix w = gaussian(m, n, rng);
  const std::size_t br = b.rows(), bc = b.cols();
  Case c;
  c.point = concat_all({a.data(), b.data()});
  c.fn.value = [=](DSpan x) {
    Reader<double> r(x);
    const DenseMatrix av = r.mat(m, k);
    const DenseMatrix bv = r.mat(br, bc);
    return nx::contract(transposed ? nx::matmul_nt(av, bv) : nx::matmul(av, bv), w);
  };
  c.fn.gradient = [=](DSpan x) {
    Reader<double> r(x);
    const DenseMatrix av = r.mat(m, k);
    const DenseMatrix bv = r.mat(br, bc);
    auto g = transposed ? nx::matmul_nt_backward(av, bv, w) : nx::matmul_backward(av, bv, w);
    return Writer().add(g.da).add(g.db).take();
  };
  c.fn.precise_value = [=](QSpan x) {
    Reader<Quad> r(x);
    const QMat av = r.mat(m, k);
    const QMat bv = r.mat(br, bc);
    return rf::contract(transposed ? rf::matmul_nt(av, bv) : rf::matmul(av, bv), w);
  };
  return c;
}

using MatFn = std::function<DenseMatrix(const DenseMatrix&)>;
using MatBackFn = std::function<DenseMatrix(const DenseMatrix&, const DenseMatrix&)>;
using QMatFn = std::function<QMat(const QMat&)>;

Case elementwise_case(std::mt19937_64& rng, MatFn forward, MatBackFn backward, QMatFn precise,
                      double scale = 1.0) {
  const DenseMatrix x = gaussian(3, 4, rng, scale);
  const DenseMatrix w = gaussian(3, 4, rng);
  Case c;
  c.point = x.data();
  c.fn.value = [=](DSpan p) { return nx::contract(forward(Reader<double>(p).mat(3, 4)), w); };
  c.fn.gradient = [=](DSpan p) { return backward(Reader<double>(p).mat(3, 4), w).data(); };
  c.fn.precise_value = [=](QSpan p) { return rf::contract(precise(Reader<Quad>(p).mat(3, 4)), w); };
  return c;
}

Case concat_case(std::mt19937_64& rng) {
  const Vector a = gaussian_vec(3, rng), b = gaussian_vec(4, rng), w = gaussian_vec(7, rng);
  Case c;
  c.point = concat_all({a, b});
  c.fn.value = [=](DSpan p) { return nx::dot(w, nx::concat(p.first(3), p.subspan(3))); };
  c.fn.gradient = [=](DSpan) {
    auto [da, db] = nx::concat_backward(w, 3);
    return concat_all({da, db});
  };
  // [a; b] of a flat point is the point itself.
  c.fn.precise_value = [=](QSpan p) { return rf::contract<Quad>(p, w); };
  return c;
}

Case concat_cols_case(std::mt19937_64& rng) {
  const DenseMatrix a = gaussian(3, 2, rng), b = gaussian(3, 3, rng), w = gaussian(3, 5, rng);
  Case c;
  c.point = concat_all({a.data(), b.data()});
  c.fn.value = [=](DSpan p) {
    Reader<double> r(p);
    const DenseMatrix av = r.mat(3, 2);
    return nx::contract(nx::concat_cols(av, r.mat(3, 3)), w);
  };
  c.fn.gradient = [=](DSpan) {
    auto [da, db] = nx::concat_cols_backward(w, 2);
    return Writer().add(da).add(db).take();
  };
  c.fn.precise_value = [=](QSpan p) {
    Reader<Quad> r(p);
    const QMat av = r.mat(3, 2);
    return rf::contract(rf::concat_cols(av, r.mat(3, 3)), w);
  };
  return c;
}

Case affine_case(std::mt19937_64& rng) {
  const DenseMatrix weight = gaussian(3, 4, rng);
  const Vector x = gaussian_vec(4, rng), b = gaussian_vec(3, rng), w = gaussian_vec(3, rng);
  Case c;
  c.point = concat_all({weight.data(), x, b});
  c.fn.value = [=](DSpan p) {
    Reader<double> r(p);
    const DenseMatrix wv = r.mat(3, 4);
    const Vector xv = r.vec(4);
    return nx::dot(w, nx::affine(wv, xv, r.vec(3)));
  };
  c.fn.gradient = [=](DSpan p) {
    Reader<double> r(p);
    const DenseMatrix wv = r.mat(3, 4);
    const Vector xv = r.vec(4);
    auto g = nx::affine_backward(wv, xv, w);
    return Writer().add(g.dweight).add(g.dx).add(g.dbias).take();
  };
  c.fn.precise_value = [=](QSpan p) {
    Reader<Quad> r(p);
    const QMat wv = r.mat(3, 4);
    const auto xv = r.vec(4);
    const auto bv = r.vec(3);
    const auto y = rf::affine<Quad>(wv, xv, bv);
    return rf::contract<Quad>(y, w);
  };
  return c;
}

Case affine_rows_case(std::mt19937_64& rng) {
  const DenseMatrix x = gaussian(3, 4, rng), weight = gaussian(2, 4, rng);
  const Vector b = gaussian_vec(2, rng);
  const DenseMatrix w = gaussian(3, 2, rng);
  Case c;
  c.point = concat_all({x.data(), weight.data(), b});
  c.fn.value = [=](DSpan p) {
    Reader<double> r(p);
    const DenseMatrix xv = r.mat(3, 4);
    const DenseMatrix wv = r.mat(2, 4);
    return nx::contract(nx::affine_rows(xv, wv, r.vec(2)), w);
  };
  c.fn.gradient = [=](DSpan p) {
    Reader<double> r(p);
    const DenseMatrix xv = r.mat(3, 4);
    const DenseMatrix wv = r.mat(2, 4);
    auto g = nx::affine_rows_backward(xv, wv, w);
    return Writer().add(g.dx).add(g.dweight).add(g.dbias).take();
  };
  c.fn.precise_value = [=](QSpan p) {
    Reader<Quad> r(p);
    const QMat xv = r.mat(3, 4);
    const QMat wv = r.mat(2, 4);
    const auto bv = r.vec(2);
    return rf::contract(rf::affine_rows<Quad>(xv, wv, bv), w);
  };
  return c;
}

Case layer_norm_case(std::mt19937_64& rng) {
  const std::size_t n = 6;
  const Vector x = gaussian_vec(n, rng), gain = gaussian_vec(n, rng), bias = gaussian_vec(n, rng);
  const Vector w = gaussian_vec(n, rng);
  Case c;
  c.point = concat_all({x, gain, bias});
  c.fn.value = [=](DSpan p) {
    return nx::dot(w, nx::layer_norm(p.first(n), p.subspan(n, n), p.subspan(2 * n, n)));
  };
  c.fn.gradient = [=](DSpan p) {
    auto g = nx::layer_norm_backward(p.first(n), p.subspan(n, n), w);
    return concat_all({g.dx, g.dgain, g.dbias});
  };
  c.fn.precise_value = [=](QSpan p) {
    const auto y = rf::layer_norm<Quad>(p.first(n), p.subspan(n, n), p.subspan(2 * n, n),
                                        nx::kDefaultLayerNormEpsilon);
    return rf::contract<Quad>(y, w);
  };
  return c;
}

Case layer_norm_rows_case(std::mt19937_64& rng) {
  const std::size_t rows = 3, n = 5;
  const DenseMatrix x = gaussian(rows, n, rng);
  const Vector gain = gaussian_vec(n, rng), bias = gaussian_vec(n, rng);
  const DenseMatrix w = gaussian(rows, n, rng);
  Case c;
  c.point = concat_all({x.data(), gain, bias});
  c.fn.value = [=](DSpan p) {
    Reader<double> r(p);
    const DenseMatrix xv = r.mat(rows, n);
    const Vector g = r.vec(n);
    return nx::contract(nx::layer_norm_rows(xv, g, r.vec(n)), w);
  };
  c.fn.gradient = [=](DSpan p) {
    Reader<double> r(p);
    const DenseMatrix xv = r.mat(rows, n);
    auto g = nx::layer_norm_rows_backward(xv, r.vec(n), w);
    return Writer().add(g.dx).add(g.dgain).add(g.dbias).take();
  };
  c.fn.precise_value = [=](QSpan p) {
    Reader<Quad> r(p);
    const QMat xv = r.mat(rows, n);
    const auto g = r.vec(n);
    const auto b = r.vec(n);
    return rf::contract(rf::layer_norm_rows<Quad>(xv, g, b, nx::kDefaultLayerNormEpsilon), w);
  };
  return c;
}

Case gru_case(std::mt19937_64& rng) {
  const std::size_t d_in = 4, d = 3;
  const Vector x = gaussian_vec(d_in, rng), h = gaussian_vec(d, rng), w = gaussian_vec(d, rng);
  const DenseMatrix wi = gaussian(3 * d, d_in, rng, 0.5), wh = gaussian(3 * d, d, rng, 0.5);
  const Vector bi = gaussian_vec(3 * d, rng, 0.5), bh = gaussian_vec(3 * d, rng, 0.5);
  auto unpack = [=](DSpan p) {
    Reader<double> r(p);
    Vector xv = r.vec(d_in);
    Vector hv = r.vec(d);
    nx::GruWeights gw;
    gw.input_weight = r.mat(3 * d, d_in);
    gw.hidden_weight = r.mat(3 * d, d);
    gw.input_bias = r.vec(3 * d);
    gw.hidden_bias = r.vec(3 * d);
    return std::tuple{std::move(xv), std::move(hv), std::move(gw)};
  };
  Case c;
  c.point = concat_all({x, h, wi.data(), wh.data(), bi, bh});
  c.fn.value = [=](DSpan p) {
    auto [xv, hv, gw] = unpack(p);
    return nx::dot(w, nx::gru_cell(xv, hv, gw));
  };
  c.fn.gradient = [=](DSpan p) {
    auto [xv, hv, gw] = unpack(p);
    auto g = nx::gru_cell_backward(xv, hv, gw, w);
    return Writer()
        .add(g.dinput)
        .add(g.dhidden)
        .add(g.dweights.input_weight)
        .add(g.dweights.hidden_weight)
        .add(g.dweights.input_bias)
        .add(g.dweights.hidden_bias)
        .take();
  };
  c.fn.precise_value = [=](QSpan p) {
    Reader<Quad> r(p);
    const auto xv = r.vec(d_in);
    const auto hv = r.vec(d);
    rf::Gru<Quad> gw;
    gw.input_weight = r.mat(3 * d, d_in);
    gw.hidden_weight = r.mat(3 * d, d);
    gw.input_bias = r.vec(3 * d);
    gw.hidden_bias = r.vec(3 * d);
    return rf::contract<Quad>(rf::gru_cell<Quad>(xv, hv, gw), w);
  };
  return c;
}

Case l2_normalize_case(std::mt19937_64& rng) {
  const Vector x = gaussian_vec(5, rng), w = gaussian_vec(5, rng);
  Case c;
  c.point = x;
  c.fn.value = [=](DSpan p) { return nx::dot(w, nx::l2_normalize(p)); };
  c.fn.gradient = [=](DSpan p) { return nx::l2_normalize_backward(p, w); };
  c.fn.precise_value = [=](QSpan p) { return rf::contract<Quad>(rf::l2_normalize<Quad>(p), w); };
  return c;
}

using PairFn = std::function<double(DSpan, DSpan)>;
using PairBackFn = std::function<std::pair<Vector, Vector>(DSpan, DSpan, double)>;
using QPairFn = std::function<Quad(QSpan, QSpan)>;

Case pair_scalar_case(std::mt19937_64& rng, PairFn f, PairBackFn df, QPairFn precise) {
  const std::size_t n = 5;
  const Vector a = gaussian_vec(n, rng), b = gaussian_vec(n, rng);
  const double scale = std::normal_distribution<double>(0.0, 1.0)(rng);
  Case c;
  c.point = concat_all({a, b});
  c.fn.value = [=](DSpan p) { return scale * f(p.first(n), p.subspan(n)); };
  c.fn.gradient = [=](DSpan p) {
    auto [da, db] = df(p.first(n), p.subspan(n), scale);
    return concat_all({da, db});
  };
  c.fn.precise_value = [=](QSpan p) { return Quad(scale) * precise(p.first(n), p.subspan(n)); };
  return c;
}

// ---- model cases -----------------------------------------------------------

Case attention_case(std::mt19937_64& rng, const GradientSuiteDims& dims) {
  const std::size_t d = dims.model_dim, nq = dims.num_predicates, nk = dims.candidates;
  const DenseMatrix qs = gaussian(nq, d, rng), ks = gaussian(nk, d, rng);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const DenseMatrix wq = gaussian(d, d, rng, sd), wk = gaussian(d, d, rng, sd),
                    wv = gaussian(d, d, rng, sd);
  const DenseMatrix w = gaussian(nq, d, rng);
  auto unpack = [=](DSpan p) {
    Reader<double> r(p);
    std::array<DenseMatrix, 5> m{r.mat(nq, d), r.mat(nk, d), r.mat(d, d), r.mat(d, d), r.mat(d, d)};
    return m;
  };
  Case c;
  c.point = concat_all({qs.data(), ks.data(), wq.data(), wk.data(), wv.data()});
  c.fn.value = [=](DSpan p) {
    auto m = unpack(p);
    return nx::contract(model::cross_attention(m[0], m[1], m[2], m[3], m[4]).output, w);
  };
  c.fn.gradient = [=](DSpan p) {
    auto m = unpack(p);
    auto fwd = model::cross_attention(m[0], m[1], m[2], m[3], m[4]);
    auto g = model::cross_attention_backward(m[0], m[1], m[2], m[3], m[4], fwd, w);
    return Writer()
        .add(g.d_query_source)
        .add(g.d_key_source)
        .add(g.d_w_query)
        .add(g.d_w_key)
        .add(g.d_w_value)
        .take();
  };
  c.fn.precise_value = [=](QSpan p) {
    Reader<Quad> r(p);
    std::array<QMat, 5> m{r.mat(nq, d), r.mat(nk, d), r.mat(d, d), r.mat(d, d), r.mat(d, d)};
    return rf::contract(rf::cross_attention(m[0], m[1], m[2], m[3], m[4]), w);
  };
  return c;
}

model::ModelConfig suite_config(const GradientSuiteDims& dims, model::UpdaterKind updater,
                                bool edge) {
  model::ModelConfig mc;
  mc.num_predicates = dims.num_predicates;
  mc.num_categories = dims.num_categories;
  mc.word_dim = dims.word_dim;
  mc.visual_dim = dims.visual_dim;
  mc.model_dim = dims.model_dim;
  mc.updater = updater;
  mc.edge_enabled = edge;
  return mc;
}

// Initial parameters moved off their structured starting values (zero biases,
// unit gains, alpha = 0) so every parameter is exercised at a generic point.
model::ModelParams generic_params(const model::ModelConfig& mc, std::mt19937_64& rng) {
  auto params = model::init_params(mc, rng());
  std::normal_distribution<double> g(0.0, 0.2);
  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    for (auto& v : e.value.data()) v += g(rng);
  }
  return params;
}

model::RelationBatch random_batch(const model::ModelConfig& mc, std::size_t n, std::mt19937_64& rng,
                                  bool labeled) {
  model::RelationBatch b;
  b.subject_features = gaussian(n, mc.visual_dim, rng);
  b.object_features = gaussian(n, mc.visual_dim, rng);
  std::uniform_int_distribution<int> cat(0, static_cast<int>(mc.num_categories) - 1);
  std::uniform_int_distribution<int> pred(0, static_cast<int>(mc.num_predicates) - 1);
  std::vector<int> labels;
  for (std::size_t j = 0; j < n; ++j) {
    b.subject_categories.push_back(cat(rng));
    b.object_categories.push_back(cat(rng));
    labels.push_back(pred(rng));
  }
  if (labeled) b.labels = std::move(labels);
  return b;
}

// Full forward pass, contracted over logits, recalibrated relations and
// static prototypes.
Case forward_case(std::mt19937_64& rng, const GradientSuiteDims& dims, model::UpdaterKind updater,
                  bool edge) {
  const auto mc = suite_config(dims, updater, edge);
  const auto base = generic_params(mc, rng);
  const auto batch = random_batch(mc, dims.candidates, rng, false);
  model::ForwardUpstream up;
  up.d_logits = gaussian(dims.candidates, mc.num_predicates, rng, 0.1);
  up.d_recalibrated = gaussian(dims.candidates, mc.model_dim, rng);
  up.d_static_prototypes = gaussian(mc.num_predicates, mc.model_dim, rng);
  auto with_point = [=](DSpan p) {
    auto params = base;
    params.assign_trainable(p);
    return params;
  };
  Case c;
  c.point = base.flatten_trainable();
  c.fn.value = [=](DSpan p) {
    const auto params = with_point(p);
    const auto pass = model::forward_image(batch, params, mc);
    return nx::contract(pass.logits, up.d_logits) +
           nx::contract(pass.recalibrated, up.d_recalibrated) +
           nx::contract(pass.static_prototypes, up.d_static_prototypes);
  };
  c.fn.gradient = [=](DSpan p) {
    const auto params = with_point(p);
    const auto pass = model::forward_image(batch, params, mc);
    return model::backward(pass, batch, params, mc, up).flatten_trainable();
  };
  c.fn.precise_value = [=](QSpan p) {
    const auto f = rf::forward(batch, rf::Params<Quad>(base, p), mc);
    return rf::contract(f.logits, up.d_logits) + rf::contract(f.recalibrated, up.d_recalibrated) +
           rf::contract(f.static_prototypes, up.d_static_prototypes);
  };
  return c;
}

// ---- loss cases ------------------------------------------------------------

Case reg_case(std::mt19937_64& rng, const GradientSuiteDims& dims) {
  const std::size_t r = dims.num_predicates, d = dims.model_dim;
  const DenseMatrix p0 = gaussian(r, d, rng);
  const double w_sim = 0.7, w_div = 1.3, gamma = 3.0;
  Case c;
  c.point = p0.data();
  c.fn.value = [=](DSpan p) {
    auto t = losses::loss_reg(Reader<double>(p).mat(r, d), gamma);
    return w_sim * t.sim + w_div * t.div;
  };
  c.fn.gradient = [=](DSpan p) {
    return losses::loss_reg_backward(Reader<double>(p).mat(r, d), gamma, w_sim, w_div).data();
  };
  c.fn.precise_value = [=](QSpan p) {
    const auto t = rf::loss_reg(Reader<Quad>(p).mat(r, d), gamma);
    return Quad(w_sim) * t.sim + Quad(w_div) * t.div;
  };
  return c;
}

Case align_case(std::mt19937_64& rng, const GradientSuiteDims& dims) {
  const std::size_t r = dims.num_predicates, d = dims.model_dim, n = dims.candidates;
  const DenseMatrix e = gaussian(n, d, rng), protos = gaussian(r, d, rng);
  std::uniform_int_distribution<int> pred(0, static_cast<int>(r) - 1);
  std::vector<int> labels;
  for (std::size_t j = 0; j < n; ++j) labels.push_back(pred(rng));
  const double gamma = 20.0, weight = 0.8;
  Case c;
  c.point = concat_all({e.data(), protos.data()});
  c.fn.value = [=](DSpan p) {
    Reader<double> rd(p);
    const DenseMatrix ev = rd.mat(n, d);
    return weight * losses::loss_align(ev, labels, rd.mat(r, d), gamma);
  };
  c.fn.gradient = [=](DSpan p) {
    Reader<double> rd(p);
    const DenseMatrix ev = rd.mat(n, d);
    auto g = losses::loss_align_backward(ev, labels, rd.mat(r, d), gamma, weight);
    return Writer().add(g.d_relations).add(g.d_prototypes).take();
  };
  c.fn.precise_value = [=](QSpan p) {
    Reader<Quad> rd(p);
    const QMat ev = rd.mat(n, d);
    return Quad(weight) * rf::loss_align(ev, labels, rd.mat(r, d), gamma);
  };
  return c;
}

Case cls_case(std::mt19937_64& rng, const GradientSuiteDims& dims) {
  const std::size_t r = dims.num_predicates, n = dims.candidates;
  const DenseMatrix logits = gaussian(n, r, rng, 3.0);
  std::uniform_int_distribution<int> pred(0, static_cast<int>(r) - 1);
  std::uniform_real_distribution<double> wdist(0.1, 10.0);
  std::vector<int> labels;
  for (std::size_t j = 0; j < n; ++j) labels.push_back(pred(rng));
  Vector weights;
  for (std::size_t k = 0; k < r; ++k) weights.push_back(wdist(rng));
  Case c;
  c.point = logits.data();
  c.fn.value = [=](DSpan p) { return losses::loss_cls(Reader<double>(p).mat(n, r), labels, weights); };
  c.fn.gradient = [=](DSpan p) {
    return losses::loss_cls_backward(Reader<double>(p).mat(n, r), labels, weights, 1.0).data();
  };
  c.fn.precise_value = [=](QSpan p) {
    return rf::loss_cls(Reader<Quad>(p).mat(n, r), labels, weights);
  };
  return c;
}

// Total training objective for one scene, as a function of every trainable
// parameter.
Case objective_case(std::mt19937_64& rng, const GradientSuiteDims& dims, model::UpdaterKind updater,
                    bool edge, bool reweight) {
  const auto mc = suite_config(dims, updater, edge);
  const auto base = generic_params(mc, rng);
  const auto batch = random_batch(mc, dims.candidates, rng, true);
  losses::LossConfig lc;
  lc.lambda_sim = 0.5;
  lc.lambda_div = 0.7;
  lc.lambda_align = 0.3;
  Vector weights;
  if (reweight) {
    lc.reweight = true;
    std::uniform_real_distribution<double> wdist(0.1, 10.0);
    for (std::size_t k = 0; k < mc.num_predicates; ++k) weights.push_back(wdist(rng));
  }
  auto with_point = [=](DSpan p) {
    auto params = base;
    params.assign_trainable(p);
    return params;
  };
  Case c;
  c.point = base.flatten_trainable();
  c.fn.value = [=](DSpan p) {
    return scene_objective(batch, with_point(p), mc, lc, weights, false).breakdown.total;
  };
  c.fn.gradient = [=](DSpan p) {
    return scene_objective(batch, with_point(p), mc, lc, weights, true).grads.flatten_trainable();
  };
  c.fn.precise_value = [=](QSpan p) {
    return rf::objective(batch, rf::Params<Quad>(base, p), mc, lc, weights);
  };
  return c;
}

template <class F>
QMatFn quad_map(F f) {
  return [f](const QMat& x) { return rf::map(x, f); };
}

const std::vector<NamedCase>& registry() {
  using U = model::UpdaterKind;
  static const std::vector<NamedCase> cases = [] {
    std::vector<NamedCase> v;
    auto kernel = [&](std::string name, std::function<Case(std::mt19937_64&)> f) {
      v.push_back({std::move(name),
                   [f](std::mt19937_64& rng, const GradientSuiteDims&) { return f(rng); }});
    };
    kernel("matmul", [](auto& rng) { return matmul_case(rng, false); });
    kernel("matmul_nt", [](auto& rng) { return matmul_case(rng, true); });
    kernel("softmax_rows", [](auto& rng) {
      return elementwise_case(
          rng, [](const DenseMatrix& x) { return nx::softmax_rows(x); },
          [](const DenseMatrix& x, const DenseMatrix& dy) {
            return nx::softmax_rows_backward(nx::softmax_rows(x), dy);
          },
          [](const QMat& x) { return rf::softmax_rows(x); }, 2.0);
    });
    kernel("sigmoid", [](auto& rng) {
      return elementwise_case(
          rng, [](const DenseMatrix& x) { return nx::sigmoid(x); },
          [](const DenseMatrix& x, const DenseMatrix& dy) { return nx::sigmoid_backward(x, dy); },
          quad_map([](const Quad& q) { return rf::sigmoid(q); }));
    });
    kernel("tanh", [](auto& rng) {
      return elementwise_case(
          rng, [](const DenseMatrix& x) { return nx::tanh(x); },
          [](const DenseMatrix& x, const DenseMatrix& dy) { return nx::tanh_backward(x, dy); },
          quad_map([](const Quad& q) { return Quad(tanh(q)); }));
    });
    kernel("relu", [](auto& rng) {
      return elementwise_case(
          rng, [](const DenseMatrix& x) { return nx::relu(x); },
          [](const DenseMatrix& x, const DenseMatrix& dy) { return nx::relu_backward(x, dy); },
          quad_map([](const Quad& q) { return rf::relu(q); }));
    });
    kernel("concat", concat_case);
    kernel("concat_cols", concat_cols_case);
    kernel("affine", affine_case);
    kernel("affine_rows", affine_rows_case);
    kernel("layer_norm", layer_norm_case);
    kernel("layer_norm_rows", layer_norm_rows_case);
    kernel("gru_cell", gru_case);
    kernel("l2_normalize", l2_normalize_case);
    kernel("l2_normalize_rows", [](auto& rng) {
      return elementwise_case(
          rng, [](const DenseMatrix& x) { return nx::l2_normalize_rows(x); },
          [](const DenseMatrix& x, const DenseMatrix& dy) {
            return nx::l2_normalize_rows_backward(x, dy);
          },
          [](const QMat& x) { return rf::l2_normalize_rows(x); });
    });
    kernel("squared_distance", [](auto& rng) {
      return pair_scalar_case(
          rng, [](DSpan a, DSpan b) { return nx::squared_distance(a, b); },
          [](DSpan a, DSpan b, double dy) { return nx::squared_distance_backward(a, b, dy); },
          [](QSpan a, QSpan b) { return rf::squared_distance<Quad>(a, b); });
    });
    kernel("cosine_similarity", [](auto& rng) {
      return pair_scalar_case(
          rng, [](DSpan a, DSpan b) { return nx::cosine_similarity(a, b); },
          [](DSpan a, DSpan b, double dy) { return nx::cosine_similarity_backward(a, b, dy); },
          [](QSpan a, QSpan b) { return rf::cosine_similarity<Quad>(a, b); });
    });
    v.push_back({"cross_attention", attention_case});
    for (U u : {U::identity, U::concat, U::gru, U::residual, U::plain_add, U::ema}) {
      v.push_back({fmt::format("forward.{}", model::to_string(u)),
                   [u](auto& rng, const auto& dims) { return forward_case(rng, dims, u, true); }});
    }
    v.push_back({"forward.gru.no_edge",
                 [](auto& rng, const auto& dims) { return forward_case(rng, dims, U::gru, false); }});
    v.push_back({"loss_reg", reg_case});
    v.push_back({"loss_align", align_case});
    v.push_back({"loss_cls", cls_case});
    for (U u : {U::identity, U::concat, U::gru, U::residual, U::plain_add, U::ema}) {
      v.push_back({fmt::format("objective.{}", model::to_string(u)), [u](auto& rng, const auto& dims) {
                     return objective_case(rng, dims, u, true, false);
                   }});
    }
    v.push_back({"objective.gru.no_edge", [](auto& rng, const auto& dims) {
                   return objective_case(rng, dims, U::gru, false, false);
                 }});
    v.push_back({"objective.gru.reweighted", [](auto& rng, const auto& dims) {
                   return objective_case(rng, dims, U::gru, true, true);
                 }});
    return v;
  }();
  return cases;
}

std::size_t case_index(std::string_view name) {
  const auto& cases = registry();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].name == name) return i;
  }
  throw ConfigError(fmt::format("unknown gradient-suite case '{}'", name));
}

GradientCase build_case(std::size_t ci, const GradientSuiteOptions& options, std::size_t k) {
  const auto& named = registry()[ci];
  std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                    static_cast<std::uint32_t>(options.seed >> 32), static_cast<std::uint32_t>(ci),
                    static_cast<std::uint32_t>(k)};
  std::mt19937_64 rng(seq);
  Case c = named.make(rng, options.dims);
  c.fn.name = named.name;
  if (named.name == options.inject_bug) {
    c.fn.gradient = [inner = c.fn.gradient](DSpan x) {
      Vector g = inner(x);
      if (!g.empty()) {
        auto it = std::max_element(g.begin(), g.end(),
                                   [](double a, double b) { return std::abs(a) < std::abs(b); });
        *it = -*it;
      }
      return g;
    };
  }
  return {std::move(c.fn), std::move(c.point)};
}

}  // namespace

bool GradientSuiteResult::pass() const noexcept {
  return !reports.empty() &&
         std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass; });
}

std::vector<std::string> gradient_suite_cases() {
  std::vector<std::string> out;
  for (const auto& c : registry()) out.push_back(c.name);
  return out;
}

GradientCase make_gradient_case(std::string_view name, const GradientSuiteOptions& options,
                                std::size_t index) {
  return build_case(case_index(name), options, index);
}

GradientSuiteResult run_gradient_suite(const GradientSuiteOptions& options) {
  if (options.points == 0) throw ConfigError("gradient suite needs at least one point");
  if (!options.inject_bug.empty()) case_index(options.inject_bug);
  const auto& cases = registry();
  GradientSuiteResult result;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    nx::GradCheckReport worst;
    worst.op_name = cases[ci].name;
    worst.tolerance = options.check.tolerance;
    worst.pass = true;
    for (std::size_t k = 0; k < options.points; ++k) {
      const auto c = build_case(ci, options, k);
      const auto report = nx::grad_check(c.fn, c.point, options.check);
      if (k == 0 || report.max_relative_error > worst.max_relative_error) {
        worst.max_relative_error = report.max_relative_error;
        worst.worst_index = report.worst_index;
      }
      worst.forward_discrepancy = std::max(worst.forward_discrepancy, report.forward_discrepancy);
      worst.element_count = report.element_count;
      worst.pass = worst.pass && report.pass;
    }
    result.reports.push_back(worst);
  }
  return result;
}

}  // namespace ctxproto::train
