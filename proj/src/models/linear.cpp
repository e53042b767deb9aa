#include "sigbench/models/linear.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <omp.h>

#include "sigbench/binio.hpp"
#include "sigbench/rng.hpp"

namespace sigbench::models {
namespace {

using data::FeatureKind;
using data::FeatureMatrix;

void dot_rows(const FeatureMatrix& X, std::size_t row, const double* w, const double* b,
              int K, std::size_t D, double* out) {
  if (X.kind == FeatureKind::RawPixels) {
    const double* x = X.row(row);
    for (int k = 0; k < K; ++k) {
      const double* wk = w + std::size_t(k) * D;
      double s = b[k];
      for (std::size_t j = 0; j < D; ++j) s += wk[j] * x[j];
      out[k] = s;
    }
  } else {
    for (int k = 0; k < K; ++k) {
      const double* wk = w + std::size_t(k) * D;
      double s = b[k];
      for (std::int32_t j : X.active_row(row)) s += wk[j];
      out[k] = s;
    }
  }
}

void softmax_inplace(double* z, int K) {
  double mx = z[0];
  for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    z[k] = std::exp(z[k] - mx);
    sum += z[k];
  }
  for (int k = 0; k < K; ++k) z[k] /= sum;
}

int argmax(const double* z, int K) {
  int best = 0;
  for (int k = 1; k < K; ++k)
    if (z[k] > z[best]) best = k;
  return best;
}

std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  return order;
}

// Gathers a row subset into a standalone batch matrix.
FeatureMatrix gather(const FeatureMatrix& X, const std::size_t* idx, std::size_t n) {
  FeatureMatrix B;
  B.kind = X.kind;
  B.rows = n;
  B.cols = X.cols;
  if (X.kind == FeatureKind::RawPixels) {
    B.dense.resize(n * X.cols);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(X.row(idx[i]), X.row(idx[i]) + X.cols, B.dense.data() + i * X.cols);
  } else {
    B.active_per_row = X.active_per_row;
    B.active.resize(n * X.active_per_row);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = X.active_row(idx[i]);
      std::copy(r.begin(), r.end(), B.active.data() + i * X.active_per_row);
    }
  }
  return B;
}

// d/dW of the mean cross-entropy given per-item dlogits; rows of W are
// independent so the batch reduction runs in fixed item order per row.
void accumulate_row_grads(const FeatureMatrix& X, const double* dlogits, int rows_out,
                          std::size_t D, double* dw, double* db) {
  const std::size_t n = X.rows;
  const double inv_n = 1.0 / double(n);
  const bool parallel = !omp_in_parallel() && rows_out * D >= (1u << 14);
#pragma omp parallel for schedule(static) if (parallel)
  for (int k = 0; k < rows_out; ++k) {
    double* dwk = dw + std::size_t(k) * D;
    std::fill(dwk, dwk + D, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = dlogits[i * rows_out + k];
      gb += g;
      if (g == 0.0) continue;
      if (X.kind == FeatureKind::RawPixels) {
        const double* x = X.row(i);
        for (std::size_t j = 0; j < D; ++j) dwk[j] += g * x[j];
      } else {
        for (std::int32_t j : X.active_row(i)) dwk[j] += g;
      }
    }
    for (std::size_t j = 0; j < D; ++j) dwk[j] *= inv_n;
    db[k] = gb * inv_n;
  }
}

struct Sgd {
  std::vector<double> velocity;
  double lr, momentum, l2;

  Sgd(std::size_t size, double lr_, double momentum_, double l2_)
      : velocity(size, 0.0), lr(lr_), momentum(momentum_), l2(l2_) {}

  void step(double* param, const double* grad, std::size_t size) {
    double* v = velocity.data();
    for (std::size_t i = 0; i < size; ++i) {
      v[i] = momentum * v[i] - lr * (grad[i] + l2 * param[i]);
      param[i] += v[i];
    }
  }
};

}  // namespace

std::vector<int> LinearSoftmaxModel::predict(const FeatureMatrix& X) const {
  check_features(*this, X);
  std::vector<int> out(X.rows);
  const bool parallel = !omp_in_parallel() && X.rows > 64;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < X.rows; ++i) {
    std::vector<double> z(K_);
    dot_rows(X, i, weights.data(), bias.data(), K_, D_, z.data());
    out[i] = argmax(z.data(), K_);
  }
  return out;
}

void LinearSoftmaxModel::save(std::ostream& out) const {
  bin::write_u32(out, static_cast<std::uint32_t>(K_));
  bin::write_u64(out, D_);
  bin::write_pod_vector(out, weights);
  bin::write_pod_vector(out, bias);
}

std::unique_ptr<LinearSoftmaxModel> LinearSoftmaxModel::load_payload(std::istream& in) {
  auto m = std::make_unique<LinearSoftmaxModel>();
  m->K_ = static_cast<int>(bin::read_u32(in));
  m->D_ = bin::read_u64(in);
  m->weights = bin::read_pod_vector<double>(in);
  m->bias = bin::read_pod_vector<double>(in);
  return m;
}

double linear_softmax_loss_grad(const FeatureMatrix& X, const std::vector<int>& y,
                                const LinearSoftmaxModel& model, std::vector<double>* dw,
                                std::vector<double>* db) {
  const int K = model.K_;
  const std::size_t D = model.D_;
  std::vector<double> probs(X.rows * K);
  const bool parallel = !omp_in_parallel() && X.rows >= 8;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < X.rows; ++i) {
    double* z = probs.data() + i * K;
    dot_rows(X, i, model.weights.data(), model.bias.data(), K, D, z);
    softmax_inplace(z, K);
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < X.rows; ++i) {
    loss += -std::log(probs[i * K + y[i]]);  // p == 0 reads as divergence
    probs[i * K + y[i]] -= 1.0;  // probs -> dlogits
  }
  if (dw && db) {
    dw->resize(std::size_t(K) * D);
    db->resize(K);
    accumulate_row_grads(X, probs.data(), K, D, dw->data(), db->data());
  }
  return loss / double(X.rows);
}

std::unique_ptr<LinearSoftmaxModel> fit_linear_softmax(const FeatureMatrix& X,
                                                       const std::vector<int>& y, int num_classes,
                                                       const LinearSoftmaxParams& params) {
  if (X.rows == 0 || X.rows != y.size()) throw std::invalid_argument("bad training data");
  if (params.lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  const int K = num_classes;
  const std::size_t D = X.cols;

  auto model = std::make_unique<LinearSoftmaxModel>();
  model->K_ = K;
  model->D_ = D;
  model->weights.assign(std::size_t(K) * D, 0.0);
  model->bias.assign(K, 0.0);

  Rng rng(params.seed);
  const std::size_t batch = std::max(1, params.batch);
  std::vector<double> dw, db;
  std::vector<int> yb;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    const auto order = epoch_order(X.rows, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < X.rows; start += batch) {
      const std::size_t bsz = std::min(batch, X.rows - start);
      const FeatureMatrix B = gather(X, order.data() + start, bsz);
      yb.resize(bsz);
      for (std::size_t i = 0; i < bsz; ++i) yb[i] = y[order[start + i]];

      loss_sum += linear_softmax_loss_grad(B, yb, *model, &dw, &db) * double(bsz);
      for (std::size_t i = 0; i < model->weights.size(); ++i)
        model->weights[i] -= params.lr * (dw[i] + params.l2 * model->weights[i]);
      for (int k = 0; k < K; ++k) model->bias[k] -= params.lr * db[k];
    }
    if (!std::isfinite(loss_sum))
      throw std::runtime_error(
          "linear softmax training diverged (loss is not finite); reduce the learning rate");
  }
  return model;
}

std::vector<int> ShallowNnModel::predict(const FeatureMatrix& X) const {
  check_features(*this, X);
  const int P = pre_units();
  std::vector<int> out(X.rows);
  const bool parallel = !omp_in_parallel() && X.rows > 64;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < X.rows; ++i) {
    std::vector<double> z1(P), h(hidden), z2(K_);
    dot_rows(X, i, w1.data(), b1.data(), P, D_, z1.data());
    if (activation == ShallowActivation::Relu) {
      for (int p = 0; p < P; ++p) h[p] = std::max(0.0, z1[p]);
    } else {
      for (int j = 0; j < hidden; ++j) h[j] = std::max(z1[2 * j], z1[2 * j + 1]);
    }
    for (int k = 0; k < K_; ++k) {
      double s = b2[k];
      const double* wk = w2.data() + std::size_t(k) * hidden;
      for (int j = 0; j < hidden; ++j) s += wk[j] * h[j];
      z2[k] = s;
    }
    out[i] = argmax(z2.data(), K_);
  }
  return out;
}

void ShallowNnModel::save(std::ostream& out) const {
  bin::write_u32(out, static_cast<std::uint32_t>(K_));
  bin::write_u64(out, D_);
  bin::write_u32(out, static_cast<std::uint32_t>(hidden));
  bin::write_u32(out, activation == ShallowActivation::Relu ? 0 : 1);
  bin::write_pod_vector(out, w1);
  bin::write_pod_vector(out, b1);
  bin::write_pod_vector(out, w2);
  bin::write_pod_vector(out, b2);
}

std::unique_ptr<ShallowNnModel> ShallowNnModel::load_payload(std::istream& in) {
  auto m = std::make_unique<ShallowNnModel>();
  m->K_ = static_cast<int>(bin::read_u32(in));
  m->D_ = bin::read_u64(in);
  m->hidden = static_cast<int>(bin::read_u32(in));
  m->activation = bin::read_u32(in) == 0 ? ShallowActivation::Relu : ShallowActivation::MaxPairs;
  m->w1 = bin::read_pod_vector<double>(in);
  m->b1 = bin::read_pod_vector<double>(in);
  m->w2 = bin::read_pod_vector<double>(in);
  m->b2 = bin::read_pod_vector<double>(in);
  return m;
}

double shallow_nn_loss_grad(const FeatureMatrix& X, const std::vector<int>& y,
                            const ShallowNnModel& model, ShallowNnGrads* grads) {
  const int K = model.K_;
  const int H = model.hidden;
  const int P = model.pre_units();
  const std::size_t D = model.D_;
  const std::size_t n = X.rows;

  std::vector<double> z1(n * P), h(n * H), probs(n * K);
  const bool parallel = !omp_in_parallel() && n >= 4;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    double* z = z1.data() + i * P;
    dot_rows(X, i, model.w1.data(), model.b1.data(), P, D, z);
    double* hb = h.data() + i * H;
    if (model.activation == ShallowActivation::Relu) {
      for (int p = 0; p < P; ++p) hb[p] = std::max(0.0, z[p]);
    } else {
      for (int j = 0; j < H; ++j) hb[j] = std::max(z[2 * j], z[2 * j + 1]);
    }
    double* pz = probs.data() + i * K;
    for (int k = 0; k < K; ++k) {
      double s = model.b2[k];
      const double* wk = model.w2.data() + std::size_t(k) * H;
      for (int j = 0; j < H; ++j) s += wk[j] * hb[j];
      pz[k] = s;
    }
    softmax_inplace(pz, K);
  }

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss += -std::log(probs[i * K + y[i]]);  // p == 0 reads as divergence
    probs[i * K + y[i]] -= 1.0;  // -> dlogits
  }
  if (!grads) return loss / double(n);

  std::vector<double> dz1(n * P);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    const double* pz = probs.data() + i * K;
    const double* z = z1.data() + i * P;
    double* dz = dz1.data() + i * P;
    for (int j = 0; j < H; ++j) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += model.w2[std::size_t(k) * H + j] * pz[k];
      if (model.activation == ShallowActivation::Relu) {
        dz[j] = z[j] > 0.0 ? s : 0.0;
      } else {
        const bool first = z[2 * j] >= z[2 * j + 1];  // ties route left
        dz[2 * j] = first ? s : 0.0;
        dz[2 * j + 1] = first ? 0.0 : s;
      }
    }
  }

  grads->dw2.resize(std::size_t(K) * H);
  grads->db2.resize(K);
  {
    FeatureMatrix hidden_feats;
    hidden_feats.kind = FeatureKind::RawPixels;
    hidden_feats.rows = n;
    hidden_feats.cols = H;
    hidden_feats.dense = h;
    accumulate_row_grads(hidden_feats, probs.data(), K, H, grads->dw2.data(),
                         grads->db2.data());
  }
  grads->dw1.resize(std::size_t(P) * D);
  grads->db1.resize(P);
  accumulate_row_grads(X, dz1.data(), P, D, grads->dw1.data(), grads->db1.data());
  return loss / double(n);
}

std::unique_ptr<ShallowNnModel> fit_shallow_nn(const FeatureMatrix& X, const std::vector<int>& y,
                                               int num_classes, const ShallowNnParams& params) {
  if (X.rows == 0 || X.rows != y.size()) throw std::invalid_argument("bad training data");
  if (params.hidden < num_classes)
    throw std::invalid_argument("hidden width must be at least the class count");
  const int K = num_classes;
  const std::size_t D = X.cols;

  auto model = std::make_unique<ShallowNnModel>();
  model->K_ = K;
  model->D_ = D;
  model->hidden = params.hidden;
  model->activation = params.activation;
  const int P = model->pre_units();
  const int H = params.hidden;

  Rng rng(params.seed);
  model->w1.resize(std::size_t(P) * D);
  model->b1.assign(P, 0.0);
  model->w2.resize(std::size_t(K) * H);
  model->b2.assign(K, 0.0);
  const double s1 = std::sqrt(2.0 / double(D));
  for (double& v : model->w1) v = s1 * rng.gaussian();
  const double s2 = std::sqrt(2.0 / double(H));
  for (double& v : model->w2) v = s2 * rng.gaussian();

  Sgd opt_w1(model->w1.size(), params.lr, params.momentum, params.l2);
  Sgd opt_b1(model->b1.size(), params.lr, params.momentum, 0.0);
  Sgd opt_w2(model->w2.size(), params.lr, params.momentum, params.l2);
  Sgd opt_b2(model->b2.size(), params.lr, params.momentum, 0.0);

  const std::size_t batch = std::max(1, params.batch);
  ShallowNnGrads grads;
  std::vector<int> yb;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    const auto order = epoch_order(X.rows, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < X.rows; start += batch) {
      const std::size_t bsz = std::min(batch, X.rows - start);
      const FeatureMatrix B = gather(X, order.data() + start, bsz);
      yb.resize(bsz);
      for (std::size_t i = 0; i < bsz; ++i) yb[i] = y[order[start + i]];

      loss_sum += shallow_nn_loss_grad(B, yb, *model, &grads) * double(bsz);
      opt_w1.step(model->w1.data(), grads.dw1.data(), model->w1.size());
      opt_b1.step(model->b1.data(), grads.db1.data(), model->b1.size());
      opt_w2.step(model->w2.data(), grads.dw2.data(), model->w2.size());
      opt_b2.step(model->b2.data(), grads.db2.data(), model->b2.size());
    }
    if (!std::isfinite(loss_sum))
      throw std::runtime_error(
          "shallow nn training diverged (loss is not finite); reduce the learning rate");
  }
  return model;
}

}  // namespace sigbench::models
