#include "sigbench/models/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <omp.h>

#include "sigbench/binio.hpp"

namespace sigbench::models {
namespace {

using data::FeatureKind;
using data::FeatureMatrix;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr double kTwoPiLog = 1.8378770664093453;  // ln(2*pi)

std::vector<std::size_t> class_counts(const std::vector<int>& y, int K) {
  std::vector<std::size_t> counts(K, 0);
  for (int c : y) ++counts[c];
  return counts;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
    out[i] = best;
  }
  return out;
}

// Diagonal per-class Gaussians. Works on dense features directly and on
// one-hot features through Bernoulli-style count statistics, scoring only
// the active columns against a precomputed all-zeros baseline.
class NaiveBayesModel final : public Model {
 public:
  std::string kind() const override { return "gaussian_nb"; }
  int num_classes() const override { return K_; }
  std::size_t feature_dim() const override { return D_; }

  std::vector<int> predict(const FeatureMatrix& X) const override {
    check_features(*this, X);
    Matrix scores(X.rows, K_);
    const bool parallel = !omp_in_parallel() && X.rows > 64;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t i = 0; i < X.rows; ++i) {
      for (int c = 0; c < K_; ++c) {
        double s = log_prior_[c];
        if (X.kind == FeatureKind::RawPixels) {
          const double* row = X.row(i);
          const double* mu = mean_.data() + std::size_t(c) * D_;
          const double* iv = inv_var_.data() + std::size_t(c) * D_;
          const double* lv = log_var_.data() + std::size_t(c) * D_;
          for (std::size_t j = 0; j < D_; ++j) {
            const double d = row[j] - mu[j];
            s += -0.5 * (d * d * iv[j] + lv[j] + kTwoPiLog);
          }
        } else {
          s += zero_base_[c];
          for (std::int32_t j : X.active_row(i)) s += active_delta_[std::size_t(c) * D_ + j];
        }
        scores(i, c) = s;
      }
    }
    return argmax_rows(scores);
  }

  void save(std::ostream& out) const override {
    bin::write_u32(out, static_cast<std::uint32_t>(K_));
    bin::write_u64(out, D_);
    bin::write_pod_vector(out, log_prior_);
    bin::write_pod_vector(out, mean_);
    bin::write_pod_vector(out, inv_var_);
    bin::write_pod_vector(out, log_var_);
    bin::write_pod_vector(out, zero_base_);
    bin::write_pod_vector(out, active_delta_);
  }

  static std::unique_ptr<NaiveBayesModel> load_payload(std::istream& in) {
    auto m = std::make_unique<NaiveBayesModel>();
    m->K_ = static_cast<int>(bin::read_u32(in));
    m->D_ = bin::read_u64(in);
    m->log_prior_ = bin::read_pod_vector<double>(in);
    m->mean_ = bin::read_pod_vector<double>(in);
    m->inv_var_ = bin::read_pod_vector<double>(in);
    m->log_var_ = bin::read_pod_vector<double>(in);
    m->zero_base_ = bin::read_pod_vector<double>(in);
    m->active_delta_ = bin::read_pod_vector<double>(in);
    return m;
  }

  int K_ = 0;
  std::size_t D_ = 0;
  std::vector<double> log_prior_;
  std::vector<double> mean_, inv_var_, log_var_;    // [K, D]
  std::vector<double> zero_base_, active_delta_;    // one-hot fast path
};

std::unique_ptr<Model> fit_naive_bayes(const FeatureMatrix& X, const std::vector<int>& y, int K,
                                       const GaussianParams& params) {
  const std::size_t D = X.cols;
  auto counts = class_counts(y, K);
  for (int c = 0; c < K; ++c)
    if (counts[c] < 2)
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " needs at least 2 samples for variance estimates");

  auto model = std::make_unique<NaiveBayesModel>();
  model->K_ = K;
  model->D_ = D;
  model->log_prior_.resize(K);
  model->mean_.assign(std::size_t(K) * D, 0.0);
  std::vector<double> sumsq(std::size_t(K) * D, 0.0);

  for (std::size_t i = 0; i < X.rows; ++i) {
    const int c = y[i];
    double* mu = model->mean_.data() + std::size_t(c) * D;
    double* sq = sumsq.data() + std::size_t(c) * D;
    if (X.kind == FeatureKind::RawPixels) {
      const double* row = X.row(i);
      for (std::size_t j = 0; j < D; ++j) {
        mu[j] += row[j];
        sq[j] += row[j] * row[j];
      }
    } else {
      for (std::int32_t j : X.active_row(i)) {
        mu[j] += 1.0;
        sq[j] += 1.0;
      }
    }
  }

  model->inv_var_.resize(std::size_t(K) * D);
  model->log_var_.resize(std::size_t(K) * D);
  for (int c = 0; c < K; ++c) {
    const double n = double(counts[c]);
    model->log_prior_[c] = std::log(n / double(X.rows));
    double* mu = model->mean_.data() + std::size_t(c) * D;
    double* sq = sumsq.data() + std::size_t(c) * D;
    double trace = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      mu[j] /= n;
      sq[j] = std::max(0.0, sq[j] / n - mu[j] * mu[j]) * n / (n - 1.0);
      trace += sq[j];
    }
    const double eps = params.epsilon_scale * trace / double(D);
    if (trace + eps <= 0.0)
      throw std::runtime_error("singular covariance after regularization for class " +
                               std::to_string(c));
    for (std::size_t j = 0; j < D; ++j) {
      const double var = sq[j] + eps;
      model->inv_var_[std::size_t(c) * D + j] = 1.0 / var;
      model->log_var_[std::size_t(c) * D + j] = std::log(var);
    }
  }

  if (X.kind == FeatureKind::OneHotChars) {
    model->zero_base_.assign(K, 0.0);
    model->active_delta_.assign(std::size_t(K) * D, 0.0);
    for (int c = 0; c < K; ++c) {
      double base = 0.0;
      for (std::size_t j = 0; j < D; ++j) {
        const std::size_t idx = std::size_t(c) * D + j;
        const double mu = model->mean_[idx];
        const double at0 = -0.5 * (mu * mu * model->inv_var_[idx] + model->log_var_[idx] + kTwoPiLog);
        const double d1 = 1.0 - mu;
        const double at1 = -0.5 * (d1 * d1 * model->inv_var_[idx] + model->log_var_[idx] + kTwoPiLog);
        base += at0;
        model->active_delta_[idx] = at1 - at0;
      }
      model->zero_base_[c] = base;
    }
  }
  return model;
}

// Shared-covariance discriminant: linear scores x'a_c + b_c with
// a_c = Sigma^-1 mu_c.
class LdaModel final : public Model {
 public:
  std::string kind() const override { return "lda"; }
  int num_classes() const override { return K_; }
  std::size_t feature_dim() const override { return D_; }

  std::vector<int> predict(const FeatureMatrix& X) const override {
    check_features(*this, X);
    if (X.kind != FeatureKind::RawPixels)
      throw std::invalid_argument("lda requires dense features");
    Matrix scores(X.rows, K_);
    const bool parallel = !omp_in_parallel() && X.rows > 64;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t i = 0; i < X.rows; ++i) {
      Eigen::Map<const Vector> x(X.row(i), D_);
      for (int c = 0; c < K_; ++c)
        scores(i, c) = x.dot(weights_.col(c)) + bias_[c];
    }
    return argmax_rows(scores);
  }

  void save(std::ostream& out) const override {
    bin::write_u32(out, static_cast<std::uint32_t>(K_));
    bin::write_u64(out, D_);
    std::vector<double> w(weights_.data(), weights_.data() + weights_.size());
    bin::write_pod_vector(out, w);
    bin::write_pod_vector(out, bias_);
  }

  static std::unique_ptr<LdaModel> load_payload(std::istream& in) {
    auto m = std::make_unique<LdaModel>();
    m->K_ = static_cast<int>(bin::read_u32(in));
    m->D_ = bin::read_u64(in);
    auto w = bin::read_pod_vector<double>(in);
    m->weights_ = Eigen::Map<Matrix>(w.data(), m->D_, m->K_);
    m->bias_ = bin::read_pod_vector<double>(in);
    return m;
  }

  int K_ = 0;
  std::size_t D_ = 0;
  Matrix weights_;  // [D, K]
  std::vector<double> bias_;
};

std::unique_ptr<Model> fit_lda(const FeatureMatrix& X, const std::vector<int>& y, int K,
                               const GaussianParams& params) {
  if (X.kind != FeatureKind::RawPixels)
    throw std::invalid_argument("lda requires dense features");
  const std::size_t D = X.cols;
  auto counts = class_counts(y, K);
  for (int c = 0; c < K; ++c)
    if (counts[c] < 2)
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " needs at least 2 samples for variance estimates");

  Matrix means = Matrix::Zero(D, K);
  for (std::size_t i = 0; i < X.rows; ++i)
    means.col(y[i]) += Eigen::Map<const Vector>(X.row(i), D);
  for (int c = 0; c < K; ++c) means.col(c) /= double(counts[c]);

  // Pooled within-class scatter, accumulated class by class.
  Matrix sigma = Matrix::Zero(D, D);
  for (int c = 0; c < K; ++c) {
    Matrix centered(counts[c], D);
    std::size_t r = 0;
    for (std::size_t i = 0; i < X.rows; ++i)
      if (y[i] == c)
        centered.row(r++) = Eigen::Map<const Vector>(X.row(i), D).transpose() -
                            means.col(c).transpose();
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0);
  }
  sigma = sigma.selfadjointView<Eigen::Lower>();
  sigma /= double(X.rows - K);
  const double eps = params.epsilon_scale * sigma.trace() / double(D);
  sigma.diagonal().array() += eps;

  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("singular pooled covariance after regularization");

  auto model = std::make_unique<LdaModel>();
  model->K_ = K;
  model->D_ = D;
  model->weights_ = llt.solve(means);
  model->bias_.resize(K);
  for (int c = 0; c < K; ++c)
    model->bias_[c] = -0.5 * means.col(c).dot(model->weights_.col(c)) +
                      std::log(double(counts[c]) / double(X.rows));
  return model;
}

// Per-class covariance held as an eigenbasis (directions, variances); the
// quadratic form is evaluated in that basis so the D x D matrix is never
// materialized.
class QdaModel final : public Model {
 public:
  std::string kind() const override { return "qda"; }
  int num_classes() const override { return K_; }
  std::size_t feature_dim() const override { return D_; }

  std::vector<int> predict(const FeatureMatrix& X) const override {
    check_features(*this, X);
    if (X.kind != FeatureKind::RawPixels)
      throw std::invalid_argument("qda requires dense features");
    Matrix scores(X.rows, K_);
    const bool parallel = !omp_in_parallel() && X.rows > 16;
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
    for (std::size_t i = 0; i < X.rows; ++i) {
      Eigen::Map<const Vector> x(X.row(i), D_);
      for (int c = 0; c < K_; ++c) {
        const auto& cls = classes_[c];
        Vector d = x - cls.mean;
        Vector t = cls.basis.transpose() * d;
        double quad = (t.array().square() / (cls.variances.array() + cls.epsilon)).sum();
        double logdet = (cls.variances.array() + cls.epsilon).log().sum();
        if (!span_only_) {
          const double out_of_span = d.squaredNorm() - t.squaredNorm();
          quad += std::max(0.0, out_of_span) / cls.epsilon;
          logdet += double(D_ - cls.variances.size()) * std::log(cls.epsilon);
        }
        scores(i, c) = -0.5 * (quad + logdet) + cls.log_prior;
      }
    }
    return argmax_rows(scores);
  }

  void save(std::ostream& out) const override {
    bin::write_u32(out, static_cast<std::uint32_t>(K_));
    bin::write_u64(out, D_);
    bin::write_u32(out, span_only_ ? 1 : 0);
    for (const auto& cls : classes_) {
      bin::write_f64(out, cls.log_prior);
      bin::write_f64(out, cls.epsilon);
      std::vector<double> mu(cls.mean.data(), cls.mean.data() + cls.mean.size());
      bin::write_pod_vector(out, mu);
      std::vector<double> var(cls.variances.data(), cls.variances.data() + cls.variances.size());
      bin::write_pod_vector(out, var);
      std::vector<double> basis(cls.basis.data(), cls.basis.data() + cls.basis.size());
      bin::write_pod_vector(out, basis);
    }
  }

  static std::unique_ptr<QdaModel> load_payload(std::istream& in) {
    auto m = std::make_unique<QdaModel>();
    m->K_ = static_cast<int>(bin::read_u32(in));
    m->D_ = bin::read_u64(in);
    m->span_only_ = bin::read_u32(in) != 0;
    m->classes_.resize(m->K_);
    for (auto& cls : m->classes_) {
      cls.log_prior = bin::read_f64(in);
      cls.epsilon = bin::read_f64(in);
      auto mu = bin::read_pod_vector<double>(in);
      cls.mean = Eigen::Map<Vector>(mu.data(), mu.size());
      auto var = bin::read_pod_vector<double>(in);
      cls.variances = Eigen::Map<Vector>(var.data(), var.size());
      auto basis = bin::read_pod_vector<double>(in);
      cls.basis = Eigen::Map<Matrix>(basis.data(), m->D_, var.size());
    }
    return m;
  }

  struct ClassFit {
    double log_prior = 0.0;
    double epsilon = 0.0;
    Vector mean;
    Vector variances;  // [r], descending
    Matrix basis;      // [D, r], orthonormal columns
  };

  int K_ = 0;
  std::size_t D_ = 0;
  bool span_only_ = true;
  std::vector<ClassFit> classes_;
};

std::unique_ptr<Model> fit_qda(const FeatureMatrix& X, const std::vector<int>& y, int K,
                               const GaussianParams& params) {
  if (X.kind != FeatureKind::RawPixels)
    throw std::invalid_argument("qda requires dense features");
  const std::size_t D = X.cols;
  auto counts = class_counts(y, K);
  for (int c = 0; c < K; ++c)
    if (counts[c] < 2)
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " needs at least 2 samples for variance estimates");

  auto model = std::make_unique<QdaModel>();
  model->K_ = K;
  model->D_ = D;
  model->span_only_ = params.span_only;
  model->classes_.resize(K);

#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < K; ++c) {
    Matrix centered(counts[c], D);
    Vector mean = Vector::Zero(D);
    std::size_t r = 0;
    for (std::size_t i = 0; i < X.rows; ++i)
      if (y[i] == c) {
        centered.row(r++) = Eigen::Map<const Vector>(X.row(i), D).transpose();
        mean += Eigen::Map<const Vector>(X.row(i), D);
      }
    mean /= double(counts[c]);
    centered.rowwise() -= mean.transpose();

    // Eigen-decompose the Gram matrix; covariance eigenpairs follow from
    // lambda_i = g_i/(n-1), v_i = X' u_i / sqrt(g_i).
    Matrix gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector& g = eig.eigenvalues();  // ascending
    const double gmax = std::max(g(g.size() - 1), 0.0);
    const double tol = gmax * 1e-12;

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = g.size() - 1; i >= 0; --i)
      if (g(i) > tol) keep.push_back(i);

    auto& cls = model->classes_[c];
    cls.mean = mean;
    cls.log_prior = std::log(double(counts[c]) / double(X.rows));
    cls.variances.resize(keep.size());
    cls.basis.resize(D, keep.size());
    const double denom = double(counts[c] - 1);
    double trace = gram.trace() / denom;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const Eigen::Index i = keep[k];
      cls.variances(k) = g(i) / denom;
      cls.basis.col(k) = centered.transpose() * eig.eigenvectors().col(i) / std::sqrt(g(i));
    }
    cls.epsilon = params.epsilon_scale * trace / double(D);
    if (!(cls.epsilon > 0.0) || keep.empty()) {
      // Constant class data leaves nothing to invert.
      cls.epsilon = -1.0;
    }
  }
  for (int c = 0; c < K; ++c)
    if (model->classes_[c].epsilon <= 0.0)
      throw std::runtime_error("singular covariance after regularization for class " +
                               std::to_string(c));
  return model;
}

}  // namespace

std::unique_ptr<Model> fit_gaussian_generative(const FeatureMatrix& X, const std::vector<int>& y,
                                               int num_classes, const GaussianParams& params) {
  if (X.rows == 0 || X.rows != y.size())
    throw std::invalid_argument("bad training data for gaussian fit");
  switch (params.variant) {
    case GaussianVariant::NaiveBayes:
      return fit_naive_bayes(X, y, num_classes, params);
    case GaussianVariant::Lda:
      return fit_lda(X, y, num_classes, params);
    case GaussianVariant::Qda:
      return fit_qda(X, y, num_classes, params);
  }
  throw std::logic_error("unknown gaussian variant");
}

namespace detail {
std::unique_ptr<Model> load_gaussian_payload(const std::string& kind, std::istream& in) {
  if (kind == "gaussian_nb") return NaiveBayesModel::load_payload(in);
  if (kind == "lda") return LdaModel::load_payload(in);
  if (kind == "qda") return QdaModel::load_payload(in);
  return nullptr;
}
}  // namespace detail

}  // namespace sigbench::models
