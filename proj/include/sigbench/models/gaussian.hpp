#pragma once

#include "sigbench/models/model.hpp"

namespace sigbench::models {

enum class GaussianVariant { NaiveBayes, Lda, Qda };

struct GaussianParams {
  GaussianVariant variant = GaussianVariant::NaiveBayes;
  // Ridge: every covariance gets + epsilon*I with epsilon =
  // epsilon_scale * trace/D (per class for NB/QDA, pooled for LDA).
  double epsilon_scale = 1e-6;
  // QDA only: optionally score within the span of the class sample
  // covariance, dropping the out-of-span 1/epsilon term. The full ridge
  // form is the default: when a class's designated pixel pair is
  // constrained equal, the pair-difference direction has zero sample
  // variance and a wrong-class test point deviates along it, so the
  // out-of-span term is exactly what exposes pair-equality signals.
  bool span_only = false;
};

// Per-class Gaussian fits: naive_bayes = diagonal per-class variances,
// lda = shared full covariance, qda = per-class full covariance (stored as
// an eigenbasis). Prediction is argmax log-likelihood + log empirical
// prior. LDA/QDA require dense features.
std::unique_ptr<Model> fit_gaussian_generative(const data::FeatureMatrix& X,
                                               const std::vector<int>& y, int num_classes,
                                               const GaussianParams& params);

}  // namespace sigbench::models
