#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fgtrac::train {

struct Sample {
  std::string subject_raw_id;
  std::vector<double> features;
  int label = 0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Multinomial logistic regression, the whole model being the final
/// prediction layer: logits = W x + b.
struct ModelParams {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // classes x dim, row-major
  std::vector<double> bias;     // classes

  static ModelParams zeros(std::size_t classes, std::size_t dim);

  double& w(std::size_t k, std::size_t j) { return weights[k * dim + j]; }
  double w(std::size_t k, std::size_t j) const { return weights[k * dim + j]; }

  /// Flattened parameter count, K*d + K.
  std::size_t size() const { return classes * dim + classes; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Throws DimensionMismatch if the sample does not fit the model.
void check_shape(const ModelParams& params, const Sample& sample);

std::vector<double> logits(const ModelParams& params, std::span<const double> x);
/// Numerically stable softmax (max-shifted).
std::vector<double> softmax(std::span<const double> logits);

/// Cross-entropy -log p_label, via log-sum-exp.
double forward_loss(const ModelParams& params, const Sample& sample);

/// Exact gradient of forward_loss, flattened as W row-major then b:
/// dW = (p - y) x^T, db = p - y.
std::vector<double> loss_gradient(const ModelParams& params, const Sample& sample);

}  // namespace fgtrac::train
