#include "fgtrac/model.hpp"

#include <algorithm>
#include <cmath>

#include "fgtrac/error.hpp"

namespace fgtrac::train {

ModelParams ModelParams::zeros(std::size_t classes, std::size_t dim) {
  return {classes, dim, std::vector<double>(classes * dim, 0.0), std::vector<double>(classes, 0.0)};
}

void check_shape(const ModelParams& params, const Sample& sample) {
  if (sample.features.size() != params.dim) {
    throw Error(ErrorCode::DimensionMismatch, "sample has " + std::to_string(sample.features.size()) +
                                                  " features, model expects " + std::to_string(params.dim));
  }
  if (sample.label < 0 || static_cast<std::size_t>(sample.label) >= params.classes) {
    throw Error(ErrorCode::DimensionMismatch, "label " + std::to_string(sample.label) + " outside model classes");
  }
}

std::vector<double> logits(const ModelParams& params, std::span<const double> x) {
  std::vector<double> z(params.classes);
  for (std::size_t k = 0; k < params.classes; ++k) {
    double acc = params.bias[k];
    for (std::size_t j = 0; j < params.dim; ++j) acc += params.w(k, j) * x[j];
    z[k] = acc;
  }
  return z;
}

std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k] - m);
    total += p[k];
  }
  for (auto& v : p) v /= total;
  return p;
}

double forward_loss(const ModelParams& params, const Sample& sample) {
  check_shape(params, sample);
  auto z = logits(params, sample.features);
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - m);
  return std::log(total) - (z[sample.label] - m);
}

std::vector<double> loss_gradient(const ModelParams& params, const Sample& sample) {
  check_shape(params, sample);
  auto p = softmax(logits(params, sample.features));
  p[sample.label] -= 1.0;
  std::vector<double> g(params.size());
  for (std::size_t k = 0; k < params.classes; ++k) {
    for (std::size_t j = 0; j < params.dim; ++j) g[k * params.dim + j] = p[k] * sample.features[j];
    g[params.classes * params.dim + k] = p[k];
  }
  return g;
}

}  // namespace fgtrac::train
