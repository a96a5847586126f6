#pragma once

#include <cstddef>

#include "spintest/dropout.hpp"
#include "spintest/engine.hpp"
#include "spintest/error.hpp"
#include "spintest/fault_context.hpp"
#include "spintest/network.hpp"
#include "spintest/rng.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

/// Monte Carlo Dropout prediction: mean of T stochastic softmax outputs plus
/// the variance-based uncertainty.
struct PredictiveResult {
  RealVec mean_probs;
  int predicted_class = 0;
  double uncertainty = 0.0;
  RealMat prob_samples;  // T x C, retained for diagnostics
};

/// Class-averaged predictive variance: mean over classes of the population
/// variance of each class probability across the T passes.
inline double uncertainty_of(const RealMat& prob_samples) {
  const std::size_t t = prob_samples.rows();
  const std::size_t c = prob_samples.cols();
  if (t < 2) throw contract_error("uncertainty_of: need >= 2 samples");
  double acc = 0.0;
  RealVec col(t);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < t; ++i) col[i] = prob_samples(i, j);
    acc += population_variance(col);
  }
  return acc / static_cast<double>(c);
}

/// T softmax rows, pass t drawn from stream.derive(t) (t = 1..T). Accepts
/// T >= 1; accuracy evaluation uses T = 1, predict() requires T >= 2.
inline RealMat sample_prob_matrix(const BinaryNetwork& net, const BitVec& x, int t_passes,
                                  const DropoutBank& bank, const FaultContext& ctx,
                                  RngStream stream) {
  if (t_passes < 1) throw contract_error("sample_prob_matrix: T must be >= 1");
  RealMat probs(static_cast<std::size_t>(t_passes),
                static_cast<std::size_t>(net.output_dim()));
  for (int t = 1; t <= t_passes; ++t) {
    RngStream st = stream.derive(static_cast<std::uint64_t>(t));
    const MaskSet masks = sample_masks(bank, net, st.derive(0));
    const RealVec p = softmax(forward(net, x, masks, ctx, st.derive(1)));
    for (std::size_t j = 0; j < p.size(); ++j)
      probs(static_cast<std::size_t>(t - 1), j) = p[j];
  }
  return probs;
}

inline int argmax_lowest(const RealVec& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

inline PredictiveResult predict(const BinaryNetwork& net, const BitVec& x, int t_passes,
                                const DropoutBank& bank, const FaultContext& ctx,
                                RngStream stream) {
  if (t_passes < 2) throw contract_error("predict: T must be >= 2");
  PredictiveResult r;
  r.prob_samples = sample_prob_matrix(net, x, t_passes, bank, ctx, stream);
  const std::size_t c = r.prob_samples.cols();
  r.mean_probs.assign(c, 0.0);
  for (std::size_t t = 0; t < r.prob_samples.rows(); ++t)
    for (std::size_t j = 0; j < c; ++j) r.mean_probs[j] += r.prob_samples(t, j);
  for (double& v : r.mean_probs) v /= static_cast<double>(t_passes);
  r.predicted_class = argmax_lowest(r.mean_probs);
  r.uncertainty = uncertainty_of(r.prob_samples);
  return r;
}

}  // namespace spintest
