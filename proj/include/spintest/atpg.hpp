#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spintest/dropout.hpp"
#include "spintest/error.hpp"
#include "spintest/fault_context.hpp"
#include "spintest/inference.hpp"
#include "spintest/network.hpp"
#include "spintest/rng.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

/// One candidate test vector: a training input plus the variance of its
/// uncertainty across repeated Bayesian inferences (lower = more repeatable).
struct ScoredVector {
  BitVec input;
  double repeatability_score = 0.0;
  std::size_t train_index = 0;  // provenance into the training split
};

/// Ranked test vectors plus the parameters they were generated with.
struct TestVectorSet {
  std::vector<ScoredVector> vectors;  // ascending score, ties by train_index
  int repetitions = 200;              // R
  int passes = 20;                    // T
  std::uint64_t seed = 0;

  std::size_t size() const { return vectors.size(); }

  void validate() const {
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (!std::isfinite(vectors[i].repeatability_score) ||
          vectors[i].repeatability_score < 0.0)
        throw contract_error("TestVectorSet: score not finite/non-negative");
      if (i > 0) {
        const auto& a = vectors[i - 1];
        const auto& b = vectors[i];
        if (a.repeatability_score > b.repeatability_score ||
            (a.repeatability_score == b.repeatability_score &&
             a.train_index > b.train_index))
          throw contract_error("TestVectorSet: not sorted by (score, train_index)");
      }
    }
  }
};

/// Variance of the uncertainty of x across R repeated T-pass inferences on
/// the fault-free model; repetition r draws from stream.derive(r), r = 1..R.
inline double repeatability_score(const BinaryNetwork& net, const DropoutBank& bank,
                                  const BitVec& x, int repetitions, int t_passes,
                                  RngStream stream) {
  if (repetitions < 2) throw contract_error("repeatability_score: R must be >= 2");
  if (t_passes < 2) throw contract_error("repeatability_score: T must be >= 2");
  const FaultContext ctx{};
  RealVec u(static_cast<std::size_t>(repetitions));
  for (int r = 1; r <= repetitions; ++r)
    u[static_cast<std::size_t>(r - 1)] =
        predict(net, x, t_passes, bank, ctx, stream.derive(static_cast<std::uint64_t>(r)))
            .uncertainty;
  return population_variance(u);
}

/// Score training inputs by repeatability and keep the N most repeatable
/// (lowest variance), stable-sorted ascending with ties broken by training
/// index. candidate_pool > 0 restricts scoring to that many uniformly
/// subsampled inputs (desk-scale knob; 0 scores the whole split).
/// seed_tag is recorded verbatim in the returned set.
inline TestVectorSet generate_test_vectors(const BinaryNetwork& net,
                                           const DropoutBank& bank,
                                           const std::vector<BitVec>& train_inputs,
                                           int repetitions, int t_passes, int n_vectors,
                                           RngStream stream, std::uint64_t seed_tag = 0,
                                           std::size_t candidate_pool = 0) {
  if (n_vectors < 1) throw spec_error("generate_test_vectors: N must be >= 1");
  if (static_cast<std::size_t>(n_vectors) > train_inputs.size())
    throw spec_error("generate_test_vectors: N exceeds training-set size");

  std::vector<std::size_t> candidates;
  if (candidate_pool > 0 && candidate_pool < train_inputs.size()) {
    if (candidate_pool < static_cast<std::size_t>(n_vectors))
      throw spec_error("generate_test_vectors: candidate pool smaller than N");
    RngStream pool_stream = stream.derive(0);
    std::vector<std::size_t> idx(train_inputs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < candidate_pool; ++i) {
      const std::size_t j = i + pool_stream.uniform_index(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    candidates.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(candidate_pool));
    std::sort(candidates.begin(), candidates.end());
  } else {
    candidates.resize(train_inputs.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
  }

  TestVectorSet out;
  out.repetitions = repetitions;
  out.passes = t_passes;
  out.seed = seed_tag;
  out.vectors.reserve(candidates.size());
  RngStream score_root = stream.derive(1);
  for (std::size_t i : candidates) {
    ScoredVector sv;
    sv.input = train_inputs[i];
    sv.train_index = i;
    sv.repeatability_score =
        repeatability_score(net, bank, sv.input, repetitions, t_passes, score_root.derive(i));
    out.vectors.push_back(std::move(sv));
  }
  std::stable_sort(out.vectors.begin(), out.vectors.end(),
                   [](const ScoredVector& a, const ScoredVector& b) {
                     if (a.repeatability_score != b.repeatability_score)
                       return a.repeatability_score < b.repeatability_score;
                     return a.train_index < b.train_index;
                   });
  out.vectors.resize(static_cast<std::size_t>(n_vectors));
  out.validate();
  return out;
}

}  // namespace spintest
