#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spintest/atpg.hpp"
#include "spintest/dropout.hpp"
#include "spintest/error.hpp"
#include "spintest/fault_context.hpp"
#include "spintest/inference.hpp"
#include "spintest/network.hpp"
#include "spintest/rng.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

/// Floor on the fitted standard deviation, so a fully deterministic profile
/// still yields a usable (razor-thin) acceptance band.
inline constexpr double kSigmaFloor = 1e-12;

/// Gaussian fit of the fault-free uncertainty distribution of the test
/// vectors; the three-sigma band is the health acceptance region.
struct UncertaintyProfile {
  double mu = 0.0;
  double sigma = kSigmaFloor;
  double b_upper = 0.0;
  double b_lower = 0.0;
  std::size_t fit_samples = 0;

  void validate() const {
    if (!(sigma >= kSigmaFloor)) throw contract_error("UncertaintyProfile: sigma below floor");
    if (!(b_lower <= mu && mu <= b_upper))
      throw contract_error("UncertaintyProfile: bounds do not bracket mu");
    if (b_lower < 0.0) throw contract_error("UncertaintyProfile: negative lower bound");
    if (!std::isfinite(mu) || !std::isfinite(sigma))
      throw contract_error("UncertaintyProfile: non-finite fit");
  }
};

/// Build a profile from raw pooled samples (the fit itself, kept separate so
/// it can be tested against closed-form arithmetic).
inline UncertaintyProfile profile_from_samples(std::span<const double> pooled) {
  if (pooled.size() < 2) throw spec_error("profile_from_samples: need >= 2 samples");
  UncertaintyProfile p;
  p.mu = mean_of(pooled);
  p.sigma = std::max(population_std(pooled), kSigmaFloor);
  p.b_upper = p.mu + 3.0 * p.sigma;
  p.b_lower = std::max(0.0, p.mu - 3.0 * p.sigma);
  p.fit_samples = pooled.size();
  p.validate();
  return p;
}

/// Pool raw uncertainties u_{i,r} over test vectors i and repetitions
/// r = 1..R_fit on the known-good model, then fit mu/sigma and the
/// mu +- 3 sigma bounds. Vector i, repetition r draws from
/// stream.derive(i).derive(r).
inline UncertaintyProfile fit_profile(const BinaryNetwork& net, const DropoutBank& bank,
                                      const TestVectorSet& tvs, int r_fit, int t_passes,
                                      RngStream stream) {
  if (tvs.size() < 2) throw spec_error("fit_profile: need >= 2 test vectors");
  if (r_fit < 1) throw contract_error("fit_profile: R_fit must be >= 1");
  const FaultContext ctx{};
  RealVec pooled;
  pooled.reserve(tvs.size() * static_cast<std::size_t>(r_fit));
  for (std::size_t i = 0; i < tvs.size(); ++i) {
    RngStream si = stream.derive(i);
    for (int r = 1; r <= r_fit; ++r)
      pooled.push_back(predict(net, tvs.vectors[i].input, t_passes, bank, ctx,
                               si.derive(static_cast<std::uint64_t>(r)))
                           .uncertainty);
  }
  return profile_from_samples(pooled);
}

/// Positive (fault-signalling) query: uncertainty strictly outside the
/// closed band [b_lower, b_upper].
inline bool is_positive(double u, const UncertaintyProfile& profile) {
  return u > profile.b_upper || u < profile.b_lower;
}

struct QueryRecord {
  double uncertainty = 0.0;
  bool positive = false;
};

/// Outcome of one vote-based test session.
struct Verdict {
  bool faulty = false;
  int positives = 0;      // positives seen (counting stops at L in Live mode)
  int queries_used = 0;   // index of the L-th positive, or |tvs| when Healthy
  std::vector<QueryRecord> record;  // per issued query (all N in Record mode)
  long long forward_passes = 0;     // total network passes spent
};

enum class SessionMode {
  Live,    // early-stop at the L-th positive
  Record,  // evaluate all queries (exact ROC replay at any L later)
};

/// Re-threshold a recorded positive/negative sequence at a given L using
/// live-session semantics.
inline Verdict replay_verdict(const std::vector<QueryRecord>& record, int vote_length) {
  if (vote_length < 1 || static_cast<std::size_t>(vote_length) > record.size())
    throw spec_error("replay_verdict: L out of range");
  Verdict v;
  for (std::size_t i = 0; i < record.size(); ++i) {
    if (record[i].positive) ++v.positives;
    if (v.positives >= vote_length) {
      v.faulty = true;
      v.queries_used = static_cast<int>(i + 1);
      return v;
    }
  }
  v.faulty = false;
  v.queries_used = static_cast<int>(record.size());
  return v;
}

/// Apply the ranked test vectors as sequential queries against the model
/// under test (its dropout bank and fault context included); each query is
/// one T-pass Bayesian inference whose uncertainty is checked against the
/// profile band. Faulty as soon as vote_length positives accumulate.
/// Query i draws from stream.derive(i). The session reads nothing but
/// uncertainties.
inline Verdict run_test_session(const BinaryNetwork& net, const DropoutBank& bank,
                                const FaultContext& ctx, const TestVectorSet& tvs,
                                const UncertaintyProfile& profile, int vote_length,
                                int t_passes, RngStream stream,
                                SessionMode mode = SessionMode::Live) {
  if (vote_length < 1 || static_cast<std::size_t>(vote_length) > tvs.size())
    throw spec_error("run_test_session: L out of range");
  profile.validate();
  Verdict v;
  int positives = 0;
  for (std::size_t i = 0; i < tvs.size(); ++i) {
    const double u =
        predict(net, tvs.vectors[i].input, t_passes, bank, ctx, stream.derive(i))
            .uncertainty;
    v.forward_passes += t_passes;
    const bool pos = is_positive(u, profile);
    v.record.push_back({u, pos});
    if (pos) ++positives;
    if (mode == SessionMode::Live && positives >= vote_length) break;
  }
  v.positives = positives;
  v.faulty = positives >= vote_length;
  if (v.faulty) {
    int seen = 0;
    for (std::size_t i = 0; i < v.record.size(); ++i) {
      if (v.record[i].positive && ++seen == vote_length) {
        v.queries_used = static_cast<int>(i + 1);
        break;
      }
    }
  } else {
    v.queries_used = static_cast<int>(tvs.size());
  }
  return v;
}

/// Reference estimation-based detector: each query averages the uncertainty
/// of inferences_per_query independent T-pass inferences before the band
/// check, costing inferences_per_query x the passes of the vote-based
/// session per query. Query i, inference e draws from
/// stream.derive(i).derive(e).
inline Verdict run_estimation_session(const BinaryNetwork& net, const DropoutBank& bank,
                                      const FaultContext& ctx, const TestVectorSet& tvs,
                                      const UncertaintyProfile& profile, int vote_length,
                                      int t_passes, int inferences_per_query,
                                      RngStream stream,
                                      SessionMode mode = SessionMode::Live) {
  if (vote_length < 1 || static_cast<std::size_t>(vote_length) > tvs.size())
    throw spec_error("run_estimation_session: L out of range");
  if (inferences_per_query < 1)
    throw spec_error("run_estimation_session: inferences_per_query must be >= 1");
  profile.validate();
  Verdict v;
  int positives = 0;
  for (std::size_t i = 0; i < tvs.size(); ++i) {
    RngStream si = stream.derive(i);
    double mean_u = 0.0;
    for (int e = 1; e <= inferences_per_query; ++e) {
      mean_u += predict(net, tvs.vectors[i].input, t_passes, bank, ctx,
                        si.derive(static_cast<std::uint64_t>(e)))
                    .uncertainty;
      v.forward_passes += t_passes;
    }
    mean_u /= static_cast<double>(inferences_per_query);
    const bool pos = is_positive(mean_u, profile);
    v.record.push_back({mean_u, pos});
    if (pos) ++positives;
    if (mode == SessionMode::Live && positives >= vote_length) break;
  }
  v.positives = positives;
  v.faulty = positives >= vote_length;
  if (v.faulty) {
    int seen = 0;
    for (std::size_t i = 0; i < v.record.size(); ++i) {
      if (v.record[i].positive && ++seen == vote_length) {
        v.queries_used = static_cast<int>(i + 1);
        break;
      }
    }
  } else {
    v.queries_used = static_cast<int>(tvs.size());
  }
  return v;
}

/// Fit for the estimation-based detector: pools per-query means of
/// inferences_per_query uncertainties, mirroring what its sessions compare
/// against the band.
inline UncertaintyProfile fit_estimation_profile(const BinaryNetwork& net,
                                                 const DropoutBank& bank,
                                                 const TestVectorSet& tvs, int r_fit,
                                                 int t_passes, int inferences_per_query,
                                                 RngStream stream) {
  if (tvs.size() < 2) throw spec_error("fit_estimation_profile: need >= 2 test vectors");
  if (r_fit < 1) throw contract_error("fit_estimation_profile: R_fit must be >= 1");
  if (inferences_per_query < 1)
    throw spec_error("fit_estimation_profile: inferences_per_query must be >= 1");
  const FaultContext ctx{};
  RealVec pooled;
  pooled.reserve(tvs.size() * static_cast<std::size_t>(r_fit));
  for (std::size_t i = 0; i < tvs.size(); ++i) {
    RngStream si = stream.derive(i);
    for (int r = 1; r <= r_fit; ++r) {
      RngStream sr = si.derive(static_cast<std::uint64_t>(r));
      double mean_u = 0.0;
      for (int e = 1; e <= inferences_per_query; ++e)
        mean_u += predict(net, tvs.vectors[i].input, t_passes, bank, ctx,
                          sr.derive(static_cast<std::uint64_t>(e)))
                      .uncertainty;
      pooled.push_back(mean_u / static_cast<double>(inferences_per_query));
    }
  }
  return profile_from_samples(pooled);
}

}  // namespace spintest
