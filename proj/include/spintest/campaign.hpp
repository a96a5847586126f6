#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spintest/atpg.hpp"
#include "spintest/dataset.hpp"
#include "spintest/detector.hpp"
#include "spintest/dropout.hpp"
#include "spintest/error.hpp"
#include "spintest/fault_context.hpp"
#include "spintest/faults.hpp"
#include "spintest/inference.hpp"
#include "spintest/network.hpp"
#include "spintest/parallel.hpp"
#include "spintest/rng.hpp"
#include "spintest/tensor.hpp"
#include "spintest/trainer.hpp"

namespace spintest {

enum class FaultClass { Benign, Critical };

/// Critical iff the accuracy drop strictly exceeds delta_acc.
inline FaultClass classify_fault(double acc_clean, double acc_faulty, double delta_acc) {
  if (!(acc_clean >= 0.0 && acc_clean <= 1.0) || !(acc_faulty >= 0.0 && acc_faulty <= 1.0))
    throw contract_error("classify_fault: accuracies must be in [0,1]");
  if (!(delta_acc > 0.0)) throw spec_error("classify_fault: delta_acc must be > 0");
  return (acc_clean - acc_faulty) > delta_acc ? FaultClass::Critical : FaultClass::Benign;
}

/// Gaussian-magnitude fault kinds sweep their sigma; discrete kinds sweep
/// their cell/generator rate.
inline bool sweep_value_is_sigma(FaultKind kind) {
  return kind == FaultKind::AdditiveGaussian || kind == FaultKind::MultiplicativeGaussian ||
         kind == FaultKind::DropProbVariation;
}

inline FaultSpec spec_with_value(FaultSpec base, double value) {
  if (sweep_value_is_sigma(base.kind))
    base.sigma = value;
  else
    base.rate = value;
  return base;
}

/// One fault configuration swept over a list of rates (or sigmas).
struct SweepSpec {
  std::string name;  // report label
  FaultSpec base;
  std::vector<double> values;
};

struct CampaignConfig {
  std::vector<SweepSpec> sweeps;
  int injections_per_point = 100;  // M
  int eval_subset = 200;           // accuracy-eval samples from the eval split
  int t_acc = 20;                  // passes per accuracy evaluation
  double delta_acc = 0.01;         // criticality threshold (accuracy points)
  int vote_length = 4;             // detector L
  int t_detect = 20;               // passes per test query
  int control_sessions = 200;      // fault-free sessions for FPR
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (injections_per_point < 1) throw spec_error("CampaignConfig: M must be >= 1");
    if (!(delta_acc > 0.0)) throw spec_error("CampaignConfig: delta_acc must be > 0");
    if (eval_subset < 1) throw spec_error("CampaignConfig: eval_subset must be >= 1");
    if (t_acc < 1 || t_detect < 2) throw spec_error("CampaignConfig: bad pass counts");
    if (vote_length < 1) throw spec_error("CampaignConfig: L must be >= 1");
    if (control_sessions < 0) throw spec_error("CampaignConfig: bad control count");
    if (threads < 1) throw spec_error("CampaignConfig: threads must be >= 1");
    for (const auto& s : sweeps) {
      for (double v : s.values) spec_with_value(s.base, v).validate();
      if (s.values.empty()) throw spec_error("CampaignConfig: sweep without values");
    }
  }
};

/// Everything observed for one injected fault.
struct InjectionRecord {
  int sweep = 0;
  int point = 0;
  int injection = 0;  // m = 1..M
  double faulty_accuracy = 0.0;
  FaultClass cls = FaultClass::Benign;
  bool detected = false;   // at the configured L
  int queries_used = 0;    // live-session cost at the configured L
  std::vector<QueryRecord> record;  // all queries (no early stop)
};

struct PointResult {
  std::string sweep_name;
  FaultSpec spec;  // with the sweep value applied
  double value = 0.0;
  double clean_accuracy = 0.0;
  double mean_faulty_accuracy = 0.0;
  double std_faulty_accuracy = 0.0;
  int benign_count = 0;
  int critical_count = 0;
  int detected_benign = 0;
  int detected_critical = 0;
  double coverage_critical = 0.0;  // TPR over critical injections (0 when none)
  double coverage_benign = 0.0;
  double fpr = 0.0;                // campaign-level control FPR at the configured L
  std::vector<InjectionRecord> records;
};

struct CampaignResult {
  CampaignConfig config;
  double clean_accuracy = 0.0;
  std::vector<PointResult> points;
  std::vector<Verdict> control_verdicts;  // recorded fault-free sessions
  double control_fpr = 0.0;
};

namespace campaign_labels {
inline constexpr std::uint64_t kAccuracy = 1;  // shared clean/faulty eval stream
inline constexpr std::uint64_t kControl = 2;
inline constexpr std::uint64_t kInject = 3;
inline constexpr std::uint64_t kCalib = 4;
}  // namespace campaign_labels

/// Monte Carlo fault-injection campaign. Per sweep point and injection m:
/// inject a fresh fault, measure faulty Bayesian accuracy on the eval
/// subset, classify benign/critical, and run a recorded test session.
/// Faulty accuracy reuses the clean evaluation's stream (common random
/// numbers), so a no-op fault reproduces the clean accuracy exactly.
/// Control sessions on the fault-free model give the FPR.
inline CampaignResult run_campaign(const BinaryNetwork& net, const Dataset& data,
                                   const TestVectorSet& tvs,
                                   const UncertaintyProfile& profile,
                                   const CampaignConfig& cfg) {
  cfg.validate();
  net.validate();
  data.validate();
  tvs.validate();
  profile.validate();
  if (tvs.size() == 0) throw spec_error("run_campaign: empty test-vector set");
  if (static_cast<std::size_t>(cfg.vote_length) > tvs.size())
    throw spec_error("run_campaign: L exceeds test-vector count");

  RngStream root(cfg.seed);
  const std::size_t n_sub =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.eval_subset), data.eval_inputs.size());
  if (n_sub == 0) throw spec_error("run_campaign: empty accuracy-eval subset");
  const std::vector<BitVec> sub_inputs(data.eval_inputs.begin(),
                                       data.eval_inputs.begin() + static_cast<std::ptrdiff_t>(n_sub));
  const std::vector<int> sub_labels(data.eval_labels.begin(),
                                    data.eval_labels.begin() + static_cast<std::ptrdiff_t>(n_sub));

  CampaignResult result;
  result.config = cfg;

  const DropoutBank healthy(net);
  result.clean_accuracy =
      evaluate_accuracy(net, sub_inputs, sub_labels, cfg.t_acc, healthy, FaultContext{},
                        root.derive(campaign_labels::kAccuracy));

  bool needs_calibration = false;
  for (const auto& s : cfg.sweeps)
    if (s.base.location == FaultLocation::MacConductance &&
        s.base.kind == FaultKind::AdditiveGaussian)
      needs_calibration = true;
  RealVec calibration;
  if (needs_calibration) {
    const std::size_t n_cal = std::min<std::size_t>(200, data.train_inputs.size());
    calibration = calibrate_layer_std(
        net, healthy,
        std::span<const BitVec>(data.train_inputs.data(), n_cal),
        root.derive(campaign_labels::kCalib));
  }

  result.control_verdicts.resize(static_cast<std::size_t>(cfg.control_sessions));
  parallel_for(static_cast<std::size_t>(cfg.control_sessions), cfg.threads,
               [&](std::size_t i) {
                 DropoutBank bank(net);
                 result.control_verdicts[i] = run_test_session(
                     net, bank, FaultContext{}, tvs, profile, cfg.vote_length,
                     cfg.t_detect, root.derive(campaign_labels::kControl).derive(i + 1),
                     SessionMode::Record);
               });
  int control_faulty = 0;
  for (const auto& v : result.control_verdicts) control_faulty += v.faulty ? 1 : 0;
  result.control_fpr = cfg.control_sessions > 0
                           ? static_cast<double>(control_faulty) / cfg.control_sessions
                           : 0.0;

  for (std::size_t s = 0; s < cfg.sweeps.size(); ++s) {
    const SweepSpec& sweep = cfg.sweeps[s];
    for (std::size_t p = 0; p < sweep.values.size(); ++p) {
      const double value = sweep.values[p];
      const FaultSpec spec = spec_with_value(sweep.base, value);
      PointResult point;
      point.sweep_name = sweep.name;
      point.spec = spec;
      point.value = value;
      point.clean_accuracy = result.clean_accuracy;
      point.fpr = result.control_fpr;
      point.records.resize(static_cast<std::size_t>(cfg.injections_per_point));

      parallel_for(
          static_cast<std::size_t>(cfg.injections_per_point), cfg.threads,
          [&](std::size_t mi) {
            const int m = static_cast<int>(mi) + 1;
            RngStream ms = root.derive(campaign_labels::kInject)
                               .derive(s)
                               .derive(p)
                               .derive(static_cast<std::uint64_t>(m));
            DropoutBank bank(net);
            FaultContext ctx = inject(net, bank, spec, ms.derive(0));
            if (ctx.mac_variation && ctx.mac_variation->sigma_add > 0.0)
              ctx.mac_calibration = calibration;
            InjectionRecord rec;
            rec.sweep = static_cast<int>(s);
            rec.point = static_cast<int>(p);
            rec.injection = m;
            rec.faulty_accuracy =
                evaluate_accuracy(net, sub_inputs, sub_labels, cfg.t_acc, bank, ctx,
                                  root.derive(campaign_labels::kAccuracy));
            rec.cls = classify_fault(result.clean_accuracy, rec.faulty_accuracy,
                                     cfg.delta_acc);
            Verdict v = run_test_session(net, bank, ctx, tvs, profile, cfg.vote_length,
                                         cfg.t_detect, ms.derive(2), SessionMode::Record);
            rec.detected = v.faulty;
            rec.queries_used = v.queries_used;
            rec.record = std::move(v.record);
            point.records[mi] = std::move(rec);
          });

      double acc_sum = 0.0;
      RealVec accs;
      accs.reserve(point.records.size());
      for (const auto& rec : point.records) {
        accs.push_back(rec.faulty_accuracy);
        acc_sum += rec.faulty_accuracy;
        const bool critical = rec.cls == FaultClass::Critical;
        point.benign_count += critical ? 0 : 1;
        point.critical_count += critical ? 1 : 0;
        if (rec.detected) (critical ? point.detected_critical : point.detected_benign)++;
      }
      point.mean_faulty_accuracy = acc_sum / static_cast<double>(point.records.size());
      point.std_faulty_accuracy = population_std(accs);
      point.coverage_critical =
          point.critical_count > 0
              ? static_cast<double>(point.detected_critical) / point.critical_count
              : 0.0;
      point.coverage_benign =
          point.benign_count > 0
              ? static_cast<double>(point.detected_benign) / point.benign_count
              : 0.0;
      result.points.push_back(std::move(point));
    }
  }
  return result;
}

struct RocPoint {
  int vote_length = 0;
  double tpr_critical = 0.0;
  double tpr_benign = 0.0;
  double fpr = 0.0;
};

/// Re-threshold every recorded query sequence (injections and fault-free
/// controls) at each L. Pure replay - nothing is re-simulated.
inline std::vector<RocPoint> roc_sweep(const CampaignResult& result,
                                       const std::vector<int>& l_values) {
  std::vector<RocPoint> out;
  for (int l : l_values) {
    RocPoint pt;
    pt.vote_length = l;
    int n_crit = 0, n_benign = 0, hit_crit = 0, hit_benign = 0;
    for (const auto& point : result.points)
      for (const auto& rec : point.records) {
        if (static_cast<std::size_t>(l) > rec.record.size() || l < 1)
          throw spec_error("roc_sweep: L out of range of the recorded sessions");
        const bool faulty = replay_verdict(rec.record, l).faulty;
        if (rec.cls == FaultClass::Critical) {
          ++n_crit;
          hit_crit += faulty ? 1 : 0;
        } else {
          ++n_benign;
          hit_benign += faulty ? 1 : 0;
        }
      }
    int n_ctl = 0, hit_ctl = 0;
    for (const auto& v : result.control_verdicts) {
      if (static_cast<std::size_t>(l) > v.record.size() || l < 1)
        throw spec_error("roc_sweep: L out of range of the recorded sessions");
      ++n_ctl;
      hit_ctl += replay_verdict(v.record, l).faulty ? 1 : 0;
    }
    pt.tpr_critical = n_crit > 0 ? static_cast<double>(hit_crit) / n_crit : 0.0;
    pt.tpr_benign = n_benign > 0 ? static_cast<double>(hit_benign) / n_benign : 0.0;
    pt.fpr = n_ctl > 0 ? static_cast<double>(hit_ctl) / n_ctl : 0.0;
    out.push_back(pt);
  }
  return out;
}

/// Fraction of fault-free live sessions (fresh seeds; trial i uses
/// stream.derive(i), i = 1..trials) that return Faulty.
inline double estimate_fpr(const BinaryNetwork& net, const DropoutBank& bank,
                           const TestVectorSet& tvs, const UncertaintyProfile& profile,
                           int vote_length, int trials, RngStream stream) {
  if (trials < 1) throw spec_error("estimate_fpr: trials must be >= 1");
  int faulty = 0;
  for (int i = 1; i <= trials; ++i) {
    const Verdict v =
        run_test_session(net, bank, FaultContext{}, tvs, profile, vote_length,
                         tvs.passes, stream.derive(static_cast<std::uint64_t>(i)));
    faulty += v.faulty ? 1 : 0;
  }
  return static_cast<double>(faulty) / static_cast<double>(trials);
}

}  // namespace spintest
