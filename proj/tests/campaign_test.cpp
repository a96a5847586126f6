#include "spintest/campaign.hpp"

#include <gtest/gtest.h>

#include <vector>

#include "spintest/error.hpp"
#include "test_util/builders.hpp"

namespace {

using spintest::BinaryNetwork;
using spintest::CampaignConfig;
using spintest::CampaignResult;
using spintest::classify_fault;
using spintest::Dataset;
using spintest::DropoutBank;
using spintest::FaultClass;
using spintest::FaultKind;
using spintest::FaultLocation;
using spintest::FaultSpec;
using spintest::GeneratorState;
using spintest::RngStream;
using spintest::run_campaign;
using spintest::SweepSpec;
using spintest::TestVectorSet;
using spintest::UncertaintyProfile;

struct Fixture {
  BinaryNetwork net;
  Dataset data;
  TestVectorSet tvs;
  UncertaintyProfile profile;
};

Fixture make_fixture(std::uint64_t seed) {
  Fixture f;
  f.net = test_util::make_net({8, 16, 3}, seed);
  f.data = spintest::synth_dataset(10, 3, 8, seed + 1);
  DropoutBank bank(f.net);
  f.tvs = spintest::generate_test_vectors(f.net, bank, f.data.train_inputs, 4, 4, 8,
                                          RngStream(seed + 2));
  f.tvs.passes = 4;
  f.profile = spintest::fit_profile(f.net, bank, f.tvs, 5, 4, RngStream(seed + 3));
  return f;
}

CampaignConfig small_config(std::vector<SweepSpec> sweeps) {
  CampaignConfig cfg;
  cfg.sweeps = std::move(sweeps);
  cfg.injections_per_point = 8;
  cfg.eval_subset = 6;
  cfg.t_acc = 4;
  cfg.delta_acc = 0.01;
  cfg.vote_length = 2;
  cfg.t_detect = 4;
  cfg.control_sessions = 12;
  cfg.seed = 77;
  cfg.threads = 1;
  return cfg;
}

TEST(ClassifyFault, StrictlyGreaterThanDelta) {
  // Dyadic values keep the arithmetic exact: a drop of exactly delta stays
  // benign; anything strictly beyond is critical.
  EXPECT_EQ(classify_fault(0.875, 0.75, 0.125), FaultClass::Benign);
  EXPECT_EQ(classify_fault(0.875, 0.6875, 0.125), FaultClass::Critical);
  EXPECT_EQ(classify_fault(0.5, 0.5, 0.01), FaultClass::Benign);
  EXPECT_EQ(classify_fault(0.5, 1.0, 0.01), FaultClass::Benign);  // improvement
  EXPECT_THROW((void)classify_fault(1.5, 0.5, 0.01), spintest::contract_error);
  EXPECT_THROW((void)classify_fault(0.5, -0.1, 0.01), spintest::contract_error);
  EXPECT_THROW((void)classify_fault(0.5, 0.5, 0.0), spintest::spec_error);
}

TEST(SpecWithValue, RoutesToRateOrSigma) {
  FaultSpec stuck{FaultLocation::WeightCells, FaultKind::StuckAt0, 0.0, 0.0, 0};
  FaultSpec s1 = spintest::spec_with_value(stuck, 0.2);
  EXPECT_DOUBLE_EQ(s1.rate, 0.2);
  EXPECT_DOUBLE_EQ(s1.sigma, 0.0);
  FaultSpec gauss{FaultLocation::MacConductance, FaultKind::MultiplicativeGaussian, 0.0,
                  0.0, 0};
  FaultSpec s2 = spintest::spec_with_value(gauss, 0.3);
  EXPECT_DOUBLE_EQ(s2.sigma, 0.3);
  EXPECT_DOUBLE_EQ(s2.rate, 0.0);
  FaultSpec dpv{FaultLocation::DropoutModule, FaultKind::DropProbVariation, 0.0, 0.0, 0};
  EXPECT_DOUBLE_EQ(spintest::spec_with_value(dpv, 0.1).sigma, 0.1);
}

TEST(RunCampaign, RateZeroReproducesCleanAccuracyExactly) {
  // Common random numbers: the faulty evaluation reuses the clean
  // evaluation's stream, so a no-op injection (rate 0) must reproduce the
  // clean accuracy bit-for-bit and land 100% Benign.
  Fixture f = make_fixture(300);
  SweepSpec sweep{"weight-flip",
                  {FaultLocation::WeightCells, FaultKind::BitFlip, 0.0, 0.0, 0},
                  {0.0}};
  CampaignResult r = run_campaign(f.net, f.data, f.tvs, f.profile, small_config({sweep}));
  ASSERT_EQ(r.points.size(), 1u);
  const auto& pt = r.points[0];
  EXPECT_EQ(pt.benign_count, 8);
  EXPECT_EQ(pt.critical_count, 0);
  EXPECT_EQ(pt.mean_faulty_accuracy, r.clean_accuracy);
  EXPECT_EQ(pt.std_faulty_accuracy, 0.0);
  for (const auto& rec : pt.records) {
    EXPECT_EQ(rec.faulty_accuracy, r.clean_accuracy);
    EXPECT_EQ(rec.cls, FaultClass::Benign);
  }
  EXPECT_DOUBLE_EQ(pt.coverage_critical, 0.0);  // no critical faults -> 0 by definition
}

TEST(RunCampaign, RecordsReplayToTheReportedVerdicts) {
  Fixture f = make_fixture(301);
  SweepSpec sweep{"dropout-stuck",
                  {FaultLocation::DropoutModule, FaultKind::StuckAt1, 0.0, 0.0, 0},
                  {0.5}};
  CampaignConfig cfg = small_config({sweep});
  CampaignResult r = run_campaign(f.net, f.data, f.tvs, f.profile, cfg);
  ASSERT_EQ(r.points.size(), 1u);
  int detected = 0, critical = 0, detected_critical = 0, detected_benign = 0;
  for (const auto& rec : r.points[0].records) {
    ASSERT_EQ(rec.record.size(), f.tvs.size());  // full record, no early stop
    const auto replay = spintest::replay_verdict(rec.record, cfg.vote_length);
    EXPECT_EQ(rec.detected, replay.faulty);
    EXPECT_EQ(rec.queries_used, replay.queries_used);
    detected += rec.detected ? 1 : 0;
    if (rec.cls == FaultClass::Critical) {
      ++critical;
      detected_critical += rec.detected ? 1 : 0;
    } else {
      detected_benign += rec.detected ? 1 : 0;
    }
  }
  EXPECT_EQ(r.points[0].critical_count, critical);
  EXPECT_EQ(r.points[0].detected_critical, detected_critical);
  EXPECT_EQ(r.points[0].detected_benign, detected_benign);
  // Control verdicts replay identically too.
  int control_faulty = 0;
  for (const auto& v : r.control_verdicts) {
    EXPECT_EQ(v.record.size(), f.tvs.size());
    EXPECT_EQ(spintest::replay_verdict(v.record, cfg.vote_length).faulty, v.faulty);
    control_faulty += v.faulty ? 1 : 0;
  }
  EXPECT_DOUBLE_EQ(r.control_fpr,
                   static_cast<double>(control_faulty) / cfg.control_sessions);
}

TEST(RunCampaign, RocSweepAgreesWithCampaignCountsAtConfiguredL) {
  Fixture f = make_fixture(302);
  SweepSpec sweep{"dropout-stuck",
                  {FaultLocation::DropoutModule, FaultKind::StuckAt1, 0.0, 0.0, 0},
                  {0.3, 0.8}};
  CampaignConfig cfg = small_config({sweep});
  CampaignResult r = run_campaign(f.net, f.data, f.tvs, f.profile, cfg);
  const auto roc = spintest::roc_sweep(r, {cfg.vote_length});
  ASSERT_EQ(roc.size(), 1u);
  int n_crit = 0, hit_crit = 0, n_ben = 0, hit_ben = 0;
  for (const auto& pt : r.points) {
    n_crit += pt.critical_count;
    hit_crit += pt.detected_critical;
    n_ben += pt.benign_count;
    hit_ben += pt.detected_benign;
  }
  if (n_crit > 0)
    EXPECT_DOUBLE_EQ(roc[0].tpr_critical, static_cast<double>(hit_crit) / n_crit);
  if (n_ben > 0)
    EXPECT_DOUBLE_EQ(roc[0].tpr_benign, static_cast<double>(hit_ben) / n_ben);
  EXPECT_DOUBLE_EQ(roc[0].fpr, r.control_fpr);
}

TEST(RunCampaign, RocIsMonotoneNonIncreasingInL) {
  Fixture f = make_fixture(303);
  SweepSpec sweep{"dropout-stuck",
                  {FaultLocation::DropoutModule, FaultKind::StuckAt1, 0.0, 0.0, 0},
                  {0.5}};
  CampaignResult r = run_campaign(f.net, f.data, f.tvs, f.profile, small_config({sweep}));
  std::vector<int> ls;
  for (int l = 1; l <= static_cast<int>(f.tvs.size()); ++l) ls.push_back(l);
  const auto roc = spintest::roc_sweep(r, ls);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    EXPECT_LE(roc[i].tpr_critical, roc[i - 1].tpr_critical);
    EXPECT_LE(roc[i].tpr_benign, roc[i - 1].tpr_benign);
    EXPECT_LE(roc[i].fpr, roc[i - 1].fpr);
  }
  EXPECT_THROW((void)spintest::roc_sweep(r, {0}), spintest::spec_error);
  EXPECT_THROW((void)spintest::roc_sweep(r, {static_cast<int>(f.tvs.size()) + 1}),
               spintest::spec_error);
}

TEST(RunCampaign, DeterministicAcrossRunsAndThreadCounts) {
  Fixture f = make_fixture(304);
  SweepSpec sweep{"weight-stuck",
                  {FaultLocation::WeightCells, FaultKind::StuckAt0, 0.0, 0.0, 0},
                  {0.1, 0.3}};
  CampaignConfig cfg = small_config({sweep});
  CampaignResult a = run_campaign(f.net, f.data, f.tvs, f.profile, cfg);
  CampaignResult b = run_campaign(f.net, f.data, f.tvs, f.profile, cfg);
  cfg.threads = 2;
  CampaignResult c = run_campaign(f.net, f.data, f.tvs, f.profile, cfg);
  auto expect_same = [](const CampaignResult& x, const CampaignResult& y) {
    ASSERT_EQ(x.points.size(), y.points.size());
    EXPECT_EQ(x.clean_accuracy, y.clean_accuracy);
    EXPECT_EQ(x.control_fpr, y.control_fpr);
    for (std::size_t p = 0; p < x.points.size(); ++p) {
      EXPECT_EQ(x.points[p].mean_faulty_accuracy, y.points[p].mean_faulty_accuracy);
      EXPECT_EQ(x.points[p].std_faulty_accuracy, y.points[p].std_faulty_accuracy);
      EXPECT_EQ(x.points[p].critical_count, y.points[p].critical_count);
      EXPECT_EQ(x.points[p].detected_critical, y.points[p].detected_critical);
      ASSERT_EQ(x.points[p].records.size(), y.points[p].records.size());
      for (std::size_t m = 0; m < x.points[p].records.size(); ++m) {
        const auto& rx = x.points[p].records[m];
        const auto& ry = y.points[p].records[m];
        EXPECT_EQ(rx.faulty_accuracy, ry.faulty_accuracy);
        EXPECT_EQ(rx.detected, ry.detected);
        ASSERT_EQ(rx.record.size(), ry.record.size());
        for (std::size_t q = 0; q < rx.record.size(); ++q)
          EXPECT_EQ(rx.record[q].uncertainty, ry.record[q].uncertainty);
      }
    }
  };
  expect_same(a, b);
  expect_same(a, c);
}

TEST(RunCampaign, MultipleSweepsProducePointsInOrder) {
  Fixture f = make_fixture(305);
  SweepSpec s1{"weight-stuck",
               {FaultLocation::WeightCells, FaultKind::StuckAt0, 0.0, 0.0, 0},
               {0.1, 0.2}};
  SweepSpec s2{"mac-mult",
               {FaultLocation::MacConductance, FaultKind::MultiplicativeGaussian, 0.0,
                0.0, 0},
               {0.05}};
  CampaignConfig cfg = small_config({s1, s2});
  cfg.injections_per_point = 3;
  CampaignResult r = run_campaign(f.net, f.data, f.tvs, f.profile, cfg);
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_EQ(r.points[0].sweep_name, "weight-stuck");
  EXPECT_DOUBLE_EQ(r.points[0].value, 0.1);
  EXPECT_DOUBLE_EQ(r.points[1].value, 0.2);
  EXPECT_EQ(r.points[2].sweep_name, "mac-mult");
  EXPECT_DOUBLE_EQ(r.points[2].spec.sigma, 0.05);
  EXPECT_DOUBLE_EQ(r.points[2].spec.rate, 0.0);
}

TEST(RunCampaign, AdditiveMacSweepCalibratesAutomatically) {
  Fixture f = make_fixture(306);
  // Needs >= 30 calibration inputs; the synthetic train split has 24, so
  // grow the dataset for this case.
  f.data = spintest::synth_dataset(20, 3, 8, 307);
  SweepSpec sweep{"mac-add",
                  {FaultLocation::MacConductance, FaultKind::AdditiveGaussian, 0.0, 0.0,
                   0},
                  {0.1}};
  CampaignConfig cfg = small_config({sweep});
  cfg.injections_per_point = 3;
  CampaignResult r = run_campaign(f.net, f.data, f.tvs, f.profile, cfg);
  ASSERT_EQ(r.points.size(), 1u);
  // The injected noise must have actually moved some accuracy measurement
  // away from clean (unlike the rate-0 case).
  bool moved = false;
  for (const auto& rec : r.points[0].records)
    moved = moved || rec.faulty_accuracy != r.clean_accuracy;
  EXPECT_TRUE(moved);
}

TEST(EstimateFpr, ExactOnDegenerateBands) {
  BinaryNetwork net = test_util::make_net({8, 12, 3}, 310);
  DropoutBank bank(net);
  for (std::size_t g = 0; g < bank.generator_count(); ++g)
    bank.generator(g).state = GeneratorState::StuckPass;
  RngStream rng(311);
  TestVectorSet tvs;
  tvs.passes = 4;
  for (int i = 0; i < 5; ++i)
    tvs.vectors.push_back({test_util::make_input(8, rng), 0.0,
                           static_cast<std::size_t>(i)});
  // Band [0, 3e-12] accepts the stuck bank's exact zeros: FPR 0.
  UncertaintyProfile zero_band = spintest::profile_from_samples(
      std::vector<double>{0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(spintest::estimate_fpr(net, bank, tvs, zero_band, 1, 20, RngStream(312)),
                   0.0);
  // A band floating above zero rejects every query: FPR 1.
  UncertaintyProfile high_band;
  high_band.mu = 0.5;
  high_band.sigma = 0.01;
  high_band.b_upper = 0.53;
  high_band.b_lower = 0.47;
  EXPECT_DOUBLE_EQ(spintest::estimate_fpr(net, bank, tvs, high_band, 1, 20, RngStream(313)),
                   1.0);
  EXPECT_THROW((void)spintest::estimate_fpr(net, bank, tvs, high_band, 1, 0, RngStream(1)),
               spintest::spec_error);
}

TEST(CampaignConfig, ValidateCatchesBadSettings) {
  CampaignConfig cfg = small_config({});
  cfg.injections_per_point = 0;
  EXPECT_THROW(cfg.validate(), spintest::spec_error);
  cfg = small_config({});
  cfg.delta_acc = 0.0;
  EXPECT_THROW(cfg.validate(), spintest::spec_error);
  cfg = small_config({});
  cfg.t_detect = 1;
  EXPECT_THROW(cfg.validate(), spintest::spec_error);
  cfg = small_config({});
  cfg.threads = 0;
  EXPECT_THROW(cfg.validate(), spintest::spec_error);
  SweepSpec empty{"empty",
                  {FaultLocation::WeightCells, FaultKind::StuckAt0, 0.0, 0.0, 0},
                  {}};
  cfg = small_config({empty});
  EXPECT_THROW(cfg.validate(), spintest::spec_error);
  SweepSpec illegal{"illegal",
                    {FaultLocation::WeightCells, FaultKind::AdditiveGaussian, 0.0, 0.0, 0},
                    {0.1}};
  cfg = small_config({illegal});
  EXPECT_THROW(cfg.validate(), spintest::spec_error);
}

TEST(RunCampaign, VoteLengthBeyondKitRejected) {
  Fixture f = make_fixture(308);
  SweepSpec sweep{"weight-stuck",
                  {FaultLocation::WeightCells, FaultKind::StuckAt0, 0.0, 0.0, 0},
                  {0.1}};
  CampaignConfig cfg = small_config({sweep});
  cfg.vote_length = static_cast<int>(f.tvs.size()) + 1;
  EXPECT_THROW((void)run_campaign(f.net, f.data, f.tvs, f.profile, cfg),
               spintest::spec_error);
}

}  // namespace
