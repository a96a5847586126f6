#include "spintest/faults.hpp"

#include <gtest/gtest.h>

#include <set>

#include "spintest/error.hpp"
#include "test_util/builders.hpp"

namespace {

using spintest::BinaryNetwork;
using spintest::Bit;
using spintest::BitVec;
using spintest::DropoutBank;
using spintest::FaultContext;
using spintest::FaultKind;
using spintest::FaultLocation;
using spintest::FaultSpec;
using spintest::GeneratorState;
using spintest::inject;
using spintest::RngStream;

TEST(FaultCellCount, CeilingSemantics) {
  EXPECT_EQ(spintest::fault_cell_count(0.0, 1000), 0u);
  EXPECT_EQ(spintest::fault_cell_count(0.05, 2048), 103u);  // ceil(102.4)
  EXPECT_EQ(spintest::fault_cell_count(0.1, 10), 1u);
  EXPECT_EQ(spintest::fault_cell_count(1e-9, 10), 1u);  // any positive rate hits >= 1
  EXPECT_EQ(spintest::fault_cell_count(1.0, 7), 7u);
}

TEST(SampleWithoutReplacement, DistinctSortedAndComplete) {
  RngStream s(50);
  auto idx = spintest::sample_without_replacement(100, 20, s);
  ASSERT_EQ(idx.size(), 20u);
  std::set<std::size_t> uniq(idx.begin(), idx.end());
  EXPECT_EQ(uniq.size(), 20u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_LT(idx.back(), 100u);
  auto all = spintest::sample_without_replacement(10, 10, s);
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), 10u);
  EXPECT_THROW((void)spintest::sample_without_replacement(5, 6, s),
               spintest::contract_error);
}

TEST(SampleWithoutReplacement, ApproximatelyUniformInclusion) {
  // Each index should be included with probability k/n.
  RngStream s(51);
  const std::size_t n = 20, k = 5;
  std::vector<int> counts(n, 0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    for (std::size_t i : spintest::sample_without_replacement(n, k, s)) ++counts[i];
  const double p = static_cast<double>(k) / n;
  for (std::size_t i = 0; i < n; ++i)
    EXPECT_NEAR(counts[i], trials * p, 4.0 * std::sqrt(trials * p * (1 - p))) << i;
}

TEST(FaultSpec, LegalityMatrix) {
  auto ok = [](FaultLocation loc, FaultKind kind) {
    FaultSpec s{loc, kind, 0.1, 0.1, 0};
    s.validate();
  };
  auto bad = [](FaultLocation loc, FaultKind kind) {
    FaultSpec s{loc, kind, 0.1, 0.1, 0};
    EXPECT_THROW(s.validate(), spintest::spec_error);
  };
  ok(FaultLocation::WeightCells, FaultKind::StuckAt0);
  ok(FaultLocation::WeightCells, FaultKind::StuckAt1);
  ok(FaultLocation::WeightCells, FaultKind::BitFlip);
  bad(FaultLocation::WeightCells, FaultKind::AdditiveGaussian);
  bad(FaultLocation::WeightCells, FaultKind::DropProbVariation);
  ok(FaultLocation::BufferMemory, FaultKind::StuckAt0);
  bad(FaultLocation::BufferMemory, FaultKind::MultiplicativeGaussian);
  ok(FaultLocation::DropoutModule, FaultKind::StuckAt0);
  ok(FaultLocation::DropoutModule, FaultKind::BitFlip);
  ok(FaultLocation::DropoutModule, FaultKind::DropProbVariation);
  bad(FaultLocation::DropoutModule, FaultKind::AdditiveGaussian);
  ok(FaultLocation::MacConductance, FaultKind::AdditiveGaussian);
  ok(FaultLocation::MacConductance, FaultKind::MultiplicativeGaussian);
  bad(FaultLocation::MacConductance, FaultKind::StuckAt0);

  FaultSpec bad_rate{FaultLocation::WeightCells, FaultKind::StuckAt0, 1.5, 0.0, 0};
  EXPECT_THROW(bad_rate.validate(), spintest::spec_error);
  FaultSpec bad_sigma{FaultLocation::MacConductance, FaultKind::AdditiveGaussian, 0.0,
                      -0.1, 0};
  EXPECT_THROW(bad_sigma.validate(), spintest::spec_error);
}

TEST(Inject, WeightStuckCountsAndValues) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 60);
  const std::size_t total = net.weight_cell_count();  // 16*16 + 16*4 = 320
  DropoutBank bank(net);
  FaultSpec spec{FaultLocation::WeightCells, FaultKind::StuckAt0, 0.05, 0.0, 0};
  FaultContext ctx = inject(net, bank, spec, RngStream(61));
  std::size_t n_over = 0;
  for (std::size_t l = 0; l < ctx.weight_overrides.size(); ++l)
    for (const auto& [rc, v] : ctx.weight_overrides[l]) {
      ++n_over;
      EXPECT_EQ(v, Bit{-1});  // stuck-at-0 forces logic 0 = -1
      ASSERT_TRUE(ctx.faulted_weights[l].has_value());
      EXPECT_EQ((*ctx.faulted_weights[l])(static_cast<std::size_t>(rc.first),
                                          static_cast<std::size_t>(rc.second)),
                Bit{-1});
    }
  EXPECT_EQ(n_over, spintest::fault_cell_count(0.05, total));
  EXPECT_FALSE(ctx.clean());
}

TEST(Inject, WeightStuckAt1ForcesPlusOne) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 62);
  DropoutBank bank(net);
  FaultSpec spec{FaultLocation::WeightCells, FaultKind::StuckAt1, 0.1, 0.0, 0};
  FaultContext ctx = inject(net, bank, spec, RngStream(63));
  for (const auto& m : ctx.weight_overrides)
    for (const auto& [rc, v] : m) EXPECT_EQ(v, Bit{1});
}

TEST(Inject, WeightBitFlipInvertsTrainedValue) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 64);
  DropoutBank bank(net);
  FaultSpec spec{FaultLocation::WeightCells, FaultKind::BitFlip, 0.1, 0.0, 0};
  FaultContext ctx = inject(net, bank, spec, RngStream(65));
  std::size_t n = 0;
  for (std::size_t l = 0; l < ctx.weight_overrides.size(); ++l)
    for (const auto& [rc, v] : ctx.weight_overrides[l]) {
      EXPECT_EQ(v, -net.layers[l].weights(static_cast<std::size_t>(rc.first),
                                          static_cast<std::size_t>(rc.second)));
      ++n;
    }
  EXPECT_EQ(n, spintest::fault_cell_count(0.1, net.weight_cell_count()));
}

TEST(Inject, RateZeroIsClean) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 66);
  DropoutBank bank(net);
  for (FaultKind kind : {FaultKind::StuckAt0, FaultKind::StuckAt1, FaultKind::BitFlip}) {
    FaultSpec spec{FaultLocation::WeightCells, kind, 0.0, 0.0, 0};
    FaultContext ctx = inject(net, bank, spec, RngStream(67));
    EXPECT_TRUE(ctx.clean());
  }
}

TEST(Inject, BufferStuckTargetsHiddenBuffersOnly) {
  BinaryNetwork net = test_util::make_net({16, 12, 10, 4}, 68);
  DropoutBank bank(net);
  FaultSpec spec{FaultLocation::BufferMemory, FaultKind::StuckAt1, 0.25, 0.0, 0};
  FaultContext ctx = inject(net, bank, spec, RngStream(69));
  // 12 + 10 = 22 hidden slots; ceil(0.25*22) = 6.
  std::size_t n = 0;
  for (std::size_t l = 0; l < ctx.buffer_plans.size(); ++l) {
    for (const auto& [idx, v] : ctx.buffer_plans[l].stuck) {
      EXPECT_LT(l + 1, net.layers.size());  // never the output layer
      EXPECT_GE(idx, 0);
      EXPECT_LT(idx, net.layers[l].out_dim());
      EXPECT_EQ(v, Bit{1});
      ++n;
    }
    EXPECT_DOUBLE_EQ(ctx.buffer_plans[l].flip_rate, 0.0);
  }
  EXPECT_EQ(n, 6u);
}

TEST(Inject, BufferBitFlipSetsTransientRate) {
  BinaryNetwork net = test_util::make_net({16, 12, 10, 4}, 70);
  DropoutBank bank(net);
  FaultSpec spec{FaultLocation::BufferMemory, FaultKind::BitFlip, 0.03, 0.0, 0};
  FaultContext ctx = inject(net, bank, spec, RngStream(71));
  ASSERT_EQ(ctx.buffer_plans.size(), net.layers.size());
  EXPECT_DOUBLE_EQ(ctx.buffer_plans[0].flip_rate, 0.03);
  EXPECT_DOUBLE_EQ(ctx.buffer_plans[1].flip_rate, 0.03);
  EXPECT_DOUBLE_EQ(ctx.buffer_plans[2].flip_rate, 0.0);  // output layer untouched
  EXPECT_TRUE(ctx.buffer_plans[0].stuck.empty());
}

TEST(Inject, DropoutStuckMapsLogicLevelsToGeneratorStates) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 72);
  {
    DropoutBank bank(net);
    FaultSpec spec{FaultLocation::DropoutModule, FaultKind::StuckAt0, 1.0, 0.0, 0};
    FaultContext ctx = inject(net, bank, spec, RngStream(73));
    EXPECT_TRUE(ctx.clean());  // dropout faults live in the bank, not the context
    for (std::size_t g = 0; g < bank.generator_count(); ++g)
      EXPECT_EQ(bank.generator(g).state, GeneratorState::StuckPass);
  }
  {
    DropoutBank bank(net);
    FaultSpec spec{FaultLocation::DropoutModule, FaultKind::StuckAt1, 1.0, 0.0, 0};
    (void)inject(net, bank, spec, RngStream(74));
    for (std::size_t g = 0; g < bank.generator_count(); ++g)
      EXPECT_EQ(bank.generator(g).state, GeneratorState::StuckDrop);
  }
}

TEST(Inject, DropoutPartialRateFaultsExactCount) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 75);
  DropoutBank bank(net);
  FaultSpec spec{FaultLocation::DropoutModule, FaultKind::StuckAt1, 0.3, 0.0, 0};
  (void)inject(net, bank, spec, RngStream(76));
  std::size_t stuck = 0;
  for (std::size_t g = 0; g < bank.generator_count(); ++g)
    stuck += bank.generator(g).state == GeneratorState::StuckDrop ? 1 : 0;
  EXPECT_EQ(stuck, spintest::fault_cell_count(0.3, bank.generator_count()));
}

TEST(Inject, DropProbVariationPerturbsAndClips) {
  BinaryNetwork net = test_util::make_net({16, 32, 4}, 77);
  DropoutBank bank(net);
  FaultSpec spec{FaultLocation::DropoutModule, FaultKind::DropProbVariation, 0.0, 3.0, 0};
  (void)inject(net, bank, spec, RngStream(78));
  bool changed = false, saw_clip = false;
  for (std::size_t g = 0; g < bank.generator_count(); ++g) {
    const double p = bank.generator(g).p_effective;
    ASSERT_GE(p, 0.0);
    ASSERT_LE(p, 1.0);
    changed = changed || p != net.dropout_p;
    saw_clip = saw_clip || p == 0.0 || p == 1.0;
    EXPECT_EQ(bank.generator(g).state, GeneratorState::Healthy);
  }
  EXPECT_TRUE(changed);
  EXPECT_TRUE(saw_clip);  // sigma=3 around 0.25 must hit the clip bounds
}

TEST(Inject, MacConductanceSetsVariationOnly) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 79);
  DropoutBank bank(net);
  FaultSpec add{FaultLocation::MacConductance, FaultKind::AdditiveGaussian, 0.0, 0.2, 0};
  FaultContext ca = inject(net, bank, add, RngStream(80));
  ASSERT_TRUE(ca.mac_variation.has_value());
  EXPECT_DOUBLE_EQ(ca.mac_variation->sigma_add, 0.2);
  EXPECT_DOUBLE_EQ(ca.mac_variation->sigma_mul, 0.0);
  FaultSpec mul{FaultLocation::MacConductance, FaultKind::MultiplicativeGaussian, 0.0,
                0.3, 0};
  FaultContext cm = inject(net, bank, mul, RngStream(81));
  ASSERT_TRUE(cm.mac_variation.has_value());
  EXPECT_DOUBLE_EQ(cm.mac_variation->sigma_mul, 0.3);
  EXPECT_DOUBLE_EQ(cm.mac_variation->sigma_add, 0.0);
}

TEST(Inject, ExplicitSeedOverridesStream) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 82);
  DropoutBank b1(net), b2(net);
  FaultSpec spec{FaultLocation::WeightCells, FaultKind::BitFlip, 0.1, 0.0, 555};
  FaultContext a = inject(net, b1, spec, RngStream(1));
  FaultContext b = inject(net, b2, spec, RngStream(2));
  EXPECT_EQ(a.weight_overrides, b.weight_overrides);  // seed wins over stream
  spec.seed = 0;
  FaultContext c = inject(net, b1, spec, RngStream(1));
  FaultContext d = inject(net, b2, spec, RngStream(2));
  EXPECT_NE(c.weight_overrides, d.weight_overrides);
}

TEST(Inject, SameStreamReproducesInjection) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 83);
  DropoutBank b1(net), b2(net);
  FaultSpec spec{FaultLocation::WeightCells, FaultKind::StuckAt0, 0.2, 0.0, 0};
  FaultContext a = inject(net, b1, spec, RngStream(99));
  FaultContext b = inject(net, b2, spec, RngStream(99));
  EXPECT_EQ(a.weight_overrides, b.weight_overrides);
}

TEST(CalibrateLayerStd, PositivePerLayerAndReproducible) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 84);
  DropoutBank bank(net);
  RngStream root(85);
  std::vector<BitVec> inputs;
  for (int i = 0; i < 40; ++i) inputs.push_back(test_util::make_input(16, root));
  auto s1 = spintest::calibrate_layer_std(net, bank, inputs, root.derive(0));
  auto s2 = spintest::calibrate_layer_std(net, bank, inputs, root.derive(0));
  ASSERT_EQ(s1.size(), net.layers.size());
  for (double v : s1) EXPECT_GT(v, 0.0);
  EXPECT_EQ(s1, s2);
  // MAC outputs of a 16-input crossbar live in [-16, 16]; the std must too.
  for (double v : s1) EXPECT_LT(v, 16.0);
}

TEST(CalibrateLayerStd, RequiresEnoughInputs) {
  BinaryNetwork net = test_util::make_net({16, 16, 4}, 86);
  DropoutBank bank(net);
  RngStream root(87);
  std::vector<BitVec> few;
  for (int i = 0; i < 29; ++i) few.push_back(test_util::make_input(16, root));
  EXPECT_THROW((void)spintest::calibrate_layer_std(net, bank, few, root.derive(0)),
               spintest::contract_error);
}

}  // namespace
