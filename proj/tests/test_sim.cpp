#include "netdiff/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace netdiff;

namespace {

SignalBank silent(int n) { return SignalBank(std::vector<AgentSignal>(n)); }

SimConfig short_run(double horizon = 0.5) {
  SimConfig c;
  c.dt = 1e-3;
  c.horizon = horizon;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Integrate, ZeroSignalsZeroStateStayZero) {
  SimConfig c = short_run();
  c.init.eta0 = Vec::Zero(3);
  c.init.eta1 = Vec::Zero(3);
  Trace tr = integrate(ring_graph(3), silent(3), GainSet{}, std::nullopt, c);
  EXPECT_EQ(tr.s_hat0.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(tr.s_hat1.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(tr.err1.cwiseAbs().maxCoeff(), 0.0);
  LyapunovReport rep = lyapunov_monitor(ring_graph(3), tr, GainSet{}, 100);
  ASSERT_FALSE(rep.samples.empty());
  for (const auto& s : rep.samples) EXPECT_EQ(s.v, 0.0);
  EXPECT_EQ(rep.increases, 0);
}

TEST(Integrate, GridIntegrity) {
  SimConfig c = short_run();
  c.record_stride = 10;
  Trace tr = integrate(ring_graph(5), reference_bank(), GainSet{}, std::nullopt, c);
  ASSERT_EQ(tr.size(), 51);
  for (long k = 0; k < tr.size(); ++k) EXPECT_EQ(tr.t[k], static_cast<double>(k * 10) * c.dt);
  EXPECT_NEAR(tr.horizon(), 0.5, 1e-12);
  EXPECT_EQ(tr.s_hat0.cols(), 51);
}

TEST(Integrate, DeterministicPerSeed) {
  SimConfig c = short_run();
  Trace a = integrate(ring_graph(5), reference_bank(), GainSet{}, ConstantThreshold{0.02}, c);
  Trace b = integrate(ring_graph(5), reference_bank(), GainSet{}, ConstantThreshold{0.02}, c);
  EXPECT_EQ(a.s_hat0, b.s_hat0);
  EXPECT_EQ(a.s_hat1, b.s_hat1);
  ASSERT_EQ(a.channels.size(), b.channels.size());
  for (std::size_t l = 0; l < a.channels.size(); ++l) EXPECT_EQ(a.channels[l].event_times, b.channels[l].event_times);
  c.seed = 4;
  Trace d = integrate(ring_graph(5), reference_bank(), GainSet{}, ConstantThreshold{0.02}, c);
  EXPECT_NE(a.s_hat0, d.s_hat0);
}

TEST(Integrate, ExplicitInitialStateOverridesDrawOnly) {
  SimConfig c = short_run(0.01);
  Vec zero = Vec::Zero(5);
  c.init.eta0 = zero;
  Trace tr = integrate(ring_graph(5), reference_bank(), GainSet{}, std::nullopt, c);
  EXPECT_EQ(tr.s_hat0.col(0), reference_bank().evaluate(0.0, 0));
  c.init.eta0 = Vec::Zero(4);
  EXPECT_THROW(integrate(ring_graph(5), reference_bank(), GainSet{}, std::nullopt, c), std::invalid_argument);
}

TEST(Integrate, AllEdgesFireAtStartAndZeroDeltaFiresEveryStep) {
  SimConfig c = short_run(0.1);
  Trace tr = integrate(ring_graph(5), reference_bank(), GainSet{}, ConstantThreshold{0.0}, c);
  for (const auto& ch : tr.channels) {
    ASSERT_FALSE(ch.event_times.empty());
    EXPECT_EQ(ch.event_times.front(), 0.0);
  }
  EXPECT_DOUBLE_EQ(inter_event_stats(tr.channels, c.horizon, c.dt).fraction, 1.0);
  EXPECT_EQ(tr.epsilon.violations, 0);
}

TEST(Integrate, TriggeredRunRespectsEpsilonBound) {
  SimConfig c = short_run(2.0);
  for (ThresholdRule r : {ThresholdRule{ConstantThreshold{0.02}}, ThresholdRule{VanishingThreshold{0.02, 0.5, 0.0}},
                          ThresholdRule{StateDependentThreshold{0.02, 0.15}}}) {
    Trace tr = integrate(ring_graph(5), reference_bank(), GainSet{}, r, c);
    EXPECT_EQ(tr.epsilon.checked, c.steps());
    EXPECT_EQ(tr.epsilon.violations, 0) << rule_kind(r);
    EXPECT_LT(inter_event_stats(tr.channels, c.horizon, c.dt).fraction, 1.0);
  }
}

TEST(Integrate, OverflowAbortsWithStep) {
  SimConfig c = short_run(5.0);
  c.dt = 1.0;
  GainSet huge{1e300, 1e300, 0.0, 1.0, 7.0};
  try {
    integrate(ring_graph(5), reference_bank(), huge, std::nullopt, c);
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_GT(e.step, 0);
  }
}

TEST(Integrate, InputValidation) {
  SimConfig c = short_run();
  EXPECT_THROW(integrate(ring_graph(4), reference_bank(), GainSet{}, std::nullopt, c), std::invalid_argument);
  c.variant = Variant::derivative_free;
  EXPECT_THROW(integrate(ring_graph(5), reference_bank(), GainSet{}, ConstantThreshold{0.02}, c), std::invalid_argument);
  SimConfig bad = short_run();
  bad.dt = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = short_run();
  bad.steady_state_fraction = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Integrate, DerivativeFreeVariantRuns) {
  SimConfig c = short_run(0.2);
  c.variant = Variant::derivative_free;
  Trace tr = integrate(ring_graph(5), reference_bank(), GainSet{}, std::nullopt, c);
  EXPECT_TRUE(tr.s_hat1.allFinite());
  EXPECT_FALSE(tr.triggered);
}

TEST(Metrics, SyntheticSteadyStateError) {
  Trace tr;
  tr.dt = 0.1;
  for (int k = 0; k <= 100; ++k) tr.t.push_back(k * 0.1);
  tr.err1 = Mat::Zero(3, 101);
  tr.s_hat0 = Mat::Zero(3, 101);
  EXPECT_EQ(steady_state_error(tr, 0.8), 0.0);
  tr.err1(1, 90) = 0.3;
  tr.err1(2, 10) = 5.0;  // transient, outside the window
  EXPECT_DOUBLE_EQ(steady_state_error(tr, 0.8), 0.3);
  EXPECT_DOUBLE_EQ(max_error_between(tr, 0.0, 2.0), 5.0);
  EXPECT_THROW(steady_state_error(tr, 0.0), std::invalid_argument);
  tr.s_hat0(0, 95) = 1.0;
  EXPECT_DOUBLE_EQ(max_edge_disagreement(path_graph(3), tr, 9.0, 10.0), 1.0);
  EXPECT_DOUBLE_EQ(max_edge_disagreement(path_graph(3), tr, 0.0, 9.0), 0.0);
}

TEST(Metrics, TimeToLevel) {
  LyapunovReport rep;
  rep.samples = {{0.0, 1.0, true}, {0.1, 1e-7, false}, {0.2, 1e-7, true}};
  EXPECT_DOUBLE_EQ(time_to_level(rep, 1e-6), 0.2);
  EXPECT_DOUBLE_EQ(time_to_level(rep, 1e-9), -1.0);
}

TEST(Lyapunov, IdealRunDecreases) {
  SimConfig c = short_run(1.0);
  c.dt = 1e-4;
  GainSet gains{10.0, 13.0, 1.0, 4.0, 7.0};
  Trace tr = integrate(ring_graph(5), reference_bank(), gains, std::nullopt, c);
  LyapunovReport rep = lyapunov_monitor(ring_graph(5), tr, gains, 100);
  EXPECT_EQ(rep.samples.size(), 101u);
  EXPECT_EQ(rep.increases, 0);
  EXPECT_THROW(lyapunov_monitor(ring_graph(5), tr, gains, 0), std::invalid_argument);
}

TEST(Sweep, SeedsThreadsAndZeroDelta) {
  SimConfig c = short_run(0.3);
  std::vector<double> deltas{0.0, 0.05};
  auto one = sweep_delta(ring_graph(5), reference_bank(), GainSet{}, std::nullopt, c, deltas, 2, 7, 1);
  auto two = sweep_delta(ring_graph(5), reference_bank(), GainSet{}, std::nullopt, c, deltas, 2, 7, 2);
  ASSERT_EQ(one.size(), 4u);
  for (std::size_t q = 0; q < one.size(); ++q) {
    EXPECT_EQ(one[q].delta, two[q].delta);
    EXPECT_EQ(one[q].rep, two[q].rep);
    EXPECT_EQ(one[q].sse, two[q].sse);
    EXPECT_EQ(one[q].event_fraction, two[q].event_fraction);
  }
  EXPECT_DOUBLE_EQ(one[0].event_fraction, 1.0);
  EXPECT_DOUBLE_EQ(one[1].event_fraction, 1.0);
  EXPECT_LT(one[2].event_fraction, 1.0);
  // repetition r uses seed * 1000 + r
  SimConfig c0 = c;
  c0.seed = 7001;
  Trace tr = integrate(ring_graph(5), reference_bank(), GainSet{}, ConstantThreshold{0.05}, c0);
  EXPECT_EQ(one[3].sse, steady_state_error(tr, c.steady_state_fraction));
  EXPECT_THROW(sweep_delta(ring_graph(5), reference_bank(), GainSet{}, std::nullopt, c, {}, 1, 1), std::invalid_argument);
  EXPECT_THROW(sweep_delta(ring_graph(5), reference_bank(), GainSet{}, std::nullopt, c, {-0.1}, 1, 1),
               std::invalid_argument);
}

TEST(Sweep, WithDeltaKeepsKind) {
  ThresholdRule r = with_delta(StateDependentThreshold{0.02, 0.15}, 0.07);
  EXPECT_EQ(rule_kind(r), "state_dependent");
  EXPECT_DOUBLE_EQ(rule_delta(r), 0.07);
  EXPECT_DOUBLE_EQ(rule_sigma(r), 0.15);
  EXPECT_EQ(rule_kind(with_delta(std::nullopt, 0.1)), "constant");
}
