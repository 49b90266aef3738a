// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "oracles.hpp"
#include "qreservoir/epr.hpp"

#include <gtest/gtest.h>

namespace qreservoir {
namespace {

constexpr double kG = 1.25e5;
constexpr double kTau = 12.5e-6;
constexpr double kRate = 11200.0;

TEST(ProtocolSchedule, TwoStepLayout) {
  const ProtocolSchedule s = ProtocolSchedule::two_step(2.0, 2);
  ASSERT_EQ(s.steps.size(), 4u);
  EXPECT_EQ(s.steps[0].preparation, Preparation::plus);
  EXPECT_EQ(s.steps[0].damped_mode(), 0);
  EXPECT_EQ(s.steps[1].preparation, Preparation::minus);
  EXPECT_EQ(s.steps[1].damped_mode(), 1);
  EXPECT_DOUBLE_EQ(s.steps[2].duration, 1.0);
  EXPECT_DOUBLE_EQ(s.total_duration(), 4.0);
  EXPECT_EQ(ProtocolSchedule::two_step(1.0, 1, true).steps[0].damped_mode(), 1);
  EXPECT_NO_THROW(s.validate());
  ProtocolSchedule bad = s;
  bad.steps[0].delta_sign = -1;
  EXPECT_THROW(bad.validate(), DomainError);
  EXPECT_THROW(ProtocolSchedule{}.validate(), DomainError);
  EXPECT_THROW(ProtocolSchedule::two_step(1.0, 0), DomainError);
}

TEST(ProtocolTime, MatchesLogarithmicLaw) {
  const ProtocolTarget target{ProtocolTarget::Kind::n_inf, 0.01};
  for (double mu : {0.5, 0.9, 0.97}) {
    for (double n_th : {0.0, 0.7}) {
      const ProtocolTiming t = protocol_time(mu, target, kG, kTau, kRate, n_th);
      const double wb = kG * std::sqrt((1.0 - mu) / (1.0 + mu));
      const double gamma = kRate * wb * wb * kTau * kTau;
      const double n0 = mu * mu / (1.0 - mu * mu);
      const double nb = n0 + n_th * (1.0 + 2.0 * n0);
      EXPECT_NEAR(t.gamma, gamma, 1e-9 * gamma);
      EXPECT_NEAR(t.n_b0, nb, 1e-12 * nb);
      EXPECT_NEAR(t.step_time, std::log(nb / 0.01) / gamma, 1e-12);
      EXPECT_DOUBLE_EQ(t.total_time, 2.0 * t.step_time);
      EXPECT_NEAR(t.fidelity, 1.0 / (1.01 * 1.01), 1e-12);
    }
  }
}

TEST(ProtocolTime, OperatingPointValues) {
  const ProtocolTarget target{ProtocolTarget::Kind::n_inf, 0.01};
  const ProtocolTiming cold = protocol_time(0.97, target, kG, kTau, kRate, 0.0);
  EXPECT_NEAR(cold.total_time, 35.4e-3, 0.1e-3);
  EXPECT_NEAR(cold.steady_photons, 15.92, 0.01);
  EXPECT_NEAR(cold.omega_b, 15.4e3, 0.05e3);
  const ProtocolTiming warm = protocol_time(0.97, target, kG, kTau, kRate, 0.7);
  EXPECT_NEAR(warm.total_time, 39.7e-3, 0.1e-3);
}

TEST(ProtocolTime, FidelityTargetAndSmallSqueezing) {
  const ProtocolTiming f = protocol_time(0.8, ProtocolTarget{ProtocolTarget::Kind::fidelity, 0.99}, kG, kTau, kRate);
  EXPECT_NEAR(f.fidelity, 0.99, 1e-12);
  const ProtocolTiming tiny = protocol_time(1e-3, ProtocolTarget{}, kG, kTau, kRate);
  EXPECT_EQ(tiny.total_time, 0.0);
  EXPECT_THROW(protocol_time(1.0, ProtocolTarget{}, kG, kTau, kRate), DomainError);
  EXPECT_THROW(protocol_time(0.5, ProtocolTarget{ProtocolTarget::Kind::fidelity, 1.0}, kG, kTau, kRate), DomainError);
}

TEST(BFrame, VacuumFidelityMatchesDampedFrameState) {
  const double mu = 0.5;
  const ModeSpace space = ModeSpace::pair(30);
  const Matrix s = squeeze_operator(space, SqueezeParams::from_mu(mu));
  const Matrix frame0 = s * vacuum(space).density() * s.adjoint();
  EXPECT_NEAR(frame0(0, 0).real(), 1.0 - mu * mu, 1e-12);
  for (auto [e1, e2] : {std::pair{1.0, 1.0}, std::pair{0.3, 1.0}, std::pair{0.3, 0.6}, std::pair{0.0, 0.2}}) {
    const Matrix frame = amplitude_damping(amplitude_damping(frame0, space, 0, e1), space, 1, e2);
    EXPECT_NEAR(bframe_vacuum_fidelity(mu, e1, e2), frame(0, 0).real(), 1e-10);
  }
  EXPECT_NEAR(bframe_vacuum_fidelity(0.97, 0.0, 0.0), 1.0, 1e-15);
}

TEST(BFrame, WeakBackendFollowsStepwiseExponentials) {
  const double mu = 0.9, n0 = squeezed_vacuum_occupation(0.9), gamma = 3.0, T = 1.0;
  const ProtocolSchedule s = ProtocolSchedule::two_step(T);
  const EprResult r = run_epr_bframe(s, mu, n0, gamma, {0.0, 0.5, 1.0, 1.5, 2.0});
  EXPECT_EQ(r.backend, "bframe_weak");
  EXPECT_NEAR(r.series.nb1[1], n0 * std::exp(-1.5), 1e-12);
  EXPECT_DOUBLE_EQ(r.series.nb2[2], n0);
  EXPECT_NEAR(r.series.nb2[3], n0 * std::exp(-1.5), 1e-12);
  const double nf = n0 * std::exp(-3.0);
  EXPECT_NEAR(r.final_fidelity, 1.0 / ((1.0 + nf) * (1.0 + nf)), 1e-12);
  EXPECT_NEAR(r.series.fidelity[0], 1.0 / ((1.0 + n0) * (1.0 + n0)), 1e-12);
}

TEST(BFrame, StrongBackendWithEqualBranchingMatchesClosedForm) {
  const double mu = 0.8, n0 = squeezed_vacuum_occupation(mu), rate = 5.0, T = 0.6;
  ProtocolSchedule s = ProtocolSchedule::two_step(T);
  s.regime = Regime::strong;
  // A very wide angle law makes every B_n equal to 1/2 to within exp(-18).
  const RabiAngleDist wide = RabiAngleDist::gaussian(3.0, 3.0);
  const EprResult r = run_epr_bframe(s, mu, n0, 0.0, {0.0, T, 2.0 * T}, wide, rate);
  EXPECT_EQ(r.backend, "bframe_strong");
  const double per_mode = fidelity_sc_thermal(T, mu, rate);
  EXPECT_NEAR(r.series.fidelity[1], per_mode * (1.0 - mu * mu), 1e-7);
  EXPECT_NEAR(r.final_fidelity, per_mode * per_mode, 1e-7);
  EXPECT_THROW(run_epr_bframe(s, mu, n0, 0.0, {0.0, T}), DomainError);
}

TEST(EprVariance, ReferenceStates) {
  const ModeSpace space = ModeSpace::pair(25);
  EXPECT_NEAR(epr_variance(vacuum(space)), 2.0, 1e-12);
  const FieldState tmsv = two_mode_squeezed_vacuum(space, SqueezeParams::real(0.5));
  EXPECT_NEAR(epr_variance(tmsv), 2.0 * std::exp(-1.0), 1e-8);
  EXPECT_NEAR(epr_variance(thermal_state(ModeSpace::pair(30), 0.4)), 2.0 * 1.8, 1e-8);
  EXPECT_THROW(epr_variance(vacuum(ModeSpace::single(3))), DomainError);
}

TEST(EprVariance, SqueezingFromRatioReducesBothQuadratures) {
  const ModeSpace space = ModeSpace::pair(30);
  for (double mu : {0.3, 0.6}) {
    const SqueezeParams xi = SqueezeParams::from_mu(mu);
    EXPECT_GT(xi.xi.real(), 0.0);
    EXPECT_NEAR(xi.r(), std::atanh(mu), 1e-15);
    EXPECT_NEAR(epr_variance(two_mode_squeezed_vacuum(space, xi)), 2.0 * std::exp(-2.0 * xi.r()), 1e-8);
  }
}

TEST(FullBackend, UnsqueezedVacuumStaysDark) {
  const ModeSpace space = ModeSpace::pair(4);
  EprPhysics phys;
  phys.mu = 0.0;
  phys.g = 1.0;
  BeamConfig beam;
  beam.rate_g = 20.0;
  beam.angle = RabiAngleDist::delta(0.3);
  TrajectoryOptions opts;
  opts.n_traj = 8;
  opts.seed = 3;
  const EprResult r = run_epr_full(ProtocolSchedule::two_step(1.0), phys, beam, vacuum(space), opts);
  EXPECT_EQ(r.series.times.size(), 41u);
  for (double f : r.series.fidelity) EXPECT_NEAR(f, 1.0, 1e-12);
  for (double n : r.series.nb1) EXPECT_NEAR(n, 0.0, 1e-12);
  EXPECT_NEAR(r.epr_variance, 2.0, 1e-12);
}

TEST(FullBackend, ThreadCountDoesNotChangeResults) {
  const ModeSpace space = ModeSpace::pair(8);
  EprPhysics phys;
  phys.mu = 0.4;
  phys.g = 1.0;
  BeamConfig beam;
  beam.rate_g = 30.0;
  beam.angle = RabiAngleDist::gaussian(0.4, 0.05);
  TrajectoryOptions opts;
  opts.n_traj = 24;
  opts.seed = 77;
  opts.sample_times = {0.0, 0.5, 1.0};
  opts.threads = 1;
  const EprResult a = run_epr_full(ProtocolSchedule::two_step(0.5), phys, beam, vacuum(space), opts);
  opts.threads = 6;
  const EprResult b = run_epr_full(ProtocolSchedule::two_step(0.5), phys, beam, vacuum(space), opts);
  EXPECT_EQ(a.series.fidelity, b.series.fidelity);
  EXPECT_EQ(a.series.nb1, b.series.nb1);
  EXPECT_EQ(a.series.nb2_se, b.series.nb2_se);
  EXPECT_EQ(a.state->density(), b.state->density());
  EXPECT_GT(a.final_fidelity, a.series.fidelity.front());
}

TEST(FitLogSlope, RecoversExponentialRate) {
  std::vector<double> t, y, se;
  for (int k = 0; k < 20; ++k) {
    t.push_back(0.1 * k);
    y.push_back(3.0 * std::exp(-2.5 * t.back()));
    se.push_back(0.01 * y.back());
  }
  EXPECT_NEAR(fit_log_slope(t, y, 10.0), -2.5, 1e-12);
  EXPECT_NEAR(fit_log_slope(t, y, 1.0, se), -2.5, 1e-12);
  y[3] = 0.0;
  EXPECT_NEAR(fit_log_slope(t, y, 10.0), -2.5, 1e-12);
  EXPECT_THROW(fit_log_slope(t, y, -1.0), DomainError);
}

TEST(Scan, WeakAndStrongEnvelopes) {
  ScanConfig cfg;
  cfg.mu = 0.9;
  cfg.sigma_rel = 0.05;
  const auto weak = scan_time_vs_tau(cfg, {0.01});
  ASSERT_FALSE(weak[0].censored);
  EXPECT_NEAR(weak[0].time_numeric / weak[0].time_weak, 1.0, 0.01);

  cfg.sigma_rel = 1.0;
  const auto strong = scan_time_vs_tau(cfg, {3.0});
  ASSERT_FALSE(strong[0].censored);
  EXPECT_NEAR(strong[0].time_numeric / strong[0].time_strong, 1.0, 1e-5);
}

TEST(Scan, ExactTrappingAngleCensors) {
  ScanConfig cfg;
  cfg.mu = 0.9;
  cfg.sigma_rel = 0.0;
  cfg.horizon_factor = 5.0;
  // At 0.2 the largest populated level (about 130) has angle 0.2 sqrt(n) < pi,
  // so no level comes near trapping.
  const auto p = scan_time_vs_tau(cfg, {kPi / 2.0, 0.2});
  EXPECT_TRUE(p[0].censored);
  EXPECT_TRUE(std::isnan(p[0].time_numeric));
  EXPECT_FALSE(p[1].censored);
  EXPECT_THROW(scan_time_vs_tau(cfg, {0.0}), DomainError);
}

TEST(Scan, LogGridEndpoints) {
  const auto g = log_grid(0.01, 10.0, 4);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g.front(), 0.01);
  EXPECT_NEAR(g[1], 0.1, 1e-15);
  EXPECT_NEAR(g.back(), 10.0, 1e-13);
  EXPECT_THROW(log_grid(0.0, 1.0, 3), DomainError);
}

}  // namespace
}  // namespace qreservoir
