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

#pragma once

#include "qreservoir/epr.hpp"

namespace qreservoir {

enum class Direction { forward, backward };  // cavity 1 then 2, or 2 then 1

/// Two distant cavities crossed by counter-propagating beams. Angles are
/// pulse areas g * tau accumulated in each cavity.
struct TwoCavityConfig {
  double mu = 0.5;
  double g = 1.25e5;               // rad/s, equal for both cavities
  double rate_forward = 0.0;       // atoms/s crossing 1 then 2
  double rate_backward = 0.0;      // atoms/s crossing 2 then 1
  RabiAngleDist angle = RabiAngleDist::delta(0.1);
  double transit_time = 0.0;

  double omega_b() const { return omega_b_from_mu(g, mu); }
  /// Bogoliubov pulse area per unit bare pulse area, sqrt((1 - mu)/(1 + mu)).
  double area_ratio() const { return std::sqrt((1.0 - mu) / (1.0 + mu)); }

  void validate() const {
    require(mu >= 0.0 && mu < 1.0, "TwoCavityConfig: mu must lie in [0, 1)");
    require(g > 0.0, "TwoCavityConfig: g must be > 0");
    require(rate_forward >= 0.0 && rate_backward >= 0.0, "TwoCavityConfig: rates must be >= 0");
    require(transit_time >= 0.0, "TwoCavityConfig: transit time must be >= 0");
    angle.validate();
  }
  bool bidirectional() const { return rate_forward > 0.0 && rate_forward == rate_backward; }
};

/// Per-cavity couplings in units of g for one protocol step. With
/// Delta > 0 (mu = cot^2 theta):
///   cavity 1: -sin^2(theta) (a1^dag pi+ + a1 pi-),
///   cavity 2:  cos^2(theta) (a2^dag pi- + a2 pi+);
/// with Delta < 0 the same forms hold with mu = tan^2 theta.
struct CavityCouplings {
  SparseMatrix cavity1;
  SparseMatrix cavity2;
};

inline CavityCouplings cavity_couplings(double mu, int delta_sign, const ModeSpace& space) {
  require(delta_sign == 1 || delta_sign == -1, "cavity_couplings: delta sign must be +1 or -1");
  const double s2 = delta_sign > 0 ? 1.0 / (1.0 + mu) : mu / (1.0 + mu);
  const double c2 = 1.0 - s2;
  std::vector<CouplingTerm> t1 = {{0, AtomOp::pi_plus, true, -s2}, {0, AtomOp::pi_minus, false, -s2}};
  std::vector<CouplingTerm> t2 = {{1, AtomOp::pi_minus, true, c2}, {1, AtomOp::pi_plus, false, c2}};
  return {assemble(t1, space), assemble(t2, space)};
}

/// One atom freshly prepared in the step's dressed level crossing both
/// cavities with pulse area phi, atom traced out.
inline FieldState two_cavity_step(const FieldState& rho, Direction direction, double phi, double mu, int delta_sign) {
  require(rho.space().mode_count() == 2, "two_cavity_step: two-mode state required");
  require(phi >= 0.0, "two_cavity_step: phi must be >= 0");
  const ModeSpace& space = rho.space();
  const CavityCouplings h = cavity_couplings(mu, delta_sign, space);
  const Matrix u1 = BlockPropagator(h.cavity1).unitary(phi);
  const Matrix u2 = BlockPropagator(h.cavity2).unitary(phi);
  const Matrix u = direction == Direction::forward ? Matrix(u2 * u1) : Matrix(u1 * u2);
  Vector atom = Vector::Zero(2);
  atom(delta_sign > 0 ? 0 : 1) = 1.0;
  const Matrix joint = kron(Matrix(atom * atom.adjoint()), rho.density());
  const Matrix out = u * joint * u.adjoint();
  const Index d = space.dim();
  return FieldState::from_density(space, out.topLeftCorner(d, d) + out.bottomRightCorner(d, d));
}

struct GeneratorCheck {
  double relative_error = 0.0;  // |G - phi_b^2 D[b] rho| / |phi_b^2 D[b] rho|
  double bound = 0.0;           // 10 phi^2
  bool conforming = false;
};

/// Compares the per-atom change of the beam-averaged sequential map with
/// the Bogoliubov damping form phi_b^2 D[b_j] rho on a probe state. The
/// average weights the two directions by their rates.
inline GeneratorCheck two_cavity_generator_check(const TwoCavityConfig& cfg, int delta_sign, double phi,
                                                 const FieldState& probe) {
  cfg.validate();
  const double total = cfg.rate_forward + cfg.rate_backward;
  require(total > 0.0, "two_cavity_generator_check: no atoms");
  const ModeSpace& space = probe.space();
  const Matrix rho = probe.density();
  const Matrix fwd = two_cavity_step(probe, Direction::forward, phi, cfg.mu, delta_sign).density();
  const Matrix bwd = two_cavity_step(probe, Direction::backward, phi, cfg.mu, delta_sign).density();
  const Matrix change = (cfg.rate_forward * fwd + cfg.rate_backward * bwd) / total - rho;

  const BogoliubovOperators b = bogoliubov_operators(space, SqueezeParams::from_mu(cfg.mu));
  const Matrix bj = Matrix(delta_sign > 0 ? b.b1 : b.b2);
  const Matrix bdb = bj.adjoint() * bj;
  const double phi_b = phi * cfg.area_ratio();
  const Matrix expected = phi_b * phi_b * (bj * rho * bj.adjoint() - 0.5 * (bdb * rho + rho * bdb));

  GeneratorCheck out;
  out.relative_error = (change - expected).norm() / expected.norm();
  out.bound = 10.0 * phi * phi;
  out.conforming = out.relative_error < out.bound;
  return out;
}

/// Monte Carlo over interleaved forward and backward atoms.
inline EprResult run_two_cavity_mc(const ProtocolSchedule& schedule, const TwoCavityConfig& cfg,
                                   const FieldState& initial, const TrajectoryOptions& opts) {
  schedule.validate();
  cfg.validate();
  const ModeSpace& space = initial.space();
  require(space.mode_count() == 2, "run_two_cavity: two-mode initial state required");
  const SqueezeParams squeeze = SqueezeParams::from_mu(cfg.mu);

  std::shared_ptr<const BlockPropagator> p1[2], p2[2];
  for (int k = 0; k < 2; ++k) {
    const CavityCouplings h = cavity_couplings(cfg.mu, k == 0 ? 1 : -1, space);
    p1[k] = std::make_shared<const BlockPropagator>(h.cavity1);
    p2[k] = std::make_shared<const BlockPropagator>(h.cavity2);
  }
  TrajectoryConfig tc;
  for (const auto& st : schedule.steps) {
    Segment seg;
    seg.duration = st.duration;
    const int k = st.damped_mode();
    if (cfg.rate_forward > 0.0)
      seg.channels.push_back(propagator_channel("forward", cfg.rate_forward, cfg.angle, k, {p1[k], p2[k]}));
    if (cfg.rate_backward > 0.0)
      seg.channels.push_back(propagator_channel("backward", cfg.rate_backward, cfg.angle, k, {p2[k], p1[k]}));
    tc.segments.push_back(std::move(seg));
  }
  BogoliubovOperators b = bogoliubov_operators(space, squeeze);
  tc.observables = {{"nb1", SparseMatrix(b.b1.adjoint()) * b.b1}, {"nb2", SparseMatrix(b.b2.adjoint()) * b.b2}};
  tc.overlap_target = two_mode_squeezed_vacuum(space, squeeze).vector();
  tc.transit_time = cfg.transit_time;
  tc.n_traj = opts.n_traj;
  tc.master_seed = opts.seed;
  tc.threads = opts.threads;
  tc.sample_times = opts.sample_times.empty() ? uniform_times(schedule.total_duration(), 41) : opts.sample_times;
  const TrajectoryResult tr = run_trajectories(initial, tc);

  EprResult out;
  out.backend = "two_cavity_monte_carlo";
  const double phi_b = cfg.angle.mean() * cfg.area_ratio();
  out.gamma = (cfg.rate_forward + cfg.rate_backward) * phi_b * phi_b;
  auto& s = out.series;
  s.times = tr.times;
  for (Index t = 0; t < tr.mean.rows(); ++t) {
    s.nb1.push_back(tr.mean(t, 0));
    s.nb2.push_back(tr.mean(t, 1));
    s.fidelity.push_back(tr.mean(t, 2));
    s.nb1_se.push_back(tr.std_error(t, 0));
    s.nb2_se.push_back(tr.std_error(t, 1));
    s.fidelity_se.push_back(tr.std_error(t, 2));
  }
  out.final_fidelity = s.fidelity.back();
  out.final_fidelity_se = s.fidelity_se.back();
  out.dropped_fraction = tr.dropped_fraction();
  out.state = tr.averaged;
  if (out.state) out.epr_variance = epr_variance(*out.state);
  return out;
}

/// Coarse-grained backend: during each step the field obeys
/// d rho/dt = (r_fwd + r_bwd) phi_b^2 D[b_j] rho, with phi_b the Bogoliubov
/// pulse area of the mean angle. Since b_j = S^dag a_j S, the step is solved
/// exactly as amplitude damping of mode j in the frame S rho S^dag.
inline EprResult run_two_cavity_lindblad(const ProtocolSchedule& schedule, const TwoCavityConfig& cfg,
                                         const FieldState& initial, const std::vector<double>& sample_times) {
  schedule.validate();
  cfg.validate();
  const ModeSpace& space = initial.space();
  require(space.mode_count() == 2, "run_two_cavity: two-mode initial state required");
  const SqueezeParams squeeze = SqueezeParams::from_mu(cfg.mu);
  const FieldState target = two_mode_squeezed_vacuum(space, squeeze);
  const Matrix s_op = squeeze_operator(space, squeeze);
  const double phi_b = cfg.angle.mean() * cfg.area_ratio();
  const double rate = (cfg.rate_forward + cfg.rate_backward) * phi_b * phi_b;

  EprResult out;
  out.backend = "two_cavity_lindblad";
  out.gamma = rate;
  const std::vector<double> times =
      sample_times.empty() ? uniform_times(schedule.total_duration(), 41) : sample_times;
  require(std::is_sorted(times.begin(), times.end()), "run_two_cavity: sample times must be sorted");
  // In the frame, b_j^dag b_j becomes a_j^dag a_j and the target becomes |0,0>.
  const Index md = space.mode_dim();
  RealVector n1(space.dim()), n2(space.dim());
  for (Index i = 0; i < space.dim(); ++i) {
    n1(i) = double(i / md);
    n2(i) = double(i % md);
  }
  auto& s = out.series;
  auto record = [&](double t, const Matrix& frame) {
    const RealVector p = frame.diagonal().real();
    s.times.push_back(t);
    s.nb1.push_back(p.dot(n1));
    s.nb2.push_back(p.dot(n2));
    s.fidelity.push_back(p(0));
  };

  Matrix frame = s_op * initial.density() * s_op.adjoint();
  double start = 0.0;
  size_t next = 0;
  for (const auto& st : schedule.steps) {
    const double end = start + st.duration;
    for (; next < times.size() && times[next] <= end; ++next) {
      const double eta = std::exp(-rate * std::max(0.0, times[next] - start));
      record(times[next], amplitude_damping(frame, space, st.damped_mode(), eta));
    }
    frame = amplitude_damping(frame, space, st.damped_mode(), std::exp(-rate * st.duration));
    start = end;
  }
  for (; next < times.size(); ++next) record(times[next], frame);
  out.state = FieldState::from_density(space, s_op.adjoint() * frame * s_op);
  out.final_fidelity = fidelity(target, *out.state);
  out.epr_variance = epr_variance(*out.state);
  s.nb1_se.assign(s.times.size(), 0.0);
  s.nb2_se.assign(s.times.size(), 0.0);
  s.fidelity_se.assign(s.times.size(), 0.0);
  return out;
}

}  // namespace qreservoir
