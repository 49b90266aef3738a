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

#include "qreservoir/lindblad.hpp"
#include "qreservoir/strong_coupling.hpp"
#include "qreservoir/trajectories.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qreservoir {

// ---------------------------------------------------------------------------
// Schedule

enum class Regime { weak, strong };
enum class ProtocolMode { single_cavity, two_cavity };

/// One damping step: atoms prepared in |+> with Delta > 0 damp b1, atoms
/// prepared in |-> with Delta < 0 damp b2.
struct ProtocolStep {
  Preparation preparation = Preparation::plus;
  int delta_sign = 1;
  double duration = 0.0;

  int damped_mode() const { return delta_sign > 0 ? 0 : 1; }
};

struct ProtocolSchedule {
  std::vector<ProtocolStep> steps;
  ProtocolMode mode = ProtocolMode::single_cavity;
  Regime regime = Regime::weak;

  /// (plus, +) for T then (minus, -) for T; with passes > 1 the pair is
  /// repeated with durations T / passes.
  static ProtocolSchedule two_step(double T, int passes = 1, bool reversed = false) {
    require(passes >= 1, "ProtocolSchedule: passes must be >= 1");
    ProtocolSchedule s;
    const ProtocolStep first{Preparation::plus, 1, T / passes};
    const ProtocolStep second{Preparation::minus, -1, T / passes};
    for (int p = 0; p < passes; ++p) {
      s.steps.push_back(reversed ? second : first);
      s.steps.push_back(reversed ? first : second);
    }
    return s;
  }

  double total_duration() const {
    double t = 0.0;
    for (const auto& st : steps) t += st.duration;
    return t;
  }

  void validate() const {
    require(!steps.empty(), "ProtocolSchedule: no steps");
    for (const auto& st : steps) {
      require(st.duration >= 0.0, "ProtocolSchedule: step durations must be >= 0");
      require(st.delta_sign == 1 || st.delta_sign == -1, "ProtocolSchedule: delta sign must be +1 or -1");
      const bool consistent = (st.preparation == Preparation::plus && st.delta_sign == 1) ||
                              (st.preparation == Preparation::minus && st.delta_sign == -1);
      require(consistent, "ProtocolSchedule: |+> atoms pair with Delta > 0 and |-> atoms with Delta < 0");
    }
  }
};

// ---------------------------------------------------------------------------
// Timing

struct ProtocolTarget {
  enum class Kind { n_inf, fidelity };
  Kind kind = Kind::n_inf;
  double value = 0.01;

  /// Residual Bogoliubov occupation per mode that meets the target.
  double residual_occupation() const {
    if (kind == Kind::n_inf) {
      require(value > 0.0, "ProtocolTarget: n_inf must be > 0");
      return value;
    }
    require(value > 0.0 && value < 1.0, "ProtocolTarget: fidelity must lie in (0, 1)");
    return 1.0 / std::sqrt(value) - 1.0;
  }
};

struct ProtocolTiming {
  double gamma = 0.0;            // per-step damping rate, 1/s
  double omega_b = 0.0;          // rad/s
  double n_b0 = 0.0;             // initial Bogoliubov occupation per mode
  double step_time = 0.0;        // T
  double total_time = 0.0;       // 2T
  double steady_photons = 0.0;   // sinh^2 r_mu per mode
  double fidelity = 0.0;         // product law at the end of both steps
};

/// Damping rate r_at (Omega_b tau)^2 of one protocol step.
inline double protocol_gamma(double rate, double omega_b, double tau) {
  return rate * omega_b * omega_b * tau * tau;
}

/// Step time T solving n_b0 e^{-gamma T} = target residual occupation.
inline ProtocolTiming protocol_time(double mu, const ProtocolTarget& target, double g, double tau, double rate,
                                    double n_th = 0.0) {
  require(mu >= 0.0 && mu < 1.0, "protocol_time: mu must lie in [0, 1)");
  require(g > 0.0 && tau > 0.0 && rate > 0.0, "protocol_time: g, tau and rate must be > 0");
  ProtocolTiming out;
  out.omega_b = omega_b_from_mu(g, mu);
  out.gamma = protocol_gamma(rate, out.omega_b, tau);
  out.n_b0 = initial_b_occupation(mu, n_th);
  out.steady_photons = squeezed_vacuum_occupation(mu);
  const double x = target.residual_occupation();
  out.step_time = out.n_b0 > x ? std::log(out.n_b0 / x) / out.gamma : 0.0;
  out.total_time = 2.0 * out.step_time;
  const double residual = out.n_b0 * std::exp(-out.gamma * out.step_time);
  out.fidelity = 1.0 / ((1.0 + residual) * (1.0 + residual));
  return out;
}

// ---------------------------------------------------------------------------
// Results

struct EprSeries {
  std::vector<double> times;
  std::vector<double> nb1, nb2, fidelity;
  std::vector<double> nb1_se, nb2_se, fidelity_se;  // zero for deterministic backends
};

struct EprResult {
  std::string backend;
  EprSeries series;
  double gamma = 0.0;
  double final_fidelity = 0.0;
  double final_fidelity_se = 0.0;
  double epr_variance = std::numeric_limits<double>::quiet_NaN();
  double dropped_fraction = 0.0;
  std::optional<FieldState> state;
};

/// Evenly spaced sample times over [0, duration].
inline std::vector<double> uniform_times(double duration, int points) {
  require(points >= 2, "uniform_times: need at least two points");
  std::vector<double> t(static_cast<size_t>(points));
  for (int k = 0; k < points; ++k) t[k] = duration * k / (points - 1);
  return t;
}

// ---------------------------------------------------------------------------
// Bogoliubov-frame backend

/// Exact final vacuum weight for an a-vacuum start in the weak regime:
/// the b-frame state is sum_n (-mu)^n sqrt(1 - mu^2) |n, n>, each step is
/// amplitude damping of one b-mode with survival eta_j, giving
/// (1 - mu^2) / (1 - mu^2 (1 - eta_1)(1 - eta_2)).
inline double bframe_vacuum_fidelity(double mu, double survival_1, double survival_2) {
  const double m2 = mu * mu;
  return (1.0 - m2) / (1.0 - m2 * (1.0 - survival_1) * (1.0 - survival_2));
}

/// Per-mode scalar model. Weak regime: each step damps its mode's occupation
/// at rate gamma; fidelity is the product of per-mode vacuum weights of
/// thermal marginals. Strong regime: each step runs the population cascade
/// of its mode with B_n from the angle distribution.
inline EprResult run_epr_bframe(const ProtocolSchedule& schedule, double mu, double n_b0, double gamma,
                                const std::vector<double>& sample_times,
                                const std::optional<RabiAngleDist>& strong_dist = std::nullopt,
                                double strong_rate = 0.0) {
  schedule.validate();
  require(mu >= 0.0 && mu < 1.0, "run_epr: mu must lie in [0, 1)");
  require(std::is_sorted(sample_times.begin(), sample_times.end()), "run_epr: sample times must be sorted");
  EprResult out;
  out.backend = schedule.regime == Regime::weak ? "bframe_weak" : "bframe_strong";
  out.gamma = gamma;
  auto& s = out.series;
  s.times = sample_times;

  if (schedule.regime == Regime::weak) {
    for (double t : sample_times) {
      double n[2] = {n_b0, n_b0};
      double elapsed = 0.0;
      for (const auto& st : schedule.steps) {
        const double active = std::clamp(t - elapsed, 0.0, st.duration);
        n[st.damped_mode()] *= std::exp(-gamma * active);
        elapsed += st.duration;
      }
      s.nb1.push_back(n[0]);
      s.nb2.push_back(n[1]);
      s.fidelity.push_back(1.0 / ((1.0 + n[0]) * (1.0 + n[1])));
    }
  } else {
    require(strong_dist.has_value() && strong_rate > 0.0, "run_epr: strong regime needs an angle distribution and rate");
    const double q = n_b0 / (1.0 + n_b0);
    const int cutoff = q > 0.0 ? std::max(8, static_cast<int>(std::ceil(std::log(1e-12) / std::log(q)))) : 8;
    const RealVector b = bn_table(cutoff, *strong_dist);
    const DiagonalCascade cascade(b, strong_rate);
    RealVector c[2] = {thermal_populations(cutoff, n_b0), thermal_populations(cutoff, n_b0)};
    RealVector levels = RealVector::LinSpaced(cutoff + 1, 0.0, cutoff);
    double t = 0.0;
    size_t step = 0;
    double step_end = schedule.steps.empty() ? 0.0 : schedule.steps[0].duration;
    for (double target : sample_times) {
      while (t < target) {
        while (step < schedule.steps.size() && t >= step_end) {
          ++step;
          if (step < schedule.steps.size()) step_end += schedule.steps[step].duration;
        }
        if (step >= schedule.steps.size()) {
          t = target;
          break;
        }
        const double until = std::min(target, step_end);
        cascade.advance(c[schedule.steps[step].damped_mode()], until - t);
        t = until;
      }
      s.nb1.push_back(levels.dot(c[0]));
      s.nb2.push_back(levels.dot(c[1]));
      s.fidelity.push_back(c[0](0) * c[1](0));
    }
  }
  s.nb1_se.assign(s.times.size(), 0.0);
  s.nb2_se.assign(s.times.size(), 0.0);
  s.fidelity_se.assign(s.times.size(), 0.0);
  out.final_fidelity = s.fidelity.empty() ? 0.0 : s.fidelity.back();
  out.epr_variance = std::numeric_limits<double>::quiet_NaN();
  return out;
}

// ---------------------------------------------------------------------------
// Full two-mode Monte Carlo backend

/// Physical parameters of the single-cavity protocol.
struct EprPhysics {
  double mu = 0.5;
  double g = 1.25e5;              // rad/s
  double drive_omega = 0.0;       // classical Rabi strength; 0 selects 50 g
  double omega() const { return drive_omega > 0.0 ? drive_omega : 50.0 * g; }
};

struct TrajectoryOptions {
  int n_traj = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<double> sample_times;
};

/// Summed quadrature variance Var(x1 - x2) + Var(p1 + p2); 2 for vacuum,
/// 2 e^{-2r} for S^dag(r)|0,0> with real positive r.
inline double epr_variance(const FieldState& state) {
  require(state.space().mode_count() == 2, "epr_variance: two-mode state required");
  const ModeSpace& sp = state.space();
  SparseMatrix a1 = lowering_sparse(sp, 0), a2 = lowering_sparse(sp, 1);
  SparseMatrix a1d = SparseMatrix(a1.adjoint()), a2d = SparseMatrix(a2.adjoint());
  const double k = 1.0 / std::sqrt(2.0);
  SparseMatrix u = k * (a1 + a1d - a2 - a2d);                       // x1 - x2
  SparseMatrix v = SparseMatrix((-kI * k) * (a1 - a1d + a2 - a2d));  // p1 + p2
  auto variance = [&](const SparseMatrix& op) {
    const double m = expectation(op, state).real();
    const SparseMatrix sq = op * op;
    return expectation(sq, state).real() - m * m;
  };
  return variance(u) + variance(v);
}

/// Two-mode Monte Carlo: every atom is kicked by the resonant dressed-atom
/// coupling of its step (normalized to Omega_b, so the kick angle is
/// Omega_b tau) and read out in the dressed basis.
inline EprResult run_epr_full(const ProtocolSchedule& schedule, const EprPhysics& phys, const BeamConfig& beam,
                              const FieldState& initial, const TrajectoryOptions& opts) {
  schedule.validate();
  beam.validate();
  const ModeSpace& space = initial.space();
  require(space.mode_count() == 2, "run_epr: two-mode initial state required");
  require(phys.mu >= 0.0 && phys.mu < 1.0, "run_epr: mu must lie in [0, 1)");
  const SqueezeParams squeeze = SqueezeParams::from_mu(phys.mu);
  const FieldState target = two_mode_squeezed_vacuum(space, squeeze);
  const double omega_b = omega_b_from_mu(phys.g, phys.mu);

  std::shared_ptr<const BlockPropagator> stage[2];
  for (int sign : {1, -1}) {
    SparseMatrix h;
    if (phys.mu > 0.0) {
      const DriveConfig drive = drive_for_mu(phys.mu, phys.omega(), phys.g, sign);
      h = effective_interaction(drive, space).h;
    } else {
      h = bogoliubov_interaction(sign > 0 ? DampedMode::b1 : DampedMode::b2, omega_b, space, squeeze);
    }
    stage[sign > 0 ? 0 : 1] = std::make_shared<const BlockPropagator>(SparseMatrix(h / omega_b));
  }

  TrajectoryConfig cfg;
  for (const auto& st : schedule.steps) {
    Segment seg;
    seg.duration = st.duration;
    const int mode = st.damped_mode();
    seg.channels.push_back(propagator_channel(mode == 0 ? "plus" : "minus", beam.total_rate(), beam.angle,
                                              mode == 0 ? 0 : 1, {stage[mode]}));
    cfg.segments.push_back(std::move(seg));
  }
  BogoliubovOperators b = bogoliubov_operators(space, squeeze);
  cfg.observables = {{"nb1", SparseMatrix(b.b1.adjoint()) * b.b1}, {"nb2", SparseMatrix(b.b2.adjoint()) * b.b2}};
  cfg.overlap_target = target.vector();
  cfg.transit_time = beam.transit_time;
  cfg.n_traj = opts.n_traj;
  cfg.master_seed = opts.seed;
  cfg.threads = opts.threads;
  cfg.sample_times = opts.sample_times.empty() ? uniform_times(schedule.total_duration(), 41) : opts.sample_times;
  const TrajectoryResult tr = run_trajectories(initial, cfg);

  EprResult out;
  out.backend = "full_monte_carlo";
  out.gamma = protocol_gamma(beam.total_rate(), omega_b, beam.angle.mean());
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

/// Least-squares slope of ln(y) against t over points with t <= t_max and
/// y > 0, weighted by y / se when standard errors are given.
inline double fit_log_slope(const std::vector<double>& t, const std::vector<double>& y, double t_max,
                            const std::vector<double>& se = {}) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] > t_max || y[i] <= 0.0) continue;
    double w = 1.0;
    if (!se.empty() && se[i] > 0.0) w = (y[i] / se[i]) * (y[i] / se[i]);
    const double ly = std::log(y[i]);
    sw += w;
    sx += w * t[i];
    sy += w * ly;
    sxx += w * t[i] * t[i];
    sxy += w * t[i] * ly;
  }
  const double den = sw * sxx - sx * sx;
  require(den > 0.0, "fit_log_slope: not enough points");
  return (sw * sxy - sx * sy) / den;
}

// ---------------------------------------------------------------------------
// Time to target versus interaction time

struct ScanPoint {
  double phi0 = 0.0;          // Omega_b * mean interaction time
  double time_numeric = 0.0;  // NaN when censored
  bool censored = false;
  double time_weak = 0.0;
  double time_strong = 0.0;
};

struct ScanConfig {
  double mu = 0.95;
  double fidelity = 0.99;
  double epsilon = 0.1;       // atoms per interaction time, r_at * tau
  double sigma_rel = 0.05;
  double horizon_factor = 100.0;
  int threads = 1;
};

/// Time per step, in units of 1/Omega_b, for each Bogoliubov mode to reach
/// vacuum weight sqrt(F) from its thermal marginal mu^{2n}(1 - mu^2), with
/// Gaussian angles phi0 = Omega_b tau and rate epsilon / tau. Also returns the
/// weak-coupling envelope ln(n0/x) / (epsilon phi0) and the strong-coupling
/// envelope 2 ln(mu^2 / (1 - sqrt F)) / ((1 - mu^2) r).
inline std::vector<ScanPoint> scan_time_vs_tau(const ScanConfig& cfg, const std::vector<double>& phi_grid) {
  require(cfg.mu > 0.0 && cfg.mu < 1.0, "scan_time_vs_tau: mu must lie in (0, 1)");
  require(cfg.fidelity > 0.0 && cfg.fidelity < 1.0, "scan_time_vs_tau: fidelity must lie in (0, 1)");
  require(cfg.epsilon > 0.0 && cfg.sigma_rel >= 0.0, "scan_time_vs_tau: epsilon > 0 and sigma_rel >= 0 required");
  const double m2 = cfg.mu * cfg.mu;
  const double per_mode = std::sqrt(cfg.fidelity);
  const double n0 = squeezed_vacuum_occupation(cfg.mu);
  const double x = 1.0 / per_mode - 1.0;
  const int cutoff = static_cast<int>(std::ceil(std::log(1e-12) / std::log(m2)));
  const RealVector c0 = thermal_populations(cutoff, n0);
  std::vector<ScanPoint> out(phi_grid.size());
  parallel_for_index(phi_grid.size(), cfg.threads, [&](size_t i) {
    const double phi0 = phi_grid[i];
    require(phi0 > 0.0, "scan_time_vs_tau: phi0 must be > 0");
    ScanPoint& p = out[i];
    p.phi0 = phi0;
    const double rate = cfg.epsilon / phi0;
    p.time_weak = std::log(n0 / x) / (cfg.epsilon * phi0);
    p.time_strong = 2.0 * std::log(m2 / (1.0 - per_mode)) / ((1.0 - m2) * rate);
    const RabiAngleDist dist = cfg.sigma_rel > 0.0 ? RabiAngleDist::gaussian(phi0, cfg.sigma_rel * phi0)
                                                   : RabiAngleDist::delta(phi0);
    const double horizon = cfg.horizon_factor * std::max(p.time_weak, p.time_strong);
    const auto t = time_to_vacuum_population(c0, bn_table(cutoff, dist), rate, per_mode, horizon);
    p.censored = !t.has_value();
    p.time_numeric = t.value_or(std::numeric_limits<double>::quiet_NaN());
  });
  return out;
}

/// Logarithmically spaced grid of n points over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int n) {
  require(lo > 0.0 && hi > lo && n >= 2, "log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) g[k] = lo * std::pow(hi / lo, double(k) / (n - 1));
  return g;
}

}  // namespace qreservoir
