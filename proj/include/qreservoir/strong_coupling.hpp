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

#include "qreservoir/beam.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <optional>
#include <set>
#include <vector>

namespace qreservoir {

/// Probability that a ground-state atom removes a photon from |n>,
/// B_n = E[sin^2(phi sqrt n)]. The Gaussian value is the full-line integral
/// 1/2 (1 - e^{-2 n sigma^2} cos(2 phi0 sqrt n)).
inline double bn(int n, const RabiAngleDist& dist) {
  require(n >= 0, "bn: n must be >= 0");
  dist.validate();
  if (n == 0) return 0.0;
  const double k = std::sqrt(double(n));
  switch (dist.kind) {
    case AngleKind::delta: {
      const double s = std::sin(dist.phi0 * k);
      return s * s;
    }
    case AngleKind::gaussian:
      return 0.5 * (1.0 - std::exp(-2.0 * n * dist.sigma * dist.sigma) * std::cos(2.0 * dist.phi0 * k));
    case AngleKind::broad:
      return 0.5 - std::sin(4.0 * kPi * k) / (8.0 * kPi * k);
  }
  return 0.0;
}

/// B_n by quadrature over the angle distribution. With truncate = false the
/// Gaussian density is integrated over the whole line, which is the integral
/// the closed form evaluates.
inline double bn_quadrature(int n, const RabiAngleDist& dist, bool truncate = true) {
  require(n >= 0, "bn: n must be >= 0");
  if (n == 0) return 0.0;
  const double k = std::sqrt(double(n));
  return dist.rule(n, truncate).integrate([k](double phi) {
    const double s = std::sin(phi * k);
    return s * s;
  });
}

inline RealVector bn_table(int n_max, const RabiAngleDist& dist) {
  RealVector b(n_max + 1);
  for (int n = 0; n <= n_max; ++n) b(n) = bn(n, dist);
  return b;
}

/// Populations c_n of a single mode and the arrival rate of ground atoms.
struct DiagonalField {
  RealVector c;
  double rate = 0.0;

  void validate() const {
    require(c.size() >= 2, "DiagonalField: need at least two levels");
    require(rate >= 0.0, "DiagonalField: rate must be >= 0");
    require(c.minCoeff() >= 0.0, "DiagonalField: populations must be >= 0");
    require(std::abs(c.sum() - 1.0) < 1e-10, "DiagonalField: populations must sum to 1");
    require(c(c.size() - 1) <= 1e-12, "DiagonalField: population at the cutoff exceeds 1e-12; extend the cutoff");
  }
};

/// RK4 stepper for the cascade dc_n/dt = -r B_n c_n + r B_{n+1} c_{n+1}.
/// Every column of the rate matrix sums to zero, so the total population is
/// conserved up to rounding.
class DiagonalCascade {
 public:
  DiagonalCascade(RealVector b, double rate, double step_fraction = 0.05)
      : b_(std::move(b)), rate_(rate) {
    require(rate >= 0.0, "DiagonalCascade: rate must be >= 0");
    require(b_.size() >= 1 && b_(0) == 0.0, "DiagonalCascade: B_0 must vanish");
    const double bmax = b_.maxCoeff();
    h_max_ = bmax > 0.0 && rate > 0.0 ? step_fraction / (rate * bmax) : std::numeric_limits<double>::infinity();
  }

  double max_step() const { return h_max_; }

  RealVector derivative(const RealVector& c) const {
    const Index n = c.size();
    RealVector out(n);
    for (Index k = 0; k < n; ++k) {
      double v = -rate_ * b_(k) * c(k);
      if (k + 1 < n) v += rate_ * b_(k + 1) * c(k + 1);
      out(k) = v;
    }
    return out;
  }

  void step(RealVector& c, double h) const {
    RealVector k1 = derivative(c);
    RealVector k2 = derivative(c + 0.5 * h * k1);
    RealVector k3 = derivative(c + 0.5 * h * k2);
    RealVector k4 = derivative(c + h * k3);
    c += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  /// Advances c by `span` using steps no longer than max_step().
  void advance(RealVector& c, double span) const {
    if (span <= 0.0 || !std::isfinite(h_max_)) return;
    const int steps = static_cast<int>(std::ceil(span / h_max_ - 1e-12));
    const double h = span / steps;
    for (int s = 0; s < steps; ++s) step(c, h);
  }

 private:
  RealVector b_;
  double rate_;
  double h_max_;
};

/// Population time series on a sorted time grid.
inline std::vector<RealVector> evolve_diagonal(const DiagonalField& field, const RealVector& b,
                                               const std::vector<double>& t_grid) {
  field.validate();
  require(b.size() == field.c.size(), "evolve_diagonal: B table size mismatch");
  require(std::is_sorted(t_grid.begin(), t_grid.end()), "evolve_diagonal: time grid must be sorted");
  DiagonalCascade cascade(b, field.rate);
  std::vector<RealVector> out;
  RealVector c = field.c;
  double t = t_grid.empty() ? 0.0 : t_grid.front();
  for (double target : t_grid) {
    cascade.advance(c, target - t);
    t = target;
    out.push_back(c);
  }
  return out;
}

inline std::vector<RealVector> evolve_diagonal(const DiagonalField& field, const RabiAngleDist& dist,
                                               const std::vector<double>& t_grid) {
  return evolve_diagonal(field, bn_table(static_cast<int>(field.c.size()) - 1, dist), t_grid);
}

/// First time at which c_0 reaches `target`, or nullopt if it does not
/// happen before `horizon`. The crossing step is refined by bisection.
inline std::optional<double> time_to_vacuum_population(const RealVector& c0, const RealVector& b, double rate,
                                                       double target, double horizon) {
  require(target > 0.0 && target <= 1.0, "time_to_vacuum_population: target must lie in (0, 1]");
  if (c0(0) >= target) return 0.0;
  DiagonalCascade cascade(b, rate);
  const double h = std::min(cascade.max_step(), horizon / 64.0);
  RealVector c = c0;
  double t = 0.0;
  while (t < horizon) {
    RealVector next = c;
    const double dt = std::min(h, horizon - t);
    cascade.step(next, dt);
    if (next(0) >= target) {
      double lo = 0.0, hi = dt;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        RealVector probe = c;
        cascade.step(probe, mid);
        (probe(0) >= target ? hi : lo) = mid;
      }
      return t + hi;
    }
    c = std::move(next);
    t += dt;
  }
  return std::nullopt;
}

/// Vacuum population for B_n = 1/2:
/// 1 - e^{-rt/2} sum_n c_n(0) sum_{m<n} (rt/2)^m / m!.
inline double fidelity_sc(double t, const RealVector& c0, double rate) {
  require(t >= 0.0 && rate >= 0.0, "fidelity_sc: t and rate must be >= 0");
  const double x = rate * t / 2.0;
  double loss = 0.0;
  for (Index n = 1; n < c0.size(); ++n) {
    if (c0(n) == 0.0) continue;
    // sum_{m<n} e^{-x} x^m / m! is the regularized upper incomplete gamma Q(n, x).
    loss += c0(n) * (x == 0.0 ? 1.0 : boost::math::gamma_q(double(n), x));
  }
  return 1.0 - loss;
}

/// Thermal start c_n = (1 - mu^2) mu^{2n}: 1 - mu^2 e^{-rt(1 - mu^2)/2}.
inline double fidelity_sc_thermal(double t, double mu, double rate) {
  require(mu >= 0.0 && mu < 1.0, "fidelity_sc_thermal: mu must lie in [0, 1)");
  return 1.0 - mu * mu * std::exp(-rate * t * (1.0 - mu * mu) / 2.0);
}

/// Fock numbers n <= n_max left invariant by a delta-distributed angle,
/// phi0 sqrt(n) in pi Z. When (pi/phi0)^2 is an integer m0 the set is
/// {m0 l^2} by exact integer arithmetic; otherwise each n is tested with a
/// relative tolerance.
inline std::set<int> find_trapping_numbers(double phi0, int n_max, double tolerance = 1e-9) {
  require(phi0 > 0.0, "find_trapping_numbers: phi0 must be > 0");
  require(n_max >= 0, "find_trapping_numbers: n_max must be >= 0");
  std::set<int> out{0};
  const double m0 = (kPi / phi0) * (kPi / phi0);
  const double m0_round = std::round(m0);
  if (m0_round >= 1.0 && std::abs(m0 - m0_round) <= tolerance * m0_round) {
    const long long m = static_cast<long long>(m0_round);
    for (long long l = 1; m * l * l <= n_max; ++l) out.insert(static_cast<int>(m * l * l));
    return out;
  }
  for (int n = 1; n <= n_max; ++n) {
    const double turns = phi0 * std::sqrt(double(n)) / kPi;
    if (std::abs(turns - std::round(turns)) <= tolerance * std::max(1.0, turns)) out.insert(n);
  }
  return out;
}

}  // namespace qreservoir
