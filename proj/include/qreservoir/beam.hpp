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

#include "qreservoir/fock.hpp"
#include "qreservoir/quadrature.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qreservoir {

enum class AngleKind { delta, gaussian, broad };

/// Distribution of the per-atom Rabi angle phi = g * tau.
struct RabiAngleDist {
  AngleKind kind = AngleKind::delta;
  double phi0 = 0.0;
  double sigma = 0.0;

  /// Half-width of the Gaussian quadrature window in units of sigma.
  static constexpr double kWindow = 10.0;
  static constexpr int kNodesPerPanel = 64;

  static RabiAngleDist delta(double phi0) { return {AngleKind::delta, phi0, 0.0}; }
  static RabiAngleDist gaussian(double phi0, double sigma) {
    return {AngleKind::gaussian, phi0, sigma};
  }
  /// Uniform on [0, 2 pi]: angle spread wide enough that B_n ~ 1/2.
  static RabiAngleDist broad() { return {AngleKind::broad, kPi, kPi / std::sqrt(3.0)}; }

  void validate() const {
    if (kind == AngleKind::broad) return;
    require(phi0 > 0.0, "RabiAngleDist: phi0 must be > 0");
    require(sigma >= 0.0, "RabiAngleDist: sigma must be >= 0");
  }

  bool is_point() const { return kind == AngleKind::delta || (kind == AngleKind::gaussian && sigma == 0.0); }

  /// Probability mass of the untruncated Gaussian on [0, inf).
  double positive_mass() const {
    if (kind != AngleKind::gaussian || sigma == 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::normal(phi0, sigma), 0.0));
  }

  double mean() const {
    if (kind == AngleKind::broad) return kPi;
    if (is_point()) return phi0;
    const boost::math::normal unit;
    const double alpha = -phi0 / sigma;
    return phi0 + sigma * boost::math::pdf(unit, alpha) / positive_mass();
  }

  double mean_square() const {
    if (kind == AngleKind::broad) return 4.0 * kPi * kPi / 3.0;
    if (is_point()) return phi0 * phi0;
    return rule(0).integrate([](double x) { return x * x; });
  }

  /// Draws an angle; the Gaussian is truncated to [0, inf) by rejection.
  template <typename Rng>
  double sample(Rng& rng) const {
    switch (kind) {
      case AngleKind::delta:
        return phi0;
      case AngleKind::broad:
        return std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
      case AngleKind::gaussian: {
        if (sigma == 0.0) return phi0;
        std::normal_distribution<double> normal(phi0, sigma);
        for (;;) {
          const double x = normal(rng);
          if (x >= 0.0) return x;
        }
      }
    }
    return phi0;
  }

  /// Quadrature rule for averages over the angle, resolving integrands that
  /// oscillate like sin(phi sqrt(n_max)). With truncate = false the Gaussian
  /// is integrated over the full line without renormalization.
  QuadratureRule rule(int n_max, bool truncate = true) const {
    validate();
    if (is_point()) return QuadratureRule{{phi0}, {1.0}};
    const double freq = 2.0 * std::sqrt(std::max(1, n_max));
    if (kind == AngleKind::broad) {
      const double width = 2.0 * kPi;
      const int panels = std::max(1, static_cast<int>(std::ceil(width * freq / 16.0)));
      QuadratureRule r = composite_gauss_legendre(0.0, width, panels, kNodesPerPanel);
      for (double& w : r.weights) w /= width;
      return r;
    }
    double lo = phi0 - kWindow * sigma;
    const double hi = phi0 + kWindow * sigma;
    if (truncate) lo = std::max(0.0, lo);
    const double width = hi - lo;
    const int panels =
        std::max(2, static_cast<int>(std::ceil(std::max(width * freq, width / sigma) / 16.0)));
    QuadratureRule r = composite_gauss_legendre(lo, hi, panels, kNodesPerPanel);
    const boost::math::normal normal(phi0, sigma);
    double total = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
      r.weights[i] *= boost::math::pdf(normal, r.nodes[i]);
      total += r.weights[i];
    }
    if (truncate)
      for (double& w : r.weights) w /= total;
    return r;
  }
};

enum class Preparation { ground, excited, plus, minus };

inline const char* to_string(Preparation p) {
  switch (p) {
    case Preparation::ground: return "g";
    case Preparation::excited: return "e";
    case Preparation::plus: return "plus";
    case Preparation::minus: return "minus";
  }
  return "?";
}

/// Stochastic atomic beam. Ground-state atoms arrive at rate_g, excited ones
/// at ratio_R * rate_g; each stays in the cavity for transit_time.
struct BeamConfig {
  double rate_g = 0.0;
  double ratio_R = 0.0;
  RabiAngleDist angle;
  double transit_time = 0.0;

  double total_rate() const { return rate_g * (1.0 + ratio_R); }
  /// Mean number of atoms inside the cavity, r_at * tau.
  double epsilon() const { return total_rate() * transit_time; }

  void validate() const {
    require(rate_g >= 0.0, "BeamConfig: rate must be >= 0");
    require(ratio_R >= 0.0, "BeamConfig: excited ratio must be >= 0");
    require(transit_time >= 0.0, "BeamConfig: transit time must be >= 0");
    angle.validate();
  }

  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (epsilon() >= 0.2)
      out.push_back("beam occupancy r*tau = " + std::to_string(epsilon()) +
                    " is not small; single-atom assumption is questionable");
    return out;
  }
};

struct Arrival {
  double time = 0.0;
  Preparation preparation = Preparation::ground;
  double angle = 0.0;
};

/// Deterministic per-stream generator: std::seed_seq over the 64-bit master
/// seed and the stream index, feeding a 64-bit Mersenne twister.
inline std::mt19937_64 stream_rng(std::uint64_t master_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Poisson arrivals at the total rate on [0, duration), each labeled excited
/// with probability R / (1 + R).
template <typename Rng>
std::vector<Arrival> sample_arrivals(const BeamConfig& beam, double duration, Rng& rng) {
  require(duration > 0.0, "sample_arrivals: duration must be > 0");
  beam.validate();
  std::vector<Arrival> out;
  const double rate = beam.total_rate();
  if (rate == 0.0) return out;
  std::exponential_distribution<double> gap(rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double p_excited = beam.ratio_R / (1.0 + beam.ratio_R);
  double t = gap(rng);
  while (t < duration) {
    Arrival a;
    a.time = t;
    a.preparation = unit(rng) < p_excited ? Preparation::excited : Preparation::ground;
    a.angle = beam.angle.sample(rng);
    out.push_back(a);
    t += gap(rng);
  }
  return out;
}

inline std::vector<Arrival> sample_arrivals(const BeamConfig& beam, double duration, std::uint64_t seed) {
  std::mt19937_64 rng = stream_rng(seed, 0);
  return sample_arrivals(beam, duration, rng);
}

/// Exact angle-averaged single-atom map for one mode. A ground atom maps
///   rho[m,n] -> E[cos(phi sqrt m) cos(phi sqrt n)] rho[m,n]
///             + E[sin(phi sqrt(m+1)) sin(phi sqrt(n+1))] rho[m+1,n+1]
/// and an excited atom the mirror image with sqrt(n+1); the excited atom
/// does not couple at the cutoff so the truncated map stays trace preserving.
class CoarseGrainedMap {
 public:
  CoarseGrainedMap(const BeamConfig& beam, int cutoff) : beam_(beam), cutoff_(cutoff) {
    beam.validate();
    require(cutoff >= 1, "CoarseGrainedMap: cutoff must be >= 1");
    const Index d = cutoff + 1;
    const QuadratureRule rule = beam.angle.rule(cutoff + 1);
    ground_cc_ = Eigen::MatrixXd::Zero(d, d);
    ground_ss_ = Eigen::MatrixXd::Zero(d, d);
    excited_cc_ = Eigen::MatrixXd::Zero(d, d);
    excited_ss_ = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd cg(d), sg(d), ce(d), se(d);
    for (size_t q = 0; q < rule.size(); ++q) {
      const double phi = rule.nodes[q], w = rule.weights[q];
      for (Index n = 0; n < d; ++n) {
        cg(n) = std::cos(phi * std::sqrt(double(n)));
        // sg(n) couples |n+1> down to |n>; zero at the top.
        sg(n) = n < cutoff ? std::sin(phi * std::sqrt(double(n + 1))) : 0.0;
        ce(n) = n < cutoff ? std::cos(phi * std::sqrt(double(n + 1))) : 1.0;
        se(n) = n < cutoff ? std::sin(phi * std::sqrt(double(n + 1))) : 0.0;
      }
      ground_cc_ += w * cg * cg.transpose();
      ground_ss_ += w * sg * sg.transpose();
      excited_cc_ += w * ce * ce.transpose();
      excited_ss_ += w * se * se.transpose();
    }
  }

  int cutoff() const { return cutoff_; }
  const BeamConfig& beam() const { return beam_; }

  /// Field state after one ground-state atom.
  Matrix ground_kick(const Matrix& rho) const {
    const Index d = cutoff_ + 1;
    Matrix out = ground_cc_.cast<cplx>().cwiseProduct(rho);
    out.topLeftCorner(d - 1, d - 1) +=
        ground_ss_.topLeftCorner(d - 1, d - 1).cast<cplx>().cwiseProduct(rho.bottomRightCorner(d - 1, d - 1));
    return out;
  }

  /// Field state after one excited atom.
  Matrix excited_kick(const Matrix& rho) const {
    const Index d = cutoff_ + 1;
    Matrix out = excited_cc_.cast<cplx>().cwiseProduct(rho);
    out.bottomRightCorner(d - 1, d - 1) +=
        excited_ss_.topLeftCorner(d - 1, d - 1).cast<cplx>().cwiseProduct(rho.topLeftCorner(d - 1, d - 1));
    return out;
  }

  /// Rate form d rho/dt = r (G(rho) - rho) + R r (E(rho) - rho).
  Matrix generator(const Matrix& rho) const {
    Matrix out = beam_.rate_g * (ground_kick(rho) - rho);
    if (beam_.ratio_R > 0.0) out += beam_.ratio_R * beam_.rate_g * (excited_kick(rho) - rho);
    return out;
  }

  /// One coarse-grained step of length dt: no atom, a ground atom or an
  /// excited atom with probabilities 1 - r dt (1 + R), r dt and R r dt.
  FieldState step(const FieldState& state, double dt) const {
    require(dt > 0.0, "coarse_grained_step: dt must be > 0");
    require(state.space().mode_count() == 1 && state.space().cutoff() == cutoff_,
            "coarse_grained_step: single-mode state with matching cutoff required");
    const double p = beam_.total_rate() * dt;
    require(p <= 1.0, "coarse_grained_step: r dt (1 + R) must not exceed 1");
    Matrix rho = state.density();
    Matrix out = rho + dt * generator(rho);
    return FieldState::from_density(state.space(), std::move(out));
  }

  /// True when r dt (1 + R) exceeds the small-step regime.
  bool step_is_coarse(double dt) const { return beam_.total_rate() * dt > 0.1; }

 private:
  BeamConfig beam_;
  int cutoff_;
  Eigen::MatrixXd ground_cc_, ground_ss_, excited_cc_, excited_ss_;
};

}  // namespace qreservoir
