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

#include <functional>
#include <limits>
#include <vector>

namespace qreservoir {

/// Damping through `lowering` at rate gamma_down and pumping through its
/// adjoint at gamma_up:
///   d rho/dt = -(gamma_down/2) (L^dag L rho - 2 L rho L^dag + rho L^dag L)
///              -(gamma_up/2)   (L L^dag rho - 2 L^dag rho L + rho L L^dag).
/// With L = a, <a^dag a> relaxes at rate gamma_down - gamma_up.
struct DampingChannel {
  SparseMatrix lowering;
  double gamma_down = 0.0;
  double gamma_up = 0.0;
};

/// Loss rate of a thin beam of weakly coupled atoms, r phi^2.
inline double weak_coupling_rate(double rate, double phi) { return rate * phi * phi; }

struct IntegrateOptions {
  /// Largest RK4 step in units of the inverse generator-norm bound. RK4 is
  /// stable up to 2.78; 0.5 keeps the global error near 1e-7 for unit-trace
  /// states, which stability alone (about 1e-4 at 2.5) does not.
  double step_safety = 0.5;
  double trace_tolerance = 1e-9;
  double population_floor = -1e-8;
  int max_halvings = 10;
};

/// Fixed-step classical RK4 integrator for sums of damping channels.
class LindbladIntegrator {
 public:
  LindbladIntegrator(const ModeSpace& space, std::vector<DampingChannel> channels,
                     IntegrateOptions options = {})
      : space_(space), options_(options) {
    for (auto& ch : channels) {
      require(ch.gamma_down >= 0.0 && ch.gamma_up >= 0.0, "DampingChannel: rates must be >= 0");
      require(ch.lowering.rows() == space.dim() && ch.lowering.cols() == space.dim(),
              "DampingChannel: operator dimension mismatch");
      if (ch.gamma_down == 0.0 && ch.gamma_up == 0.0) continue;
      Term t;
      t.l = ch.lowering;
      t.l_dag = SparseMatrix(ch.lowering.adjoint());
      t.down = ch.gamma_down;
      t.up = ch.gamma_up;
      // |D[L]| <= 2 |L|^2 <= 2 max(|L^dag L|, |L L^dag|) in the induced norm.
      norm_bound_ += 2.0 * (t.down + t.up) * std::max(row_sum_norm(SparseMatrix(t.l_dag * t.l)),
                                                       row_sum_norm(SparseMatrix(t.l * t.l_dag)));
      terms_.push_back(std::move(t));
    }
  }

  /// Bound on the generator's spectral radius used for step selection.
  double norm_bound() const { return norm_bound_; }

  Matrix derivative(const Matrix& rho) const {
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    Matrix x, y, jump;
    for (const auto& t : terms_) {
      if (t.down > 0.0) accumulate(t.l, t.l_dag, t.down, rho, out, x, y, jump);
      if (t.up > 0.0) accumulate(t.l_dag, t.l, t.up, rho, out, x, y, jump);
    }
    return out;
  }

  /// Integrates over the sorted grid, calling observer(t, rho) at each grid
  /// time (including t_grid[0]). The step is halved and the run restarted when
  /// the trace or population monitors trip.
  Matrix run(const FieldState& rho0, const std::vector<double>& t_grid,
             const std::function<void(double, const Matrix&)>& observer = {}) const {
    require(!t_grid.empty(), "integrate: empty time grid");
    require(std::is_sorted(t_grid.begin(), t_grid.end()), "integrate: time grid must be sorted");
    require(rho0.space() == space_, "integrate: space mismatch");
    rho0.validate(false);
    double h_max = std::numeric_limits<double>::infinity();
    if (norm_bound_ > 0.0) h_max = options_.step_safety / norm_bound_;
    for (int attempt = 0; attempt <= options_.max_halvings; ++attempt) {
      Matrix rho = rho0.density();
      bool ok = true;
      std::vector<std::pair<double, Matrix>> pending;
      double t = t_grid.front();
      for (size_t k = 0; k < t_grid.size() && ok; ++k) {
        const double target = t_grid[k];
        const double span = target - t;
        if (span > 0.0 && !terms_.empty()) {
          const int steps = static_cast<int>(std::ceil(span / h_max - 1e-12));
          const double h = span / steps;
          for (int s = 0; s < steps; ++s) {
            rk4_step(rho, h);
            if (!monitors_ok(rho)) {
              ok = false;
              break;
            }
          }
        }
        t = target;
        if (ok) pending.emplace_back(t, rho);
      }
      if (ok) {
        if (observer)
          for (const auto& [time, state] : pending) observer(time, state);
        return pending.back().second;
      }
      if (!std::isfinite(h_max)) h_max = (t_grid.back() - t_grid.front());
      h_max /= 2.0;
    }
    throw ConvergenceError("integrate: trace/positivity monitors failed after " +
                           std::to_string(options_.max_halvings) + " step halvings");
  }

  std::vector<FieldState> integrate(const FieldState& rho0, const std::vector<double>& t_grid) const {
    std::vector<FieldState> out;
    out.reserve(t_grid.size());
    run(rho0, t_grid, [&](double, const Matrix& rho) { out.push_back(FieldState::from_density(space_, rho)); });
    return out;
  }

 private:
  struct Term {
    SparseMatrix l, l_dag;
    double down = 0.0, up = 0.0;
  };

  // out += (rate/2) (2 L rho L^dag - L^dag L rho - rho L^dag L), using
  // X = L rho, L^dag L rho = L^dag X and L rho L^dag = (L X^dag)^dag.
  static void accumulate(const SparseMatrix& l, const SparseMatrix& l_dag, double rate, const Matrix& rho,
                         Matrix& out, Matrix& x, Matrix& y, Matrix& jump) {
    x.noalias() = l * rho;
    y.noalias() = l_dag * x;
    jump.noalias() = l * x.adjoint();
    out += (rate / 2.0) * (2.0 * jump.adjoint() - y - y.adjoint());
  }

  static double row_sum_norm(const SparseMatrix& m) {
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(m.rows());
    for (Index j = 0; j < m.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(m, j); it; ++it) sums(it.row()) += std::abs(it.value());
    return sums.size() ? sums.maxCoeff() : 0.0;
  }

  void rk4_step(Matrix& rho, double h) const {
    Matrix k1 = derivative(rho);
    Matrix k2 = derivative(rho + (h / 2.0) * k1);
    Matrix k3 = derivative(rho + (h / 2.0) * k2);
    Matrix k4 = derivative(rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  bool monitors_ok(const Matrix& rho) const {
    const cplx tr = rho.trace();
    if (!std::isfinite(tr.real()) || std::abs(tr - 1.0) > options_.trace_tolerance) return false;
    return rho.diagonal().real().minCoeff() >= options_.population_floor;
  }

  ModeSpace space_;
  IntegrateOptions options_;
  std::vector<Term> terms_;
  double norm_bound_ = 0.0;
};

inline std::vector<FieldState> integrate(const FieldState& rho0, const DampingChannel& channel,
                                         const std::vector<double>& t_grid) {
  return LindbladIntegrator(rho0.space(), {channel}).integrate(rho0, t_grid);
}

/// Exact solution of d rho/dt = gamma D[a_mode] rho over a time with
/// survival eta = e^{-gamma t}: rho -> sum_k K_k rho K_k^dag with
/// K_k = sum_n sqrt(C(n, k) eta^(n-k) (1 - eta)^k) |n - k><n| on that mode.
inline Matrix amplitude_damping(const Matrix& rho, const ModeSpace& space, int mode, double eta) {
  require(eta >= 0.0 && eta <= 1.0, "amplitude_damping: eta must lie in [0, 1]");
  require(mode >= 0 && mode < space.mode_count(), "amplitude_damping: mode out of range");
  require(rho.rows() == space.dim() && rho.cols() == space.dim(), "amplitude_damping: dimension mismatch");
  const int n_max = space.cutoff();
  const Index md = space.mode_dim();
  // coef(n, k) = sqrt(C(n, k) eta^(n-k) (1-eta)^k), via log-binomials.
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n)
    for (int k = 0; k <= n; ++k) {
      const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
      const double p_keep = n - k == 0 ? 1.0 : std::pow(eta, n - k);
      const double p_lose = k == 0 ? 1.0 : std::pow(1.0 - eta, k);
      coef(n, k) = std::sqrt(std::exp(log_binom) * p_keep * p_lose);
    }
  // Joint index = n1 * md + n2; the damped mode's number and the stride
  // that lowers it by one.
  const Index stride = space.mode_count() == 1 || mode == 1 ? 1 : md;
  auto level = [&](Index i) { return static_cast<int>(stride == 1 ? i % md : i / md); };
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (Index j = 0; j < rho.cols(); ++j) {
    const int nj = level(j);
    for (Index i = 0; i < rho.rows(); ++i) {
      const cplx v = rho(i, j);
      if (v == cplx(0.0)) continue;
      const int ni = level(i);
      for (int k = 0; k <= std::min(ni, nj); ++k)
        out(i - k * stride, j - k * stride) += coef(ni, k) * coef(nj, k) * v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed forms

/// Vacuum population for a thermal start: 1 / (1 + n_bar0 e^{-gamma t}).
inline double vacuum_fidelity_wc(double t, double n_bar0, double gamma) {
  require(n_bar0 >= 0.0 && gamma >= 0.0, "vacuum_fidelity_wc: n_bar0 and gamma must be >= 0");
  return 1.0 / (1.0 + n_bar0 * std::exp(-gamma * t));
}

struct SeriesValue {
  double value = 0.0;
  double error_bound = 0.0;  // magnitude of the first omitted term
  int terms = 0;
  bool converged = false;
};

/// Vacuum population under pure damping for an arbitrary initial photon
/// distribution, sum_k (-1)^k <C(n, k)> e^{-k gamma t}, summed until the next
/// term falls below `tolerance`.
inline SeriesValue vacuum_fidelity_series(double t, const RealVector& populations, double gamma,
                                          double tolerance = 1e-10, int max_terms = 400) {
  require(gamma >= 0.0, "vacuum_fidelity_series: gamma must be >= 0");
  const Index dim = populations.size();
  const double x = std::exp(-gamma * t);
  // Binomial moments <C(n,k)> by the recurrence C(n,k) = C(n,k-1) (n-k+1)/k.
  RealVector binom = RealVector::Ones(dim);
  SeriesValue out;
  double xk = 1.0;
  for (int k = 0; k <= max_terms; ++k) {
    if (k > 0) {
      for (Index n = 0; n < dim; ++n) binom(n) *= double(n - k + 1) / double(k);
      xk *= x;
    }
    const double term = (k % 2 == 0 ? 1.0 : -1.0) * populations.dot(binom) * xk;
    if (std::abs(term) < tolerance && k > 0) {
      out.error_bound = std::abs(term);
      out.terms = k;
      out.converged = true;
      return out;
    }
    out.value += term;
  }
  out.terms = max_terms + 1;
  out.error_bound = std::numeric_limits<double>::infinity();
  return out;
}

/// <b^dag b>(t) = n_b0 e^{-gamma t} during a damping step.
inline double bogoliubov_occupation(double t, double n_b0, double gamma) {
  require(n_b0 >= 0.0, "bogoliubov_occupation: n_b0 must be >= 0");
  return n_b0 * std::exp(-gamma * t);
}

/// Bogoliubov occupation of the vacuum, mu^2 / (1 - mu^2) = sinh^2 r_mu.
inline double squeezed_vacuum_occupation(double mu) {
  require(mu >= 0.0 && mu < 1.0, "mu must lie in [0, 1)");
  return mu * mu / (1.0 - mu * mu);
}

/// Initial Bogoliubov occupation of a thermal two-mode start with n_th
/// photons per mode: n0 + n_th + 2 n_th n0.
inline double initial_b_occupation(double mu, double n_th) {
  require(n_th >= 0.0, "n_th must be >= 0");
  const double n0 = squeezed_vacuum_occupation(mu);
  return n0 + n_th + 2.0 * n_th * n0;
}

/// Reservoir temperature k_B T / (hbar omega_c) = 1 / ln(1/R) for R < 1.
inline double effective_temperature(double ratio_R) {
  require(ratio_R > 0.0 && ratio_R < 1.0, "effective_temperature: requires 0 < R < 1");
  return 1.0 / std::log(1.0 / ratio_R);
}

/// Thermal steady-state occupation R / (1 - R).
inline double thermal_steady_occupation(double ratio_R) {
  require(ratio_R >= 0.0 && ratio_R < 1.0, "steady state requires R < 1");
  return ratio_R / (1.0 - ratio_R);
}

}  // namespace qreservoir
