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

// Reference constructions used only by the tests. Each one is built by a
// route independent of the library code it checks: dense loops instead of
// sparse assembly, full eigendecompositions instead of block propagators,
// superoperator exponentials instead of RK4, adaptive Gauss-Kronrod instead
// of fixed Gauss-Legendre panels, and analytic Schmidt or moment formulas.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace oracle {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline Matrix lowering(int cutoff) {
  Matrix a = Matrix::Zero(cutoff + 1, cutoff + 1);
  for (int n = 1; n <= cutoff; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

inline Matrix kron(const Matrix& a, const Matrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

/// exp(-i t H) for Hermitian H from a full eigendecomposition.
inline Matrix hermitian_exp(const Matrix& h, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Eigen::VectorXd e = es.eigenvalues();
  Vector phase(e.size());
  for (Eigen::Index k = 0; k < e.size(); ++k) phase(k) = std::exp(cplx(0.0, -t * e(k)));
  return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

/// Column-stacked Lindblad superoperator for
/// gamma_down D[L] + gamma_up D[L^dag], D[L]rho = L rho L^dag - {L^dag L, rho}/2.
inline Matrix lindblad_superoperator(const Matrix& l, double gamma_down, double gamma_up) {
  const Eigen::Index d = l.rows();
  const Matrix id = Matrix::Identity(d, d);
  auto dissipator = [&](const Matrix& c) {
    const Matrix cdc = c.adjoint() * c;
    return Matrix(kron(c.conjugate(), c) - 0.5 * kron(id, cdc) - 0.5 * kron(cdc.transpose(), id));
  };
  return gamma_down * dissipator(l) + gamma_up * dissipator(l.adjoint());
}

/// rho(t) = exp(L t) rho(0) with the superoperator above.
inline Matrix evolve(const Matrix& superop, const Matrix& rho0, double t) {
  const Eigen::Index d = rho0.rows();
  const Vector v = Eigen::Map<const Vector>(rho0.data(), d * d);
  const Vector out = (superop * t).exp() * v;
  return Eigen::Map<const Matrix>(out.data(), d, d);
}

/// Schmidt amplitudes tanh(r)^n / cosh(r) of the two-mode squeezed vacuum.
inline double schmidt(double r, int n) { return std::pow(std::tanh(r), n) / std::cosh(r); }

/// B_n = E[sin^2(phi sqrt n)] for a Gaussian angle law integrated over the
/// whole real line by adaptive Gauss-Kronrod on a finite window.
inline double bn_gaussian_line(int n, double phi0, double sigma) {
  const double k = std::sqrt(double(n));
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  auto f = [&](double x) {
    const double z = (x - phi0) / sigma;
    const double s = std::sin(x * k);
    return norm * std::exp(-0.5 * z * z) * s * s;
  };
  // Split the window so each piece holds a bounded number of oscillations.
  const double lo = phi0 - 12.0 * sigma, hi = phi0 + 12.0 * sigma;
  const int pieces = 1 + static_cast<int>((hi - lo) * k / 4.0);
  double total = 0.0;
  for (int p = 0; p < pieces; ++p) {
    const double a = lo + (hi - lo) * p / pieces, b = lo + (hi - lo) * (p + 1) / pieces;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
  }
  return total;
}

/// Mean photon number of a geometric distribution with ratio q truncated to
/// 0..cutoff, by direct summation.
inline double truncated_geometric_mean(double n_bar, int cutoff) {
  const double q = n_bar / (1.0 + n_bar);
  double z = 0.0, m = 0.0, w = 1.0;
  for (int n = 0; n <= cutoff; ++n) {
    z += w;
    m += n * w;
    w *= q;
  }
  return m / z;
}

}  // namespace oracle
