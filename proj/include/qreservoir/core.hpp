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

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace qreservoir {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<cplx>;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

/// Tolerance tiers: floating-point construction noise, operator identities
/// on truncated spaces, and physics cross-checks against closed forms.
namespace tol {
inline constexpr double construction = 1e-12;
inline constexpr double identity = 1e-6;
inline constexpr double physics = 1e-3;
}  // namespace tol

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition of an operation (bad input values).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Numerical procedure failed to reach its accuracy target.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

inline Matrix dagger(const Matrix& m) { return m.adjoint(); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

inline SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
  SparseMatrix out = Eigen::kroneckerProduct(a, b);
  out.makeCompressed();
  return out;
}

inline SparseMatrix sparse_identity(Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

inline SparseMatrix to_sparse(const Matrix& m, double drop = 0.0) {
  std::vector<Eigen::Triplet<cplx>> triplets;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > drop) triplets.emplace_back(i, j, m(i, j));
  SparseMatrix s(m.rows(), m.cols());
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const Matrix& m) { return max_abs(m - m.adjoint()); }

/// Dense matrix exponential (scaling and squaring with Pade approximants).
inline Matrix expm(const Matrix& m) { return m.exp(); }

/// exp(a) * v by Taylor series on substeps of unit 1-norm; avoids forming
/// the dense exponential for large sparse generators.
inline Vector expm_multiply(const SparseMatrix& a, const Vector& v) {
  double norm1 = 0.0;
  for (Index j = 0; j < a.outerSize(); ++j) {
    double col = 0.0;
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) col += std::abs(it.value());
    norm1 = std::max(norm1, col);
  }
  const int substeps = std::max(1, static_cast<int>(std::ceil(norm1)));
  const double h = 1.0 / substeps;
  Vector out = v;
  for (int s = 0; s < substeps; ++s) {
    Vector term = out;
    Vector sum = out;
    for (int k = 1; k < 200; ++k) {
      term = (a * term) * (h / k);
      sum += term;
      if (term.norm() <= 1e-18 * sum.norm()) break;
    }
    out = sum;
  }
  return out;
}

/// Smallest eigenvalue of a Hermitian matrix.
inline double min_eigenvalue(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace qreservoir
