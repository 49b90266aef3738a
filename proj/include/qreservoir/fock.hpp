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

#include "qreservoir/block_propagator.hpp"
#include "qreservoir/core.hpp"

#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace qreservoir {

/// Truncated Fock space of one or two bosonic modes. Two-mode basis states
/// |n1, n2> are stored at index n1 * (cutoff + 1) + n2.
class ModeSpace {
 public:
  ModeSpace(int cutoff, int mode_count, std::vector<std::string> labels = {})
      : cutoff_(cutoff), mode_count_(mode_count), labels_(std::move(labels)) {
    require(cutoff >= 1, "ModeSpace: cutoff must be >= 1");
    require(mode_count == 1 || mode_count == 2, "ModeSpace: mode_count must be 1 or 2");
    if (labels_.empty()) {
      labels_ = mode_count == 1 ? std::vector<std::string>{"a"}
                                : std::vector<std::string>{"a1", "a2"};
    }
    require(static_cast<int>(labels_.size()) == mode_count,
            "ModeSpace: one label per mode required");
  }

  static ModeSpace single(int cutoff) { return ModeSpace(cutoff, 1); }
  static ModeSpace pair(int cutoff) { return ModeSpace(cutoff, 2); }

  int cutoff() const { return cutoff_; }
  int mode_count() const { return mode_count_; }
  const std::vector<std::string>& labels() const { return labels_; }
  Index mode_dim() const { return cutoff_ + 1; }
  Index dim() const { return mode_count_ == 1 ? mode_dim() : mode_dim() * mode_dim(); }

  Index index(int n1, int n2 = 0) const {
    return mode_count_ == 1 ? n1 : static_cast<Index>(n1) * mode_dim() + n2;
  }

  bool operator==(const ModeSpace& other) const {
    return cutoff_ == other.cutoff_ && mode_count_ == other.mode_count_;
  }

 private:
  int cutoff_;
  int mode_count_;
  std::vector<std::string> labels_;
};

struct ModeOperators {
  Matrix a;
  Matrix a_dag;
  Matrix n;
};

/// Single-mode annihilation matrix, a[n-1, n] = sqrt(n).
inline SparseMatrix single_mode_lowering(int cutoff) {
  SparseMatrix a(cutoff + 1, cutoff + 1);
  std::vector<Eigen::Triplet<cplx>> t;
  for (int n = 1; n <= cutoff; ++n) t.emplace_back(n - 1, n, std::sqrt(double(n)));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

inline SparseMatrix lowering_sparse(const ModeSpace& space, int mode_index) {
  require(mode_index >= 0 && mode_index < space.mode_count(),
          "mode_operators: mode_index " + std::to_string(mode_index) +
              " out of range for a " + std::to_string(space.mode_count()) + "-mode space");
  SparseMatrix a = single_mode_lowering(space.cutoff());
  if (space.mode_count() == 1) return a;
  SparseMatrix id = sparse_identity(space.mode_dim());
  return mode_index == 0 ? kron(a, id) : kron(id, a);
}

inline ModeOperators mode_operators(const ModeSpace& space, int mode_index) {
  Matrix a = Matrix(lowering_sparse(space, mode_index));
  Matrix a_dag = a.adjoint();
  Matrix n = a_dag * a;
  return {std::move(a), std::move(a_dag), std::move(n)};
}

/// Field state: a pure vector or a density matrix over a ModeSpace.
class FieldState {
 public:
  static FieldState pure(const ModeSpace& space, Vector psi) {
    require(psi.size() == space.dim(), "FieldState: vector dimension mismatch");
    const double norm = psi.norm();
    require(std::abs(norm - 1.0) < 1e-10, "FieldState: pure state must have unit norm");
    return FieldState(space, std::move(psi));
  }

  static FieldState mixed(const ModeSpace& space, Matrix rho) {
    require(rho.rows() == space.dim() && rho.cols() == space.dim(),
            "FieldState: density matrix dimension mismatch");
    require(hermiticity_defect(rho) < tol::construction,
            "FieldState: density matrix is not Hermitian");
    require(std::abs(rho.trace() - 1.0) < 1e-10, "FieldState: density matrix trace != 1");
    return FieldState(space, std::move(rho));
  }

  /// Accepts a density matrix with small numerical drift, symmetrizing and
  /// renormalizing it. Used by integrators and averaging.
  static FieldState from_density(const ModeSpace& space, Matrix rho) {
    require(rho.rows() == space.dim() && rho.cols() == space.dim(),
            "FieldState: density matrix dimension mismatch");
    Matrix sym = 0.5 * (rho + rho.adjoint());
    const cplx tr = sym.trace();
    require(std::abs(tr) > 0.0, "FieldState: zero trace");
    sym /= tr.real();
    return FieldState(space, std::move(sym));
  }

  const ModeSpace& space() const { return space_; }
  bool is_pure() const { return std::holds_alternative<Vector>(data_); }
  const Vector& vector() const { return std::get<Vector>(data_); }
  const Matrix& density_matrix() const { return std::get<Matrix>(data_); }

  Matrix density() const {
    if (is_pure()) return vector() * vector().adjoint();
    return density_matrix();
  }

  /// Populations <n|rho|n> in the joint number basis.
  RealVector populations() const {
    if (is_pure()) return vector().cwiseAbs2();
    return density_matrix().diagonal().real();
  }

  cplx trace() const {
    return is_pure() ? cplx(vector().squaredNorm(), 0.0) : density_matrix().trace();
  }

  /// Full validity check; the eigenvalue test is O(dim^3).
  void validate(bool check_positivity = true) const {
    if (is_pure()) {
      require(std::abs(vector().norm() - 1.0) < tol::construction,
              "FieldState: pure state norm deviates from 1");
      return;
    }
    const Matrix& rho = density_matrix();
    require(hermiticity_defect(rho) < tol::construction, "FieldState: not Hermitian");
    require(std::abs(rho.trace() - 1.0) < 1e-10, "FieldState: trace deviates from 1");
    if (check_positivity)
      require(min_eigenvalue(rho) >= -1e-10, "FieldState: negative eigenvalue");
  }

 private:
  FieldState(const ModeSpace& space, Vector psi) : space_(space), data_(std::move(psi)) {}
  FieldState(const ModeSpace& space, Matrix rho) : space_(space), data_(std::move(rho)) {}

  ModeSpace space_;
  std::variant<Vector, Matrix> data_;
};

inline FieldState vacuum(const ModeSpace& space) {
  Vector psi = Vector::Zero(space.dim());
  psi(0) = 1.0;
  return FieldState::pure(space, std::move(psi));
}

inline FieldState fock_state(const ModeSpace& space, int n1, int n2 = 0) {
  require(n1 >= 0 && n1 <= space.cutoff() && n2 >= 0 && n2 <= space.cutoff(),
          "fock_state: occupation outside the truncated space");
  Vector psi = Vector::Zero(space.dim());
  psi(space.index(n1, n2)) = 1.0;
  return FieldState::pure(space, std::move(psi));
}

/// Truncated geometric distribution with mean n_bar before truncation,
/// renormalized over 0..cutoff.
inline RealVector thermal_populations(int cutoff, double n_bar) {
  require(n_bar >= 0.0, "thermal_state: n_bar must be >= 0");
  RealVector c = RealVector::Zero(cutoff + 1);
  const double q = n_bar / (1.0 + n_bar);
  double w = 1.0;
  for (int n = 0; n <= cutoff; ++n) {
    c(n) = w;
    w *= q;
  }
  return c / c.sum();
}

/// Thermal state of every mode in the space, each with mean n_bar.
inline FieldState thermal_state(const ModeSpace& space, double n_bar) {
  RealVector c = thermal_populations(space.cutoff(), n_bar);
  RealVector diag = space.mode_count() == 1 ? c : RealVector(Eigen::kroneckerProduct(c, c));
  Matrix rho = Matrix::Zero(space.dim(), space.dim());
  rho.diagonal() = diag.cast<cplx>();
  return FieldState::from_density(space, std::move(rho));
}

/// Two-mode squeezing parameter xi = r e^{i phase}.
struct SqueezeParams {
  cplx xi{0.0, 0.0};

  static SqueezeParams real(double r) { return SqueezeParams{cplx(r, 0.0)}; }
  /// xi = arctanh(mu), the orientation selected by the Bogoliubov damping
  /// dynamics of the two-step protocol.
  static SqueezeParams from_mu(double mu) {
    require(mu >= 0.0 && mu < 1.0, "SqueezeParams: mu must lie in [0, 1)");
    return real(std::atanh(mu));
  }

  double r() const { return std::abs(xi); }
  double phase() const { return std::arg(xi); }
};

/// Smallest cutoff whose Schmidt tail tanh(r)^(2(cutoff+1)) stays below
/// tail_tolerance (the default leaves a factor 10 margin under the 1e-6
/// accepted by two_mode_squeezed_vacuum).
inline int default_squeeze_cutoff(double r, double tail_tolerance = 1e-7) {
  require(r >= 0.0 && std::isfinite(r), "default_squeeze_cutoff: r must be finite and >= 0");
  if (r == 0.0) return 1;
  const double levels = std::log(tail_tolerance) / (2.0 * std::log(std::tanh(r)));
  return std::max(1, static_cast<int>(std::ceil(levels)) - 1);
}

/// Weight of S^dag(xi)|0,0> above the cutoff, tanh(r)^(2(cutoff+1)).
inline double squeeze_tail_mass(double r, int cutoff) {
  return std::pow(std::tanh(r), 2.0 * (cutoff + 1));
}

/// xi^* a1 a2 - xi a1^dag a2^dag; S(xi) is its exponential.
inline SparseMatrix squeeze_generator(const ModeSpace& space, const SqueezeParams& params) {
  require(space.mode_count() == 2, "squeeze_generator: two-mode space required");
  SparseMatrix a1 = lowering_sparse(space, 0);
  SparseMatrix a2 = lowering_sparse(space, 1);
  SparseMatrix pair_down = a1 * a2;
  SparseMatrix pair_up = SparseMatrix(pair_down.adjoint());
  SparseMatrix g = std::conj(params.xi) * pair_down - params.xi * pair_up;
  g.makeCompressed();
  return g;
}

/// S(xi) = exp(G). G conserves n1 - n2, so the exponential is assembled
/// from small invariant blocks of the Hermitian generator iG.
inline Matrix squeeze_operator(const ModeSpace& space, const SqueezeParams& params) {
  const SparseMatrix h = kI * squeeze_generator(space, params);
  return BlockPropagator(h).unitary(1.0);
}

/// Largest joint dimension for which the squeezed vacuum is taken from the
/// dense exponential; above it the generator is applied by Taylor substeps.
inline constexpr Index kDenseSqueezeDim = 400;

/// S^dag(xi)|0,0>, built by exponentiating the squeeze generator so that the
/// analytic Schmidt form remains an independent check.
inline FieldState two_mode_squeezed_vacuum(const ModeSpace& space, const SqueezeParams& params,
                                           double tail_tolerance = 1e-6) {
  require(space.mode_count() == 2, "two_mode_squeezed_vacuum: two-mode space required");
  const double tail = squeeze_tail_mass(params.r(), space.cutoff());
  require(tail < tail_tolerance,
          "two_mode_squeezed_vacuum: cutoff " + std::to_string(space.cutoff()) +
              " too small for r = " + std::to_string(params.r()) + " (tail mass " +
              std::to_string(tail) + ")");
  Vector e0 = Vector::Zero(space.dim());
  e0(0) = 1.0;
  Vector psi;
  if (space.dim() <= kDenseSqueezeDim) {
    psi = expm(-Matrix(squeeze_generator(space, params))).col(0);
  } else {
    SparseMatrix minus_g = -squeeze_generator(space, params);
    psi = expm_multiply(minus_g, e0);
  }
  psi.normalize();
  return FieldState::pure(space, std::move(psi));
}

/// Bogoliubov lowering operators b_j = S^dag a_j S in closed form,
/// b1 = a1 cosh r - e^{i phase} a2^dag sinh r (and 1 <-> 2).
struct BogoliubovOperators {
  SparseMatrix b1;
  SparseMatrix b2;
};

inline BogoliubovOperators bogoliubov_operators(const ModeSpace& space,
                                                const SqueezeParams& params) {
  require(space.mode_count() == 2, "bogoliubov_operators: two-mode space required");
  const double r = params.r();
  const cplx e = std::exp(kI * params.phase());
  SparseMatrix a1 = lowering_sparse(space, 0);
  SparseMatrix a2 = lowering_sparse(space, 1);
  SparseMatrix a1d = SparseMatrix(a1.adjoint());
  SparseMatrix a2d = SparseMatrix(a2.adjoint());
  SparseMatrix b1 = std::cosh(r) * a1 - (e * std::sinh(r)) * a2d;
  SparseMatrix b2 = std::cosh(r) * a2 - (e * std::sinh(r)) * a1d;
  b1.makeCompressed();
  b2.makeCompressed();
  return {std::move(b1), std::move(b2)};
}

/// Reduced single-mode state of a two-mode state.
inline FieldState partial_trace(const FieldState& state, int keep) {
  const ModeSpace& space = state.space();
  require(space.mode_count() == 2, "partial_trace: two-mode state required");
  require(keep == 0 || keep == 1, "partial_trace: keep must be 0 or 1");
  const Index d = space.mode_dim();
  Matrix reduced = Matrix::Zero(d, d);
  if (state.is_pure()) {
    // psi as a d x d matrix M[n1, n2]; rho_1 = M M^dag, rho_2 = M^T conj(M).
    Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        state.vector().data(), d, d);
    reduced = keep == 0 ? Matrix(m * m.adjoint()) : Matrix(m.transpose() * m.conjugate());
  } else {
    const Matrix& rho = state.density_matrix();
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) {
        cplx sum = 0.0;
        for (Index k = 0; k < d; ++k)
          sum += keep == 0 ? rho(i * d + k, j * d + k) : rho(k * d + i, k * d + j);
        reduced(i, j) = sum;
      }
  }
  return FieldState::from_density(ModeSpace::single(space.cutoff()), std::move(reduced));
}

template <typename Op>
cplx expectation(const Op& op, const FieldState& state) {
  if (state.is_pure()) return state.vector().dot(op * state.vector());
  return (op * state.density_matrix()).trace();
}

inline double photon_number(const FieldState& state, int mode = 0) {
  SparseMatrix a = lowering_sparse(state.space(), mode);
  SparseMatrix n = SparseMatrix(a.adjoint()) * a;
  return expectation(n, state).real();
}

/// <psi|rho|psi> for a pure target.
inline double fidelity(const FieldState& target, const FieldState& state) {
  require(target.is_pure(), "fidelity: target must be a pure state");
  require(target.space() == state.space(), "fidelity: space mismatch");
  const Vector& psi = target.vector();
  if (state.is_pure()) return std::norm(psi.dot(state.vector()));
  return psi.dot(state.density_matrix() * psi).real();
}

inline double trace_distance(const FieldState& a, const FieldState& b) {
  require(a.space() == b.space(), "trace_distance: space mismatch");
  Matrix diff = a.density() - b.density();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(diff, Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

}  // namespace qreservoir
