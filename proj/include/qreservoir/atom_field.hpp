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

#include <variant>
#include <vector>

namespace qreservoir {

// Atom levels. Joint atom (x) field states are stored atom-major:
// index = level * field_dim + field_index. Level 0 is |g> in the bare basis
// and |+> in the dressed basis; level 1 is |e> or |->.
enum class AtomBasis { bare, dressed };

struct AtomState {
  AtomBasis basis = AtomBasis::bare;
  Eigen::Vector2cd amplitudes{1.0, 0.0};

  static AtomState ground() { return {AtomBasis::bare, {1.0, 0.0}}; }
  static AtomState excited() { return {AtomBasis::bare, {0.0, 1.0}}; }
  static AtomState plus() { return {AtomBasis::dressed, {1.0, 0.0}}; }
  static AtomState minus() { return {AtomBasis::dressed, {0.0, 1.0}}; }
};

/// Pure or mixed state of one two-level atom and the field.
class JointState {
 public:
  static JointState product(const AtomState& atom, const FieldState& field) {
    require(std::abs(atom.amplitudes.norm() - 1.0) < tol::construction,
            "JointState: atom amplitudes must have unit norm");
    if (field.is_pure()) {
      Vector psi(2 * field.space().dim());
      psi << atom.amplitudes(0) * field.vector(), atom.amplitudes(1) * field.vector();
      return JointState(field.space(), std::move(psi));
    }
    Matrix atom_rho = atom.amplitudes * atom.amplitudes.adjoint();
    return JointState(field.space(), kron(atom_rho, field.density_matrix()));
  }

  static JointState pure(const ModeSpace& field_space, Vector psi) {
    require(psi.size() == 2 * field_space.dim(), "JointState: dimension mismatch");
    return JointState(field_space, std::move(psi));
  }
  static JointState mixed(const ModeSpace& field_space, Matrix rho) {
    require(rho.rows() == 2 * field_space.dim() && rho.cols() == rho.rows(),
            "JointState: dimension mismatch");
    return JointState(field_space, std::move(rho));
  }

  const ModeSpace& field_space() const { return space_; }
  bool is_pure() const { return std::holds_alternative<Vector>(data_); }
  const Vector& vector() const { return std::get<Vector>(data_); }
  const Matrix& density_matrix() const { return std::get<Matrix>(data_); }
  Matrix density() const {
    return is_pure() ? Matrix(vector() * vector().adjoint()) : density_matrix();
  }

  FieldState trace_out_atom() const {
    const Index d = space_.dim();
    if (is_pure()) {
      const Vector& v = vector();
      Matrix rho = v.head(d) * v.head(d).adjoint() + v.tail(d) * v.tail(d).adjoint();
      return FieldState::from_density(space_, std::move(rho));
    }
    const Matrix& r = density_matrix();
    Matrix rho = r.topLeftCorner(d, d) + r.bottomRightCorner(d, d);
    return FieldState::from_density(space_, std::move(rho));
  }

 private:
  JointState(const ModeSpace& s, Vector v) : space_(s), data_(std::move(v)) {}
  JointState(const ModeSpace& s, Matrix m) : space_(s), data_(std::move(m)) {}
  ModeSpace space_;
  std::variant<Vector, Matrix> data_;
};

// ---------------------------------------------------------------------------
// Resonant Jaynes-Cummings kick

/// In-place resonant JC kick with Rabi angle phi on a joint (bare atom) x
/// single-mode vector:
///   |g,n>   -> cos(phi sqrt n) |g,n>   + i sin(phi sqrt n) |e,n-1>
///   |e,n-1> -> cos(phi sqrt n) |e,n-1> + i sin(phi sqrt n) |g,n>
/// |g,0> and the truncation edge |e,N> are invariant, which makes the map
/// exactly unitary on the truncated space. Equal to exp(+i phi (a^dag s + a s^dag)).
inline void apply_jc_kick(double phi, int cutoff, Vector& joint) {
  const Index d = cutoff + 1;
  for (int n = 1; n <= cutoff; ++n) {
    const double arg = phi * std::sqrt(double(n));
    const double c = std::cos(arg), s = std::sin(arg);
    const cplx x = joint(n), y = joint(d + n - 1);
    joint(n) = c * x + kI * s * y;
    joint(d + n - 1) = c * y + kI * s * x;
  }
}

inline Matrix jc_unitary(double phi, int cutoff) {
  const Index d = cutoff + 1;
  Matrix u = Matrix::Identity(2 * d, 2 * d);
  for (int n = 1; n <= cutoff; ++n) {
    const double arg = phi * std::sqrt(double(n));
    u(n, n) = std::cos(arg);
    u(d + n - 1, d + n - 1) = std::cos(arg);
    u(n, d + n - 1) = kI * std::sin(arg);
    u(d + n - 1, n) = kI * std::sin(arg);
  }
  return u;
}

/// a^dag sigma + a sigma^dag on atom (x) single mode, sigma = |g><e|.
inline Matrix jc_hamiltonian(int cutoff) {
  Matrix sigma = Matrix::Zero(2, 2);
  sigma(0, 1) = 1.0;
  Matrix a = Matrix(single_mode_lowering(cutoff));
  return kron(sigma, Matrix(a.adjoint())) + kron(Matrix(sigma.adjoint()), a);
}

inline JointState jc_step(double phi, const JointState& state) {
  require(phi >= 0.0, "jc_step: phi must be >= 0");
  require(state.field_space().mode_count() == 1, "jc_step: single-mode field required");
  const int cutoff = state.field_space().cutoff();
  if (state.is_pure()) {
    Vector psi = state.vector();
    apply_jc_kick(phi, cutoff, psi);
    return JointState::pure(state.field_space(), std::move(psi));
  }
  Matrix u = jc_unitary(phi, cutoff);
  return JointState::mixed(state.field_space(), u * state.density_matrix() * u.adjoint());
}

// ---------------------------------------------------------------------------
// Classical drive, dressed states and the squeezing map

/// Classical drive and cavity detunings, all angular frequencies (rad/s).
struct DriveConfig {
  double omega = 0.0;    // Rabi strength of the classical field
  double delta = 0.0;    // atom-drive detuning omega_L - omega_0
  double delta_1 = 0.0;  // omega_L - omega_1
  double delta_2 = 0.0;  // omega_L - omega_2
  double g = 0.0;        // atom-mode coupling, equal for both modes
};

struct DressedParams {
  double d = 0.0;
  double theta = 0.0;
  double mu = 0.0;
  double r_mu = 0.0;
  double omega_b = 0.0;
};

struct DressedBasis {
  DressedParams params;
  Eigen::Vector2cd plus;   // bare (g, e) coordinates
  Eigen::Vector2cd minus;
  double energy_plus = 0.0;
  double energy_minus = 0.0;

  /// Columns |+>, |->: maps dressed coordinates to bare ones.
  Matrix to_bare() const {
    Matrix r(2, 2);
    r.col(0) = plus;
    r.col(1) = minus;
    return r;
  }
};

/// -Delta sigma^dag sigma + Omega (sigma^dag + sigma) in the bare (g, e) basis.
inline Matrix drive_hamiltonian(const DriveConfig& drive) {
  Matrix h = Matrix::Zero(2, 2);
  h(1, 1) = -drive.delta;
  h(0, 1) = drive.omega;
  h(1, 0) = drive.omega;
  return h;
}

/// d - Delta with d = hypot(Delta, 2 Omega), without cancellation for a weak
/// drive above resonance.
inline double splitting_excess(const DriveConfig& drive) {
  const double d = std::hypot(drive.delta, 2.0 * drive.omega);
  return drive.delta > 0.0 ? 4.0 * drive.omega * drive.omega / (d + drive.delta) : d - drive.delta;
}

inline double tan_theta(const DriveConfig& drive) {
  return 2.0 * std::abs(drive.omega) / splitting_excess(drive);
}

inline double mu_from_tan(double t) {
  const double t2 = t * t;
  return t2 < 1.0 ? t2 : 1.0 / t2;
}

/// Dressed splitting, mixing angle and eigenvectors of the drive Hamiltonian.
/// The e-component carries sgn(Omega) so that H|+-> = -(Delta -+ d)/2 |+->
/// holds for either sign of Omega.
inline DressedBasis dressed_basis(const DriveConfig& drive) {
  require(drive.omega != 0.0, "dressed_basis: Omega = 0 gives no dressing");
  DressedBasis out;
  const double d = std::hypot(drive.delta, 2.0 * drive.omega);
  const double theta = std::atan2(2.0 * std::abs(drive.omega), splitting_excess(drive));
  const double sgn = drive.omega > 0.0 ? 1.0 : -1.0;
  const double s = std::sin(theta), c = std::cos(theta);
  out.plus = Eigen::Vector2cd(s, sgn * c);
  out.minus = Eigen::Vector2cd(c, -sgn * s);
  out.energy_plus = splitting_excess(drive) / 2.0;
  const double below = drive.delta < 0.0 ? 4.0 * drive.omega * drive.omega / (d - drive.delta) : d + drive.delta;
  out.energy_minus = -below / 2.0;

  const Matrix h = drive_hamiltonian(drive);
  const double scale = std::max({std::abs(drive.delta), std::abs(drive.omega), 1e-300});
  const double residual =
      std::max((h * out.plus - out.energy_plus * out.plus).norm(),
               (h * out.minus - out.energy_minus * out.minus).norm());
  require(residual <= 1e-12 * scale, "dressed_basis: eigen-relation check failed");

  out.params.d = d;
  out.params.theta = theta;
  out.params.mu = mu_from_tan(tan_theta(drive));
  return out;
}

inline double omega_b_from_mu(double g, double mu) {
  return g * std::sqrt((1.0 - mu) / (1.0 + mu));
}

/// Squeezing ratio mu, r_mu = arctanh(mu) and the effective coupling Omega_b.
inline DressedParams bogoliubov_params(const DriveConfig& drive) {
  DressedParams p = dressed_basis(drive).params;
  require(p.mu < 1.0 - 1e-12, "bogoliubov_params: |tan theta| = 1 gives mu = 1 (infinite squeezing)");
  p.r_mu = std::atanh(p.mu);
  p.omega_b = omega_b_from_mu(drive.g, p.mu);
  return p;
}

/// Drive realizing squeezing ratio mu for a given Omega > 0 and sign of the
/// detuning, with the cavity detunings set to delta_1 = +d, delta_2 = -d.
/// Delta/Omega = 1/sqrt(mu) - sqrt(mu) for Delta > 0 and the negative of it
/// for Delta < 0.
inline DriveConfig drive_for_mu(double mu, double omega, double g, int delta_sign) {
  require(mu > 0.0 && mu < 1.0, "drive_for_mu: mu must lie in (0, 1)");
  require(omega > 0.0, "drive_for_mu: Omega must be positive");
  require(delta_sign == 1 || delta_sign == -1, "drive_for_mu: delta_sign must be +1 or -1");
  const double ratio = delta_sign * (1.0 / std::sqrt(mu) - std::sqrt(mu));
  DriveConfig drive;
  drive.omega = omega;
  drive.delta = ratio * omega;
  drive.g = g;
  const double d = std::hypot(drive.delta, 2.0 * omega);
  drive.delta_1 = d;
  drive.delta_2 = -d;
  return drive;
}

// ---------------------------------------------------------------------------
// Atom-field Hamiltonians on dressed atom (x) two cavity modes

enum class AtomOp { pi_z, pi_plus, pi_minus };

/// One product term coefficient * atom_op (x) (a_mode or a_mode^dag).
struct CouplingTerm {
  int mode = 0;
  AtomOp atom = AtomOp::pi_z;
  bool creation = false;
  double coefficient = 0.0;
};

inline Matrix atom_operator(AtomOp op) {
  Matrix m = Matrix::Zero(2, 2);
  switch (op) {
    case AtomOp::pi_z:
      m(0, 0) = 1.0;
      m(1, 1) = -1.0;
      break;
    case AtomOp::pi_plus:  // |+><-|
      m(0, 1) = 1.0;
      break;
    case AtomOp::pi_minus:  // |-><+|
      m(1, 0) = 1.0;
      break;
  }
  return m;
}

/// The atom-mode coupling g (sigma^dag a_j + sigma a_j^dag) rewritten in the
/// dressed basis, six terms per mode:
///   g [ sc pi_z (a + a^dag) + c^2 (pi+ a + a^dag pi-) - s^2 (pi- a + pi+ a^dag) ]
/// (overall factor sgn(Omega)).
inline std::vector<CouplingTerm> dressed_coupling_terms(const DriveConfig& drive) {
  const DressedBasis basis = dressed_basis(drive);
  const double s = std::sin(basis.params.theta), c = std::cos(basis.params.theta);
  const double g = drive.g * (drive.omega > 0.0 ? 1.0 : -1.0);
  std::vector<CouplingTerm> terms;
  for (int mode = 0; mode < 2; ++mode) {
    terms.push_back({mode, AtomOp::pi_z, false, g * s * c});
    terms.push_back({mode, AtomOp::pi_z, true, g * s * c});
    terms.push_back({mode, AtomOp::pi_plus, false, g * c * c});
    terms.push_back({mode, AtomOp::pi_minus, true, g * c * c});
    terms.push_back({mode, AtomOp::pi_minus, false, -g * s * s});
    terms.push_back({mode, AtomOp::pi_plus, true, -g * s * s});
  }
  return terms;
}

/// Oscillation frequency of a term in the interaction picture of
/// d pi_z / 2 - sum_j delta_j a_j^dag a_j.
inline double rotation_frequency(const CouplingTerm& term, const DriveConfig& drive) {
  const double d = dressed_basis(drive).params.d;
  double f = term.atom == AtomOp::pi_plus ? d : term.atom == AtomOp::pi_minus ? -d : 0.0;
  const double delta_j = term.mode == 0 ? drive.delta_1 : drive.delta_2;
  f += term.creation ? -delta_j : delta_j;
  return f;
}

/// Rotating-wave projection: keep the terms that are resonant in the
/// interaction picture, drop the ones rotating at multiples of d.
inline std::vector<CouplingTerm> rotating_wave(const std::vector<CouplingTerm>& terms,
                                               const DriveConfig& drive,
                                               double relative_tolerance = 1e-9) {
  const double d = dressed_basis(drive).params.d;
  std::vector<CouplingTerm> kept;
  for (const auto& t : terms)
    if (std::abs(rotation_frequency(t, drive)) <= relative_tolerance * d) kept.push_back(t);
  return kept;
}

inline SparseMatrix assemble(const std::vector<CouplingTerm>& terms, const ModeSpace& space) {
  require(space.mode_count() == 2, "assemble: two-mode space required");
  SparseMatrix a[2] = {lowering_sparse(space, 0), lowering_sparse(space, 1)};
  SparseMatrix h(2 * space.dim(), 2 * space.dim());
  for (const auto& t : terms) {
    SparseMatrix field = t.creation ? SparseMatrix(a[t.mode].adjoint()) : a[t.mode];
    h += t.coefficient * kron(to_sparse(atom_operator(t.atom)), field);
  }
  h.prune(cplx(0.0));
  h.makeCompressed();
  return h;
}

/// Full rotating-frame Hamiltonian in the bare atom basis:
/// -Delta s^dag s + Omega (s^dag + s) - sum_j delta_j n_j + g sum_j (s^dag a_j + s a_j^dag).
inline Matrix rotating_frame_hamiltonian(const DriveConfig& drive, const ModeSpace& space) {
  require(space.mode_count() == 2, "rotating_frame_hamiltonian: two-mode space required");
  const Matrix id_f = Matrix::Identity(space.dim(), space.dim());
  const Matrix id_a = Matrix::Identity(2, 2);
  Matrix sigma = Matrix::Zero(2, 2);
  sigma(0, 1) = 1.0;
  Matrix h = kron(drive_hamiltonian(drive), id_f);
  const double deltas[2] = {drive.delta_1, drive.delta_2};
  for (int j = 0; j < 2; ++j) {
    ModeOperators ops = mode_operators(space, j);
    h -= deltas[j] * kron(id_a, ops.n);
    h += drive.g * (kron(Matrix(sigma.adjoint()), ops.a) + kron(sigma, ops.a_dag));
  }
  return h;
}

/// The same Hamiltonian written in the dressed atom basis:
/// -Delta/2 + d pi_z/2 - sum_j delta_j n_j + dressed coupling terms.
inline Matrix dressed_frame_hamiltonian(const DriveConfig& drive, const ModeSpace& space) {
  const DressedBasis basis = dressed_basis(drive);
  const Index dim = 2 * space.dim();
  Matrix h = Matrix::Identity(dim, dim) * (-drive.delta / 2.0);
  h += (basis.params.d / 2.0) * kron(atom_operator(AtomOp::pi_z), Matrix::Identity(space.dim(), space.dim()));
  const double deltas[2] = {drive.delta_1, drive.delta_2};
  for (int j = 0; j < 2; ++j)
    h -= deltas[j] * kron(Matrix::Identity(2, 2), mode_operators(space, j).n);
  h += Matrix(assemble(dressed_coupling_terms(drive), space));
  return h;
}

enum class DampedMode { b1, b2 };

struct EffectiveInteraction {
  DampedMode damped = DampedMode::b1;
  DressedParams params;
  SparseMatrix h;  // resonant coupling on dressed atom (x) two modes, rad/s
  bool weak_coupling_warning = false;
};

/// Resonant part of the coupling for delta_1 = +d, delta_2 = -d. For Delta > 0
/// it equals -Omega_b (b1 pi- + b1^dag pi+), damping b1 with atoms in |+>;
/// for Delta < 0 it equals Omega_b (b2^dag pi- + b2 pi+), damping b2 with
/// atoms in |->.
inline EffectiveInteraction effective_interaction(const DriveConfig& drive, const ModeSpace& space) {
  require(drive.delta != 0.0, "effective_interaction: Delta = 0 is ambiguous");
  EffectiveInteraction out;
  out.params = bogoliubov_params(drive);
  const double d = out.params.d;
  require(std::abs(drive.delta_1 - d) <= 1e-9 * d && std::abs(drive.delta_2 + d) <= 1e-9 * d,
          "effective_interaction: requires delta_1 = +d and delta_2 = -d");
  out.weak_coupling_warning = std::abs(drive.g) / d > 0.1;
  out.damped = drive.delta > 0.0 ? DampedMode::b1 : DampedMode::b2;
  out.h = assemble(rotating_wave(dressed_coupling_terms(drive), drive), space);
  return out;
}

/// d (pi_z/2 - n1 + n2), the free part accompanying the resonant coupling.
inline SparseMatrix effective_free_hamiltonian(double d, const ModeSpace& space) {
  SparseMatrix n1 = SparseMatrix(lowering_sparse(space, 0).adjoint()) * lowering_sparse(space, 0);
  SparseMatrix n2 = SparseMatrix(lowering_sparse(space, 1).adjoint()) * lowering_sparse(space, 1);
  SparseMatrix h = (d / 2.0) * kron(to_sparse(atom_operator(AtomOp::pi_z)), sparse_identity(space.dim()));
  h += d * kron(sparse_identity(2), SparseMatrix(n2 - n1));
  h.makeCompressed();
  return h;
}

/// JC-form coupling written directly with Bogoliubov operators.
inline SparseMatrix bogoliubov_interaction(DampedMode mode, double omega_b, const ModeSpace& space,
                                           const SqueezeParams& squeeze) {
  BogoliubovOperators b = bogoliubov_operators(space, squeeze);
  SparseMatrix pp = to_sparse(atom_operator(AtomOp::pi_plus));
  SparseMatrix pm = to_sparse(atom_operator(AtomOp::pi_minus));
  SparseMatrix h;
  if (mode == DampedMode::b1) {
    h = -omega_b * (kron(pm, b.b1) + kron(pp, SparseMatrix(b.b1.adjoint())));
  } else {
    h = omega_b * (kron(pm, SparseMatrix(b.b2.adjoint())) + kron(pp, b.b2));
  }
  h.prune(cplx(0.0));
  h.makeCompressed();
  return h;
}

}  // namespace qreservoir
