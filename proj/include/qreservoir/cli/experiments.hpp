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

#include "qreservoir/cli/config.hpp"
#include "qreservoir/two_cavity.hpp"

#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#ifndef QRESERVOIR_VERSION
#define QRESERVOIR_VERSION "0.0.0"
#endif

namespace qreservoir::cli {

inline constexpr int kManifestVersion = 1;

// ---------------------------------------------------------------------------
// Output containers

/// Numeric table rendered as CSV with "%.16e" values and '\n' line ends.
/// Columns listed as integer are rendered without exponent.
class Table {
 public:
  Table() = default;
  Table(std::vector<std::string> columns, std::set<std::string> integer_columns = {})
      : columns_(std::move(columns)), integer_(std::move(integer_columns)) {}

  void add(std::vector<double> row) {
    require(row.size() == columns_.size(), "Table: row width does not match the header");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& columns() const { return columns_; }
  size_t size() const { return rows_.size(); }
  const std::vector<double>& row(size_t i) const { return rows_.at(i); }

  size_t index(const std::string& column) const {
    const auto it = std::find(columns_.begin(), columns_.end(), column);
    require(it != columns_.end(), "Table: no column named " + column);
    return static_cast<size_t>(it - columns_.begin());
  }

  std::vector<double> column(const std::string& name) const {
    const size_t k = index(name);
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r[k]);
    return out;
  }

  std::string csv() const {
    std::string out;
    for (size_t k = 0; k < columns_.size(); ++k) out += (k ? "," : "") + columns_[k];
    out += '\n';
    for (const auto& r : rows_) {
      for (size_t k = 0; k < r.size(); ++k) {
        if (k) out += ',';
        out += integer_.count(columns_[k]) ? format_integer(r[k]) : format(r[k]);
      }
      out += '\n';
    }
    return out;
  }

  static std::string format(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
  }

 private:
  static std::string format_integer(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(v)));
    return buf;
  }

  std::vector<std::string> columns_;
  std::set<std::string> integer_;
  std::vector<std::vector<double>> rows_;
};

struct Output {
  std::vector<std::pair<std::string, Table>> tables;  // name -> table; file is <prefix>_<name>.csv
  json summary = json::object();
  std::vector<std::string> warnings;

  const Table& table(const std::string& name) const {
    for (const auto& [n, t] : tables)
      if (n == name) return t;
    throw Error("Output: no table named " + name);
  }
  bool has_table(const std::string& name) const {
    for (const auto& [n, t] : tables)
      if (n == name) return true;
    return false;
  }
};

/// A validated experiment ready to run.
struct Plan {
  std::string experiment;
  std::uint64_t seed = 0;
  json resolved;                   // full config with defaults, as recorded in the manifest
  std::optional<std::string> output;  // prefix from the config file, if any
  std::function<Output(std::uint64_t seed, int threads)> run;
};

namespace detail {

/// Independent master seed per case of a multi-case experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Smallest cutoff keeping the thermal tail above it below 1e-12.
inline int thermal_cutoff(double n_bar) {
  if (n_bar <= 0.0) return 1;
  const double q = n_bar / (1.0 + n_bar);
  return static_cast<int>(std::ceil(std::log(1e-12) / std::log(q)));
}

inline RabiAngleDist read_angle(Reader r) {
  const std::string kind = r.choice("kind", {"gaussian", "delta", "broad"}, "gaussian");
  RabiAngleDist d;
  if (kind == "broad") {
    d = RabiAngleDist::broad();
  } else {
    const double phi0 = r.angle("phi0");
    if (kind == "delta") {
      d = RabiAngleDist::delta(phi0);
    } else {
      const double sigma = r.has("sigma") ? r.angle("sigma") : r.number("sigma_rel", 0.05) * phi0;
      d = RabiAngleDist::gaussian(phi0, sigma);
    }
  }
  r.check([&] { d.validate(); });
  r.finish();
  return d;
}

/// Run length given as "duration" (time), "gamma_t" (units of 1/gamma) or
/// "rate_t" (units of 1/rate); exactly one must be present.
inline double read_duration(Reader& r, double gamma, double rate, bool allow_gamma = true) {
  std::vector<std::string> keys = {"duration", "rate_t"};
  if (allow_gamma) keys.push_back("gamma_t");
  if (r.count_present(keys) != 1) {
    r.fail(r.path() + ": exactly one of " + std::string(allow_gamma ? "duration, gamma_t, rate_t" : "duration, rate_t") +
           " is required");
    return 1.0;
  }
  double t = 0.0;
  if (r.has("duration")) t = r.time("duration");
  else if (r.has("rate_t")) t = rate > 0.0 ? r.number("rate_t") / rate : 0.0;
  else t = gamma > 0.0 ? r.number("gamma_t") / gamma : 0.0;
  r.require_that(t > 0.0 && std::isfinite(t), "duration", "must resolve to a positive time");
  return t;
}

inline ProtocolTarget read_target(Reader r) {
  ProtocolTarget target;
  if (r.count_present({"n_inf", "fidelity"}) != 1) {
    r.fail(r.path() + ": exactly one of n_inf, fidelity is required");
  } else if (r.has("n_inf")) {
    target = {ProtocolTarget::Kind::n_inf, r.number("n_inf")};
  } else {
    target = {ProtocolTarget::Kind::fidelity, r.number("fidelity")};
  }
  r.check([&] { target.residual_occupation(); });
  r.finish();
  return target;
}

inline FieldState two_mode_thermal(const ModeSpace& space, double n_th) {
  if (n_th == 0.0) return vacuum(space);
  const RealVector p = thermal_populations(space.cutoff(), n_th);
  const Matrix single = p.cast<cplx>().asDiagonal();
  return FieldState::mixed(space, kron(single, single));
}

inline Table epr_table(const EprSeries& s, const std::vector<double>& product_law = {}) {
  std::vector<std::string> cols = {"t", "nb1", "nb1_se", "nb2", "nb2_se", "fidelity", "fidelity_se"};
  if (!product_law.empty()) cols.push_back("product_law_fidelity");
  Table t(cols);
  for (size_t i = 0; i < s.times.size(); ++i) {
    std::vector<double> row = {s.times[i], s.nb1[i], s.nb1_se[i], s.nb2[i], s.nb2_se[i], s.fidelity[i], s.fidelity_se[i]};
    if (!product_law.empty()) row.push_back(product_law[i]);
    t.add(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// cool: single-cavity cooling or thermalization by a ground/excited beam

struct InitialSpec {
  enum class Kind { thermal, fock } kind = Kind::thermal;
  double n_bar = 0.0;
  int fock = 0;
};

inline std::function<Output(std::uint64_t, int)> parse_cool(Reader& phys, Reader& num) {
  const std::string regime = phys.choice("regime", {"weak", "strong"}, "weak");
  BeamConfig beam;
  beam.rate_g = phys.number("rate");
  beam.ratio_R = phys.number("ratio_R", 0.0);
  beam.angle = read_angle(phys.child("angle", true));
  beam.transit_time = phys.time("transit_time", 0.0);
  phys.check([&] { beam.validate(); });
  phys.require_that(beam.rate_g > 0.0, "rate", "must be > 0");

  std::vector<InitialSpec> initial;
  for (Reader r : phys.one_or_many("initial")) {
    InitialSpec spec;
    if (r.count_present({"n_bar", "mu", "fock"}) != 1) {
      r.fail(r.path() + ": exactly one of n_bar, mu, fock is required");
    } else if (r.has("n_bar")) {
      spec.n_bar = r.number("n_bar");
      r.require_that(spec.n_bar >= 0.0, "n_bar", "must be >= 0");
    } else if (r.has("mu")) {
      const double mu = r.number("mu");
      r.require_that(mu >= 0.0 && mu < 1.0, "mu", "must lie in [0, 1)");
      if (mu >= 0.0 && mu < 1.0) spec.n_bar = mu * mu / (1.0 - mu * mu);
    } else {
      spec.kind = InitialSpec::Kind::fock;
      spec.fock = static_cast<int>(r.integer("fock"));
      r.require_that(spec.fock >= 0, "fock", "must be >= 0");
    }
    r.finish();
    initial.push_back(spec);
  }

  const double mean_angle = beam.angle.kind == AngleKind::broad || beam.angle.phi0 > 0.0 ? beam.angle.mean() : 0.0;
  const double gamma = weak_coupling_rate(beam.rate_g, mean_angle);
  const double duration = read_duration(phys, gamma, beam.rate_g, regime == "weak");

  const std::vector<std::string> allowed =
      regime == "weak" ? std::vector<std::string>{"lindblad", "monte_carlo", "coarse_grained"}
                       : std::vector<std::string>{"diagonal", "monte_carlo"};
  const auto backends = num.choices("backends", allowed, {allowed.front()});
  if (regime == "strong") phys.require_that(beam.ratio_R == 0.0, "ratio_R", "must be 0 in the strong regime");

  int auto_cutoff = 8;
  const double steady = beam.ratio_R < 1.0 ? beam.ratio_R / (1.0 - beam.ratio_R) : 0.0;
  auto_cutoff = std::max(auto_cutoff, detail::thermal_cutoff(steady));
  for (const auto& s : initial)
    auto_cutoff = std::max(auto_cutoff, s.kind == InitialSpec::Kind::fock ? s.fock + 1 : detail::thermal_cutoff(s.n_bar));
  const int cutoff = static_cast<int>(num.integer("cutoff", auto_cutoff));
  num.require_that(cutoff >= 1, "cutoff", "must be >= 1");
  for (const auto& s : initial)
    if (s.kind == InitialSpec::Kind::fock)
      num.require_that(s.fock < cutoff, "cutoff", "must exceed every initial Fock number");
  const int points = static_cast<int>(num.integer("sample_points", 21));
  num.require_that(points >= 2, "sample_points", "must be >= 2");
  const bool uses_mc = std::find(backends.begin(), backends.end(), "monte_carlo") != backends.end();
  const int n_traj = static_cast<int>(num.integer("n_traj", 1000));
  if (uses_mc) num.require_that(n_traj >= 2, "n_traj", "must be >= 2");
  const double coarse_dt = num.time("coarse_dt", beam.total_rate() > 0.0 ? 0.01 / beam.total_rate() : 1.0);
  if (std::find(backends.begin(), backends.end(), "coarse_grained") != backends.end())
    num.require_that(coarse_dt > 0.0 && coarse_dt * beam.total_rate() <= 1.0, "coarse_dt",
                     "must satisfy 0 < coarse_dt and rate (1 + R) coarse_dt <= 1");
  const bool half = num.choice("bn_substitution", {"none", "half"}, "none") == "half";
  if (half) num.require_that(regime == "strong", "bn_substitution", "applies to the strong regime only");

  double largest_occupation = steady;
  for (const auto& s : initial)
    largest_occupation = std::max(largest_occupation, s.kind == InitialSpec::Kind::fock ? double(s.fock) : s.n_bar);

  return [=](std::uint64_t seed, int threads) {
    Output out;
    const ModeSpace space = ModeSpace::single(cutoff);
    const std::vector<double> times = uniform_times(duration, points);
    const double gamma_up = beam.ratio_R * gamma;
    out.warnings = beam.warnings();
    if (regime == "weak" && mean_angle * mean_angle * largest_occupation > 0.1)
      out.warnings.push_back("phi0^2 n_bar is not small; the weak-coupling rate equation may be inaccurate");

    auto make_state = [&](const InitialSpec& s) {
      return s.kind == InitialSpec::Kind::fock ? fock_state(space, s.fock) : thermal_state(space, s.n_bar);
    };
    // Closed-form vacuum population, NaN where none applies.
    auto closed_form = [&](const InitialSpec& s, const FieldState& st, double t) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      if (regime == "weak") {
        if (s.kind == InitialSpec::Kind::thermal) {
          const double net = gamma - gamma_up;
          const double n = net != 0.0 ? gamma_up / net + (s.n_bar - gamma_up / net) * std::exp(-net * t)
                                      : s.n_bar + gamma_up * t;
          return 1.0 / (1.0 + n);
        }
        if (gamma_up == 0.0) return vacuum_fidelity_series(t, st.populations(), gamma).value;
        return nan;
      }
      if (!half) return nan;
      if (s.kind == InitialSpec::Kind::thermal) {
        const double mu = std::sqrt(s.n_bar / (1.0 + s.n_bar));
        return fidelity_sc_thermal(t, mu, beam.rate_g);
      }
      return fidelity_sc(t, st.populations(), beam.rate_g);
    };

    json summary = json::object();
    if (regime == "weak") {
      summary["gamma"] = gamma;
      summary["gamma_excited"] = gamma_up;
    }
    summary["cutoff"] = cutoff;
    if (beam.ratio_R < 1.0) summary["steady_occupation_expected"] = thermal_steady_occupation(beam.ratio_R);
    if (beam.ratio_R > 0.0 && beam.ratio_R < 1.0) summary["effective_temperature"] = effective_temperature(beam.ratio_R);
    // Largest |B_n - 1/2| over n >= 1 for the configured angle law.
    if (half) {
      double bound = 0.5;
      if (beam.angle.kind == AngleKind::gaussian) bound = 0.5 * std::exp(-2.0 * beam.angle.sigma * beam.angle.sigma);
      if (beam.angle.kind == AngleKind::broad) bound = 1.0 / (8.0 * kPi);
      summary["bn_substitution_bound"] = bound;
    }

    const RealVector levels = RealVector::LinSpaced(cutoff + 1, 0.0, cutoff);
    for (const auto& backend : backends) {
      json bs = json::object();
      double max_error = 0.0;
      std::vector<double> final_photons, final_photons_se;
      if (backend == "lindblad") {
        Table t({"case", "t", "vacuum_population", "mean_photons", "vacuum_closed_form", "abs_error"}, {"case"});
        const DampingChannel ch{lowering_sparse(space, 0), gamma, gamma_up};
        const LindbladIntegrator integ(space, {ch});
        for (size_t k = 0; k < initial.size(); ++k) {
          const FieldState st = make_state(initial[k]);
          double last = 0.0;
          integ.run(st, times, [&](double time, const Matrix& rho) {
            const double p0 = rho(0, 0).real();
            const double n = levels.dot(rho.diagonal().real());
            const double cf = closed_form(initial[k], st, time);
            if (!std::isnan(cf)) max_error = std::max(max_error, std::abs(p0 - cf));
            t.add({double(k), time, p0, n, cf, std::abs(p0 - cf)});
            last = n;
          });
          final_photons.push_back(last);
        }
        out.tables.emplace_back("cool_lindblad", std::move(t));
      } else if (backend == "coarse_grained") {
        Table t({"case", "t", "vacuum_population", "mean_photons", "vacuum_closed_form", "abs_error"}, {"case"});
        const CoarseGrainedMap map(beam, cutoff);
        for (size_t k = 0; k < initial.size(); ++k) {
          const FieldState st0 = make_state(initial[k]);
          FieldState st = st0;
          double now = 0.0;
          for (double target : times) {
            while (target - now > 1e-12 * std::max(1.0, target)) {
              const double h = std::min(coarse_dt, target - now);
              st = map.step(st, h);
              now += h;
            }
            const RealVector p = st.populations();
            const double cf = closed_form(initial[k], st0, target);
            if (!std::isnan(cf)) max_error = std::max(max_error, std::abs(p(0) - cf));
            t.add({double(k), target, p(0), levels.dot(p), cf, std::abs(p(0) - cf)});
          }
          final_photons.push_back(levels.dot(st.populations()));
        }
        out.tables.emplace_back("cool_coarse_grained", std::move(t));
      } else if (backend == "diagonal") {
        Table t({"case", "t", "vacuum_population", "mean_photons", "vacuum_closed_form", "abs_error"}, {"case"});
        RealVector b = half ? RealVector::Constant(cutoff + 1, 0.5) : bn_table(cutoff, beam.angle);
        b(0) = 0.0;
        for (size_t k = 0; k < initial.size(); ++k) {
          const FieldState st = make_state(initial[k]);
          const auto series = evolve_diagonal(DiagonalField{st.populations(), beam.rate_g}, b, times);
          for (size_t i = 0; i < times.size(); ++i) {
            const double p0 = series[i](0);
            const double cf = closed_form(initial[k], st, times[i]);
            if (!std::isnan(cf)) max_error = std::max(max_error, std::abs(p0 - cf));
            t.add({double(k), times[i], p0, levels.dot(series[i]), cf, std::abs(p0 - cf)});
          }
          final_photons.push_back(levels.dot(series.back()));
        }
        out.tables.emplace_back("cool_diagonal", std::move(t));
      } else {
        Table t({"case", "t", "vacuum_population", "vacuum_population_se", "mean_photons", "mean_photons_se",
                 "vacuum_closed_form", "z_score"},
                {"case"});
        double max_z = 0.0, dropped = 0.0;
        int within = 0, compared = 0;
        for (size_t k = 0; k < initial.size(); ++k) {
          const FieldState st = make_state(initial[k]);
          TrajectoryConfig tc;
          Segment seg;
          seg.duration = duration;
          seg.channels.push_back(jc_channel("ground", beam.rate_g, beam.angle, Preparation::ground, cutoff));
          if (beam.ratio_R > 0.0)
            seg.channels.push_back(
                jc_channel("excited", beam.ratio_R * beam.rate_g, beam.angle, Preparation::excited, cutoff));
          tc.segments.push_back(std::move(seg));
          std::vector<Eigen::Triplet<cplx>> proj{{0, 0, 1.0}};
          SparseMatrix vac(space.dim(), space.dim());
          vac.setFromTriplets(proj.begin(), proj.end());
          const SparseMatrix a = lowering_sparse(space, 0);
          tc.observables = {{"vacuum", vac}, {"photons", SparseMatrix(a.adjoint()) * a}};
          tc.sample_times = times;
          tc.transit_time = beam.transit_time;
          tc.n_traj = n_traj;
          tc.master_seed = initial.size() == 1 ? seed : derive_seed(seed, k);
          tc.threads = threads;
          tc.keep_density = false;
          const TrajectoryResult r = run_trajectories(st, tc);
          for (size_t i = 0; i < times.size(); ++i) {
            const Index row = static_cast<Index>(i);
            const double p0 = r.mean(row, 0), se = r.std_error(row, 0);
            const double cf = closed_form(initial[k], st, times[i]);
            double z = std::numeric_limits<double>::quiet_NaN();
            if (!std::isnan(cf)) {
              const double diff = std::abs(p0 - cf);
              z = se > 0.0 ? diff / se : (diff < 1e-12 ? 0.0 : std::numeric_limits<double>::infinity());
              max_z = std::max(max_z, z);
              ++compared;
              within += z <= 3.0 ? 1 : 0;
            }
            t.add({double(k), times[i], p0, se, r.mean(row, 1), r.std_error(row, 1), cf, z});
          }
          final_photons.push_back(r.mean(r.mean.rows() - 1, 1));
          final_photons_se.push_back(r.std_error(r.mean.rows() - 1, 1));
          dropped = std::max(dropped, r.dropped_fraction());
        }
        bs["max_z_score"] = max_z;
        bs["points_within_3se"] = within;
        bs["points_compared"] = compared;
        bs["final_mean_photons_se"] = final_photons_se;
        bs["dropped_fraction"] = dropped;
        out.tables.emplace_back("cool_monte_carlo", std::move(t));
      }
      if (backend != "monte_carlo") bs["max_abs_error"] = max_error;
      bs["final_mean_photons"] = final_photons;
      summary[backend] = bs;
    }
    out.summary = summary;
    return out;
  };
}

// ---------------------------------------------------------------------------
// bn_table: photon-removal probabilities versus quadrature

inline std::function<Output(std::uint64_t, int)> parse_bn_table(Reader& phys, Reader& num) {
  std::vector<RabiAngleDist> angles;
  for (Reader r : phys.one_or_many("angle")) angles.push_back(read_angle(r));
  const int n_max = static_cast<int>(phys.integer("n_max"));
  phys.require_that(n_max >= 0, "n_max", "must be >= 0");
  const bool quadrature = num.boolean("quadrature", true);
  const bool truncate = num.boolean("truncate", false);

  return [=](std::uint64_t, int threads) {
    Output out;
    Table t({"case", "n", "B_n", "B_n_quadrature", "abs_difference"}, {"case", "n"});
    json cases = json::array();
    for (size_t k = 0; k < angles.size(); ++k) {
      std::vector<double> quad(static_cast<size_t>(n_max) + 1, std::numeric_limits<double>::quiet_NaN());
      if (quadrature)
        parallel_for_index(quad.size(), threads,
                           [&](size_t n) { quad[n] = bn_quadrature(static_cast<int>(n), angles[k], truncate); });
      double max_diff = 0.0;
      std::vector<int> zeros;
      for (int n = 0; n <= n_max; ++n) {
        const double b = bn(n, angles[k]);
        const double diff = std::abs(b - quad[static_cast<size_t>(n)]);
        if (quadrature) max_diff = std::max(max_diff, diff);
        if (b < 1e-12) zeros.push_back(n);
        t.add({double(k), double(n), b, quad[static_cast<size_t>(n)], quadrature ? diff : std::numeric_limits<double>::quiet_NaN()});
      }
      json c = json::object();
      if (quadrature) c["max_abs_difference"] = max_diff;
      c["zero_indices"] = zeros;
      cases.push_back(c);
    }
    out.tables.emplace_back("bn_table", std::move(t));
    out.summary["cases"] = cases;
    return out;
  };
}

// ---------------------------------------------------------------------------
// trapping: Fock states left invariant by a fixed interaction angle

inline std::function<Output(std::uint64_t, int)> parse_trapping(Reader& phys, Reader& num) {
  const RabiAngleDist angle = read_angle(phys.child("angle", true));
  const int n_max = static_cast<int>(phys.integer("n_max"));
  phys.require_that(n_max >= 0, "n_max", "must be >= 0");
  const int initial = static_cast<int>(phys.integer("initial_fock"));
  phys.require_that(initial >= 0, "initial_fock", "must be >= 0");
  const double rate = phys.number("rate", 1.0);
  phys.require_that(rate > 0.0, "rate", "must be > 0");
  const double duration = read_duration(phys, 0.0, rate, false);
  const int cutoff = static_cast<int>(num.integer("cutoff", initial + 1));
  num.require_that(cutoff > initial, "cutoff", "must exceed initial_fock");
  const int points = static_cast<int>(num.integer("sample_points", 101));
  num.require_that(points >= 2, "sample_points", "must be >= 2");
  const double tolerance = num.number("tolerance", 1e-9);
  num.require_that(tolerance > 0.0, "tolerance", "must be > 0");

  return [=](std::uint64_t, int) {
    Output out;
    if (!angle.is_point()) out.warnings.push_back("trapping numbers are computed for the mean angle only");
    const std::set<int> numbers = find_trapping_numbers(angle.kind == AngleKind::broad ? kPi : angle.phi0, n_max, tolerance);
    Table tn({"n"}, {"n"});
    for (int n : numbers) tn.add({double(n)});

    RealVector c0 = RealVector::Zero(cutoff + 1);
    c0(initial) = 1.0;
    const std::vector<double> times = uniform_times(duration, points);
    const auto series = evolve_diagonal(DiagonalField{c0, rate}, bn_table(cutoff, angle), times);
    Table tp({"t", "c_initial", "c_vacuum", "total_population"});
    double max_dev = 0.0, max_drift = 0.0;
    for (size_t i = 0; i < times.size(); ++i) {
      const double ci = series[i](initial), total = series[i].sum();
      max_dev = std::max(max_dev, std::abs(ci - 1.0));
      max_drift = std::max(max_drift, std::abs(total - 1.0));
      tp.add({times[i], ci, series[i](0), total});
    }
    out.tables.emplace_back("trapping_numbers", std::move(tn));
    out.tables.emplace_back("trapping_populations", std::move(tp));
    out.summary["trapping_numbers"] = std::vector<int>(numbers.begin(), numbers.end());
    out.summary["initial_is_trapped"] = numbers.count(initial) > 0;
    out.summary["max_initial_deviation"] = max_dev;
    out.summary["max_total_drift"] = max_drift;
    return out;
  };
}

// ---------------------------------------------------------------------------
// epr: two-step single-cavity entanglement protocol

inline std::function<Output(std::uint64_t, int)> parse_epr(Reader& phys, Reader& num) {
  const double mu = phys.number("mu");
  phys.require_that(mu >= 0.0 && mu < 1.0, "mu", "must lie in [0, 1)");
  const double g = phys.frequency("g");
  const double tau = phys.time("tau");
  const double sigma_rel = phys.number("sigma_rel", 0.05);
  const double rate = phys.number("rate");
  const double n_th = phys.number("n_th", 0.0);
  const std::string regime = phys.choice("regime", {"weak", "strong"}, "weak");
  const double drive_omega = phys.frequency("drive_omega", 0.0);
  const double transit_time = phys.time("transit_time", 0.0);
  phys.require_that(g > 0.0, "g", "must be > 0");
  phys.require_that(tau > 0.0, "tau", "must be > 0");
  phys.require_that(sigma_rel >= 0.0, "sigma_rel", "must be >= 0");
  phys.require_that(rate > 0.0, "rate", "must be > 0");
  phys.require_that(n_th >= 0.0, "n_th", "must be >= 0");
  phys.require_that(drive_omega >= 0.0, "drive_omega", "must be >= 0");
  ProtocolTarget target;
  if (phys.has("target") || !num.has("step_gamma_t")) target = read_target(phys.child("target", true));

  const std::string backend = num.choice("backend", {"bframe", "full"}, "bframe");
  const bool step_override = num.has("step_gamma_t");
  const double step_gamma_t = step_override ? num.number("step_gamma_t") : 0.0;
  if (step_override) num.require_that(step_gamma_t > 0.0, "step_gamma_t", "must be > 0");
  const int passes = static_cast<int>(num.integer("passes", 1));
  num.require_that(passes >= 1, "passes", "must be >= 1");
  const bool reversed = num.choice("order", {"normal", "reversed"}, "normal") == "reversed";
  const int points = static_cast<int>(num.integer("sample_points", 41));
  num.require_that(points >= 2, "sample_points", "must be >= 2");
  const int cutoff = static_cast<int>(num.integer("cutoff", 25));
  const int n_traj = static_cast<int>(num.integer("n_traj", 200));
  num.require_that(cutoff >= 1 && cutoff <= 40, "cutoff", "must lie in [1, 40] for the two-mode Fock backend");
  num.require_that(n_traj >= 2, "n_traj", "must be >= 2");

  return [=](std::uint64_t seed, int threads) {
    Output out;
    const bool have_target = !step_override;
    const ProtocolTiming timing = protocol_time(mu, have_target ? target : ProtocolTarget{}, g, tau, rate, n_th);
    const double step_time = step_override ? step_gamma_t / timing.gamma : timing.step_time;
    require(step_time > 0.0, "run_epr: initial occupation already meets the target");
    ProtocolSchedule schedule = ProtocolSchedule::two_step(step_time, passes, reversed);
    schedule.regime = regime == "weak" ? Regime::weak : Regime::strong;
    const std::vector<double> times = uniform_times(schedule.total_duration(), points);
    const double phi0 = timing.omega_b * tau;
    const RabiAngleDist dist = sigma_rel > 0.0 ? RabiAngleDist::gaussian(phi0, sigma_rel * phi0) : RabiAngleDist::delta(phi0);

    ProtocolSchedule weak = schedule;
    weak.regime = Regime::weak;
    const EprResult law = run_epr_bframe(weak, mu, timing.n_b0, timing.gamma, times);

    EprResult result;
    if (backend == "bframe") {
      result = run_epr_bframe(schedule, mu, timing.n_b0, timing.gamma, times,
                              schedule.regime == Regime::strong ? std::optional<RabiAngleDist>(dist) : std::nullopt, rate);
    } else {
      BeamConfig beam;
      beam.rate_g = rate;
      beam.angle = dist;
      beam.transit_time = transit_time;
      out.warnings = beam.warnings();
      const ModeSpace space = ModeSpace::pair(cutoff);
      const double tail = squeeze_tail_mass(SqueezeParams::from_mu(mu).r(), cutoff);
      if (tail > 1e-6) out.warnings.push_back("two-mode squeezed vacuum tail beyond the cutoff is " + Table::format(tail));
      TrajectoryOptions opts;
      opts.n_traj = n_traj;
      opts.seed = seed;
      opts.threads = threads;
      opts.sample_times = times;
      result = run_epr_full(schedule, EprPhysics{mu, g, drive_omega}, beam, detail::two_mode_thermal(space, n_th), opts);
    }
    if (schedule.regime == Regime::weak && phi0 > 0.3)
      out.warnings.push_back("Omega_b tau = " + Table::format(phi0) + " is outside the weak-coupling regime");

    out.tables.emplace_back("epr_series", detail::epr_table(result.series, law.series.fidelity));
    json& s = out.summary;
    s["backend"] = result.backend;
    s["gamma"] = timing.gamma;
    s["omega_b"] = timing.omega_b;
    s["phi0"] = phi0;
    s["n_b0"] = timing.n_b0;
    s["step_time"] = step_time;
    s["total_time"] = schedule.total_duration();
    s["steady_photons_per_mode"] = timing.steady_photons;
    s["final_fidelity"] = result.final_fidelity;
    s["final_fidelity_se"] = result.final_fidelity_se;
    s["product_law_final_fidelity"] = law.final_fidelity;
    s["ideal_epr_variance"] = 2.0 * std::exp(-2.0 * SqueezeParams::from_mu(mu).r());
    if (!std::isnan(result.epr_variance)) s["epr_variance"] = result.epr_variance;
    if (n_th == 0.0) {
      const double eta = std::exp(-timing.gamma * step_time * passes);
      s["exact_vacuum_start_fidelity"] = bframe_vacuum_fidelity(mu, eta, eta);
    }
    if (backend == "full") s["dropped_fraction"] = result.dropped_fraction;
    // Decay of the occupation damped by the first step, fitted over that step.
    const auto& first = reversed ? result.series.nb2 : result.series.nb1;
    const auto& first_se = reversed ? result.series.nb2_se : result.series.nb1_se;
    const double t_first = schedule.steps.front().duration;
    if (timing.n_b0 > 0.0 && schedule.regime == Regime::weak) {
      const double slope = -fit_log_slope(result.series.times, first, t_first * (1.0 + 1e-12), first_se);
      s["first_step_decay_rate"] = slope;
      s["first_step_decay_ratio"] = slope / timing.gamma;
    }
    return out;
  };
}

// ---------------------------------------------------------------------------
// two_cavity: distant cavities entangled by counter-propagating beams

inline std::function<Output(std::uint64_t, int)> parse_two_cavity(Reader& phys, Reader& num) {
  TwoCavityConfig cfg;
  cfg.mu = phys.number("mu");
  cfg.g = phys.frequency("g");
  cfg.rate_forward = phys.number("rate_forward");
  cfg.rate_backward = phys.number("rate_backward");
  const double phi = phys.angle("phi");
  const double sigma_rel = phys.number("sigma_rel", 0.0);
  phys.require_that(phi > 0.0, "phi", "must be > 0");
  phys.require_that(sigma_rel >= 0.0, "sigma_rel", "must be >= 0");
  cfg.angle = sigma_rel > 0.0 ? RabiAngleDist::gaussian(phi, sigma_rel * phi) : RabiAngleDist::delta(phi);
  cfg.transit_time = phys.time("transit_time", 0.0);
  const double n_th = phys.number("n_th", 0.0);
  phys.require_that(n_th >= 0.0, "n_th", "must be >= 0");
  phys.check([&] { cfg.validate(); });
  phys.require_that(cfg.rate_forward + cfg.rate_backward > 0.0, "rate_forward", "and rate_backward must not both be 0");

  const auto backends = num.choices("backends", {"monte_carlo", "lindblad"}, {"monte_carlo"});
  const int cutoff = static_cast<int>(num.integer("cutoff", 25));
  num.require_that(cutoff >= 1 && cutoff <= 40, "cutoff", "must lie in [1, 40]");
  const double step_gamma_t = num.number("step_gamma_t", 8.0);
  num.require_that(step_gamma_t > 0.0, "step_gamma_t", "must be > 0");
  const int points = static_cast<int>(num.integer("sample_points", 41));
  num.require_that(points >= 2, "sample_points", "must be >= 2");
  const bool uses_mc = std::find(backends.begin(), backends.end(), "monte_carlo") != backends.end();
  const int n_traj = static_cast<int>(num.integer("n_traj", 200));
  if (uses_mc) num.require_that(n_traj >= 2, "n_traj", "must be >= 2");
  const double check_phi = num.angle("check_phi", 0.05);
  num.require_that(check_phi > 0.0, "check_phi", "must be > 0");
  const int probe_cutoff = static_cast<int>(num.integer("probe_cutoff", 8));
  num.require_that(probe_cutoff >= 2 && probe_cutoff <= 20, "probe_cutoff", "must lie in [2, 20]");
  const double probe_n_bar = num.number("probe_n_bar", 0.3);
  num.require_that(probe_n_bar > 0.0, "probe_n_bar", "must be > 0");

  return [=](std::uint64_t seed, int threads) {
    Output out;
    const double phi_b = cfg.angle.mean() * cfg.area_ratio();
    const double gamma = (cfg.rate_forward + cfg.rate_backward) * phi_b * phi_b;
    const double step_time = step_gamma_t / gamma;
    const ProtocolSchedule schedule = ProtocolSchedule::two_step(step_time);
    const std::vector<double> times = uniform_times(schedule.total_duration(), points);
    const ModeSpace space = ModeSpace::pair(cutoff);
    const FieldState initial = detail::two_mode_thermal(space, n_th);
    json& s = out.summary;
    s["gamma"] = gamma;
    s["omega_b"] = cfg.omega_b();
    s["step_time"] = step_time;
    s["total_time"] = schedule.total_duration();
    s["bidirectional"] = cfg.bidirectional();
    if (!cfg.bidirectional())
      out.warnings.push_back("beams are not balanced in both directions; the two-mode squeezed vacuum is not dark");

    for (const auto& backend : backends) {
      EprResult r;
      if (backend == "monte_carlo") {
        TrajectoryOptions opts;
        opts.n_traj = n_traj;
        opts.seed = seed;
        opts.threads = threads;
        opts.sample_times = times;
        r = run_two_cavity_mc(schedule, cfg, initial, opts);
      } else {
        r = run_two_cavity_lindblad(schedule, cfg, initial, times);
      }
      out.tables.emplace_back("two_cavity_" + backend, detail::epr_table(r.series));
      json b = json::object();
      b["final_fidelity"] = r.final_fidelity;
      b["final_fidelity_se"] = r.final_fidelity_se;
      b["epr_variance"] = r.epr_variance;
      if (backend == "monte_carlo") b["dropped_fraction"] = r.dropped_fraction;
      s[backend] = b;
    }

    // Generator of the averaged sequential map, as configured and with the
    // backward beam switched off.
    Table t({"forward_only_control", "delta_sign", "phi", "relative_error", "bound", "conforming"},
            {"forward_only_control", "delta_sign", "conforming"});
    const ModeSpace probe_space = ModeSpace::pair(probe_cutoff);
    const FieldState probe = detail::two_mode_thermal(probe_space, probe_n_bar);
    json gen = json::object();
    for (int control = 0; control < 2; ++control) {
      TwoCavityConfig c = cfg;
      if (control) {
        c.rate_forward = cfg.rate_forward + cfg.rate_backward;
        c.rate_backward = 0.0;
      }
      bool all = true;
      for (int sign : {1, -1}) {
        const GeneratorCheck g = two_cavity_generator_check(c, sign, check_phi, probe);
        all = all && g.conforming;
        t.add({double(control), double(sign), check_phi, g.relative_error, g.bound, g.conforming ? 1.0 : 0.0});
        gen[control ? "forward_only" : "configured"][sign > 0 ? "step1_relative_error" : "step2_relative_error"] =
            g.relative_error;
      }
      gen[control ? "forward_only" : "configured"]["conforming"] = all;
    }
    gen["bound"] = 10.0 * check_phi * check_phi;
    s["generator_check"] = gen;
    out.tables.emplace_back("two_cavity_generator", std::move(t));
    return out;
  };
}

// ---------------------------------------------------------------------------
// fig4: total protocol time and steady photon number versus mu

inline std::function<Output(std::uint64_t, int)> parse_fig4(Reader& phys, Reader&) {
  const double g = phys.frequency("g");
  const double tau = phys.time("tau");
  const double rate = phys.number("rate");
  phys.require_that(g > 0.0, "g", "must be > 0");
  phys.require_that(tau > 0.0, "tau", "must be > 0");
  phys.require_that(rate > 0.0, "rate", "must be > 0");
  const ProtocolTarget target = read_target(phys.child("target", true));
  const double n_th = phys.number("n_th", 0.0);
  phys.require_that(n_th >= 0.0, "n_th", "must be >= 0");
  std::vector<double> mus;
  if (phys.count_present({"mu_values", "mu_grid"}) != 1) {
    phys.fail(phys.path() + ": exactly one of mu_values, mu_grid is required");
  } else if (phys.has("mu_values")) {
    mus = phys.numbers("mu_values");
  } else {
    Reader grid = phys.child("mu_grid");
    const double lo = grid.number("start"), hi = grid.number("stop");
    const int n = static_cast<int>(grid.integer("points"));
    grid.require_that(n >= 2 && hi > lo, "points", "must be >= 2 with stop > start");
    grid.finish();
    if (n >= 2 && hi > lo)
      for (int k = 0; k < n; ++k) mus.push_back(lo + (hi - lo) * k / (n - 1));
  }
  for (double m : mus) phys.require_that(m > 0.0 && m < 1.0, "mu", "values must lie in (0, 1)");
  const bool has_operating = phys.has("operating_mu");
  const double operating = has_operating ? phys.number("operating_mu") : 0.0;
  if (has_operating) phys.require_that(operating > 0.0 && operating < 1.0, "operating_mu", "must lie in (0, 1)");

  return [=](std::uint64_t, int) {
    Output out;
    Table t({"mu", "T_tot_seconds", "n_bar_steady", "T_tot_thermal_seconds", "fidelity"});
    for (double m : mus) {
      const ProtocolTiming cold = protocol_time(m, target, g, tau, rate, 0.0);
      const ProtocolTiming warm = protocol_time(m, target, g, tau, rate, n_th);
      t.add({m, cold.total_time, cold.steady_photons, warm.total_time, cold.fidelity});
    }
    out.tables.emplace_back("fig4", std::move(t));
    if (has_operating) {
      const ProtocolTiming cold = protocol_time(operating, target, g, tau, rate, 0.0);
      const ProtocolTiming warm = protocol_time(operating, target, g, tau, rate, n_th);
      json op = json::object();
      op["mu"] = operating;
      op["T_tot_seconds"] = cold.total_time;
      op["n_bar_steady"] = cold.steady_photons;
      op["T_tot_thermal_seconds"] = warm.total_time;
      op["n_th"] = n_th;
      op["gamma"] = cold.gamma;
      op["omega_b"] = cold.omega_b;
      op["fidelity"] = cold.fidelity;
      out.summary["operating_point"] = op;
    }
    return out;
  };
}

// ---------------------------------------------------------------------------
// fig5: time to target fidelity versus mean interaction time

inline std::function<Output(std::uint64_t, int)> parse_fig5(Reader& phys, Reader& num) {
  ScanConfig cfg;
  cfg.mu = phys.number("mu");
  cfg.fidelity = phys.number("fidelity");
  cfg.epsilon = phys.number("epsilon");
  cfg.sigma_rel = phys.number("sigma_rel", 0.05);
  phys.require_that(cfg.mu > 0.0 && cfg.mu < 1.0, "mu", "must lie in (0, 1)");
  phys.require_that(cfg.fidelity > 0.0 && cfg.fidelity < 1.0, "fidelity", "must lie in (0, 1)");
  phys.require_that(cfg.epsilon > 0.0, "epsilon", "must be > 0");
  phys.require_that(cfg.sigma_rel >= 0.0, "sigma_rel", "must be >= 0");
  const double lo = num.angle("phi_min", 0.01);
  const double hi = num.angle("phi_max", 10.0);
  const int points = static_cast<int>(num.integer("points", 400));
  num.require_that(lo > 0.0 && hi > lo, "phi_max", "must exceed phi_min > 0");
  num.require_that(points >= 3, "points", "must be >= 3");
  cfg.horizon_factor = num.number("horizon_factor", 100.0);
  num.require_that(cfg.horizon_factor >= 1.0, "horizon_factor", "must be >= 1");

  return [=](std::uint64_t, int threads) {
    Output out;
    ScanConfig c = cfg;
    c.threads = threads;
    const std::vector<ScanPoint> scan = scan_time_vs_tau(c, log_grid(lo, hi, points));
    Table t({"phi0", "T_numeric", "censored", "T_weak", "T_strong"}, {"censored"});
    size_t best = scan.size();
    int censored = 0;
    std::vector<double> maxima;
    for (size_t i = 0; i < scan.size(); ++i) {
      const ScanPoint& p = scan[i];
      t.add({p.phi0, p.time_numeric, p.censored ? 1.0 : 0.0, p.time_weak, p.time_strong});
      censored += p.censored ? 1 : 0;
      if (!p.censored && (best == scan.size() || p.time_numeric < scan[best].time_numeric)) best = i;
      if (i > 0 && i + 1 < scan.size()) {
        const auto above = [&](size_t j) { return scan[j].censored || p.time_numeric > scan[j].time_numeric; };
        if (!p.censored && above(i - 1) && above(i + 1)) maxima.push_back(p.phi0);
      }
    }
    out.tables.emplace_back("fig5", std::move(t));
    out.summary["censored_points"] = censored;
    if (best < scan.size()) {
      out.summary["global_minimum_phi0"] = scan[best].phi0;
      out.summary["global_minimum_time"] = scan[best].time_numeric;
    }
    out.summary["local_maxima_phi0"] = maxima;
    out.summary["grid_log_step"] = std::log(hi / lo) / (points - 1);
    if (censored) out.warnings.push_back(std::to_string(censored) + " scan points did not reach the target before the horizon");
    return out;
  };
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Entry points

/// Validates a config (or a manifest, whose "config" block is used) and
/// returns a runnable plan. Throws ConfigError listing every problem.
inline Plan parse(const json& input, std::optional<std::uint64_t> seed_override = std::nullopt) {
  const json& config = input.is_object() && input.contains("manifest_version") && input.contains("config")
                           ? input.at("config")
                           : input;
  std::vector<std::string> errors;
  Plan plan;
  Reader root(config, plan.resolved, "", errors);
  const size_t before = errors.size();
  plan.experiment =
      root.choice("experiment", {"cool", "bn_table", "trapping", "epr", "two_cavity", "fig4", "fig5"});
  const bool known = errors.size() == before;
  plan.seed = root.seed("seed", 0);
  if (seed_override) plan.seed = *seed_override;
  plan.resolved["seed"] = plan.seed;
  if (root.has("output")) plan.output = root.text("output");
  Reader phys = root.child("physics", true);
  Reader num = root.child("numerics");
  std::function<Output(std::uint64_t, int)> run;
  if (known) {
    const std::string& e = plan.experiment;
    if (e == "cool") run = detail::parse_cool(phys, num);
    else if (e == "bn_table") run = detail::parse_bn_table(phys, num);
    else if (e == "trapping") run = detail::parse_trapping(phys, num);
    else if (e == "epr") run = detail::parse_epr(phys, num);
    else if (e == "two_cavity") run = detail::parse_two_cavity(phys, num);
    else if (e == "fig4") run = detail::parse_fig4(phys, num);
    else run = detail::parse_fig5(phys, num);
  }
  if (known) {
    phys.finish();
    num.finish();
  }
  root.finish();
  if (!errors.empty()) throw ConfigError(errors);
  plan.resolved.erase("output");
  plan.run = std::move(run);
  return plan;
}

inline Output execute(const Plan& plan, int threads = 1) {
  require(threads >= 1, "execute: threads must be >= 1");
  return plan.run(plan.seed, threads);
}

/// Run manifest. It holds nothing that depends on the worker count or the
/// output location, so a manifest re-fed as a config reproduces the run.
inline json manifest(const Plan& plan, const Output& out) {
  json m = json::object();
  m["manifest_version"] = kManifestVersion;
  m["tool"] = "qreservoir";
  m["version"] = QRESERVOIR_VERSION;
  m["config"] = plan.resolved;
  m["summary"] = out.summary;
  m["warnings"] = out.warnings;
  json files = json::array();
  for (const auto& [name, table] : out.tables) files.push_back(name + ".csv");
  m["outputs"] = files;
  return m;
}

}  // namespace qreservoir::cli
