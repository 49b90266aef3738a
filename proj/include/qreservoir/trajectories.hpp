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

#include "qreservoir/atom_field.hpp"
#include "qreservoir/beam.hpp"
#include "qreservoir/block_propagator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace qreservoir {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is handed out
/// dynamically, so fn must write only to slot i of any shared output.
template <typename Fn>
void parallel_for_index(size_t n, int threads, Fn&& fn) {
  const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

using Rng = std::mt19937_64;

/// One kind of atom hitting the field: arrives at `rate`, modifies the pure
/// field vector in place (unitary kick followed by a sampled atom readout).
struct KickChannel {
  std::string name;
  double rate = 0.0;
  std::function<void(Vector& field, Rng& rng)> kick;
};

/// A stretch of time during which a fixed set of channels is active.
struct Segment {
  double duration = 0.0;
  std::vector<KickChannel> channels;
};

struct Observable {
  std::string name;
  SparseMatrix op;  // Hermitian; recorded as <psi|op|psi>
};

struct TrajectoryConfig {
  std::vector<Segment> segments;
  std::vector<double> sample_times;
  std::vector<Observable> observables;
  std::optional<Vector> overlap_target;  // records |<target|psi>|^2 as "fidelity"
  double transit_time = 0.0;             // arrivals closer than this are dropped
  int n_traj = 1;
  std::uint64_t master_seed = 0;
  int threads = 1;
  bool keep_density = true;

  double total_duration() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.duration;
    return t;
  }
};

struct TrajectoryResult {
  std::vector<double> times;
  std::vector<std::string> names;
  Eigen::MatrixXd mean;      // time x observable
  Eigen::MatrixXd std_error;  // standard error of the mean
  std::optional<FieldState> averaged;
  std::uint64_t arrivals = 0;
  std::uint64_t dropped = 0;
  int n_traj = 0;

  double dropped_fraction() const {
    return arrivals == 0 ? 0.0 : double(dropped) / double(arrivals);
  }
  Index column(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    require(it != names.end(), "TrajectoryResult: no observable named " + name);
    return static_cast<Index>(it - names.begin());
  }
};

namespace detail {

/// Samples a pure member of the ensemble described by the initial state.
class InitialSampler {
 public:
  explicit InitialSampler(const FieldState& initial) {
    if (initial.is_pure()) {
      vectors_ = Matrix(initial.vector());
      cumulative_ = {1.0};
      return;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(initial.density_matrix());
    std::vector<Index> keep;
    double total = 0.0;
    for (Index k = 0; k < solver.eigenvalues().size(); ++k)
      if (solver.eigenvalues()(k) > 1e-14) keep.push_back(k), total += solver.eigenvalues()(k);
    vectors_.resize(initial.space().dim(), static_cast<Index>(keep.size()));
    double acc = 0.0;
    for (size_t j = 0; j < keep.size(); ++j) {
      vectors_.col(static_cast<Index>(j)) = solver.eigenvectors().col(keep[j]);
      acc += solver.eigenvalues()(keep[j]) / total;
      cumulative_.push_back(acc);
    }
    cumulative_.back() = 1.0;
  }

  Vector sample(Rng& rng) const {
    if (cumulative_.size() == 1) return vectors_.col(0);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const Index k = std::min<Index>(static_cast<Index>(it - cumulative_.begin()), vectors_.cols() - 1);
    return vectors_.col(k);
  }

 private:
  Matrix vectors_;
  std::vector<double> cumulative_;
};

}  // namespace detail

/// Pure-state unraveling of the stochastic beam: Poisson arrivals, one
/// kick per atom, atom read out and discarded. Per-trajectory generators
/// depend only on (master_seed, index) and every reduction runs in index
/// order, so results do not depend on the number of workers.
inline TrajectoryResult run_trajectories(const FieldState& initial, const TrajectoryConfig& cfg) {
  require(cfg.n_traj >= 1, "run_trajectories: n_traj must be >= 1");
  require(!cfg.segments.empty(), "run_trajectories: at least one segment required");
  const double total = cfg.total_duration();
  for (const auto& seg : cfg.segments) {
    require(seg.duration >= 0.0, "run_trajectories: negative segment duration");
    for (const auto& ch : seg.channels) require(ch.rate >= 0.0, "run_trajectories: negative rate");
  }
  std::vector<double> times = cfg.sample_times;
  if (times.empty()) times = {0.0, total};
  require(std::is_sorted(times.begin(), times.end()), "run_trajectories: sample times must be sorted");
  require(times.front() >= 0.0 && times.back() <= total * (1.0 + 1e-12),
          "run_trajectories: sample times outside the run");

  const ModeSpace& space = initial.space();
  const detail::InitialSampler sampler(initial);
  const size_t n_obs = cfg.observables.size() + (cfg.overlap_target ? 1 : 0);
  const size_t n_times = times.size();
  const size_t n = static_cast<size_t>(cfg.n_traj);

  std::vector<double> records(n * n_times * n_obs);
  std::vector<std::uint64_t> arrivals(n), dropped(n);
  Matrix finals;
  if (cfg.keep_density) finals.resize(space.dim(), static_cast<Index>(n));

  auto measure = [&](const Vector& psi, double* out) {
    size_t k = 0;
    for (const auto& o : cfg.observables) out[k++] = psi.dot(o.op * psi).real();
    if (cfg.overlap_target) out[k++] = std::norm(cfg.overlap_target->dot(psi));
  };

  parallel_for_index(n, cfg.threads, [&](size_t i) {
    Rng rng = stream_rng(cfg.master_seed, i);
    Vector psi = sampler.sample(rng);
    double* rec = records.data() + i * n_times * n_obs;
    size_t next_sample = 0;
    auto record_until = [&](double t) {
      while (next_sample < n_times && times[next_sample] <= t) {
        measure(psi, rec + next_sample * n_obs);
        ++next_sample;
      }
    };
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double seg_start = 0.0;
    double last_accepted = -std::numeric_limits<double>::infinity();
    std::uint64_t n_arr = 0, n_drop = 0;
    for (const auto& seg : cfg.segments) {
      const double seg_end = seg_start + seg.duration;
      double rate = 0.0;
      for (const auto& ch : seg.channels) rate += ch.rate;
      if (rate > 0.0) {
        std::exponential_distribution<double> gap(rate);
        double t = seg_start + gap(rng);
        while (t < seg_end) {
          // Samples strictly before the arrival see the pre-kick state.
          while (next_sample < n_times && times[next_sample] < t) {
            measure(psi, rec + next_sample * n_obs);
            ++next_sample;
          }
          double pick = unit(rng) * rate;
          size_t c = 0;
          while (c + 1 < seg.channels.size() && pick >= seg.channels[c].rate) pick -= seg.channels[c++].rate;
          ++n_arr;
          if (t - last_accepted < cfg.transit_time) {
            ++n_drop;
          } else {
            seg.channels[c].kick(psi, rng);
            last_accepted = t;
          }
          t += gap(rng);
        }
      }
      seg_start = seg_end;
    }
    record_until(std::numeric_limits<double>::infinity());
    arrivals[i] = n_arr;
    dropped[i] = n_drop;
    if (cfg.keep_density) finals.col(static_cast<Index>(i)) = psi;
  });

  TrajectoryResult result;
  result.times = times;
  for (const auto& o : cfg.observables) result.names.push_back(o.name);
  if (cfg.overlap_target) result.names.push_back("fidelity");
  result.n_traj = cfg.n_traj;
  result.mean = Eigen::MatrixXd::Zero(static_cast<Index>(n_times), static_cast<Index>(n_obs));
  result.std_error = result.mean;
  for (size_t t = 0; t < n_times; ++t)
    for (size_t k = 0; k < n_obs; ++k) {
      double sum = 0.0, sum_sq = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double x = records[(i * n_times + t) * n_obs + k];
        sum += x;
        sum_sq += x * x;
      }
      const double mean = sum / double(n);
      const double var = n > 1 ? std::max(0.0, (sum_sq - double(n) * mean * mean) / double(n - 1)) : 0.0;
      result.mean(static_cast<Index>(t), static_cast<Index>(k)) = mean;
      result.std_error(static_cast<Index>(t), static_cast<Index>(k)) = std::sqrt(var / double(n));
    }
  for (size_t i = 0; i < n; ++i) {
    result.arrivals += arrivals[i];
    result.dropped += dropped[i];
  }
  if (cfg.keep_density) {
    Matrix rho = finals * finals.adjoint() / double(n);
    result.averaged = FieldState::from_density(space, std::move(rho));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Kick builders

namespace detail {

/// Reads out the atom of a joint atom-major vector, keeping the field part
/// of the sampled outcome.
inline void read_out_atom(const Vector& joint, Index field_dim, Vector& field, Rng& rng) {
  const double p0 = joint.head(field_dim).squaredNorm();
  const double p1 = joint.tail(field_dim).squaredNorm();
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * (p0 + p1);
  if (u < p0) {
    field = joint.head(field_dim) / std::sqrt(p0);
  } else {
    field = joint.tail(field_dim) / std::sqrt(p1);
  }
}

}  // namespace detail

/// Resonant JC atoms (ground or excited) on a single mode.
inline KickChannel jc_channel(const std::string& name, double rate, const RabiAngleDist& angle,
                              Preparation prep, int cutoff) {
  require(prep == Preparation::ground || prep == Preparation::excited,
          "jc_channel: bare-basis preparation required");
  const Index d = cutoff + 1;
  const Index offset = prep == Preparation::ground ? 0 : d;
  KickChannel ch;
  ch.name = name;
  ch.rate = rate;
  ch.kick = [=](Vector& field, Rng& rng) {
    const double phi = angle.sample(rng);
    Vector joint = Vector::Zero(2 * d);
    joint.segment(offset, d) = field;
    apply_jc_kick(phi, cutoff, joint);
    detail::read_out_atom(joint, d, field, rng);
  };
  return ch;
}

/// Atoms prepared in one dressed level passing through a sequence of
/// interaction stages exp(-i phi H_k), each H_k normalized so that phi is the
/// pulse area (one stage for a single cavity, two for sequential cavities).
inline KickChannel propagator_channel(const std::string& name, double rate, const RabiAngleDist& angle,
                                      int initial_level,
                                      std::vector<std::shared_ptr<const BlockPropagator>> stages) {
  require(!stages.empty(), "propagator_channel: at least one stage required");
  require(initial_level == 0 || initial_level == 1, "propagator_channel: level must be 0 or 1");
  const Index field_dim = stages.front()->dim() / 2;
  KickChannel ch;
  ch.name = name;
  ch.rate = rate;
  ch.kick = [=](Vector& field, Rng& rng) {
    const double phi = angle.sample(rng);
    Vector joint = Vector::Zero(2 * field_dim);
    joint.segment(initial_level * field_dim, field_dim) = field;
    for (const auto& stage : stages) stage->apply(phi, joint);
    detail::read_out_atom(joint, field_dim, field, rng);
  };
  return ch;
}

}  // namespace qreservoir
