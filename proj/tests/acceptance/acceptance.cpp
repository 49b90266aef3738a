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

// Acceptance runner. Each criterion loads its shipped config, runs the
// experiment in-process, recomputes the reference values independently and
// prints exactly one PASS/FAIL line (plus indented detail lines). Runs every
// criterion by default or a single one with --criterion N; exits non-zero if
// any selected criterion fails.

#include "oracles.hpp"
#include "qreservoir/cli/experiments.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using qreservoir::cli::json;
using qreservoir::cli::Output;
using qreservoir::cli::Plan;
using qreservoir::cli::Table;

constexpr double kPi = std::numbers::pi;
constexpr int kWorkers = 8;

struct Verdict {
  bool pass = true;
  std::string headline;
  std::vector<std::string> details;

  void expect(bool ok, const std::string& line) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok    " : "FAILED") + "  " + line);
  }
  void note(const std::string& line) { details.push_back("        " + line); }
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

struct Run {
  Plan plan;
  Output output;
  double seconds = 0.0;
};

/// Runs a shipped config once per worker count and memoizes the result, so
/// the determinism check can reuse runs made by earlier criteria.
const Run& run_config(const std::string& name, int threads) {
  static std::map<std::pair<std::string, int>, Run> cache;
  const auto key = std::make_pair(name, threads);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const std::string path = std::string(QRESERVOIR_CONFIG_DIR) + "/" + name + ".json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  Run r;
  r.plan = qreservoir::cli::parse(json::parse(in));
  const auto start = std::chrono::steady_clock::now();
  r.output = qreservoir::cli::execute(r.plan, threads);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cache.emplace(key, std::move(r)).first->second;
}

// Weak-coupling loss rate r * phi^2 for the shipped cooling beams
// (rate 100/s, mean angle 0.1; the 5% Gaussian width barely shifts the mean).
double cooling_rate(const Plan& plan) {
  const auto& angle = plan.resolved["physics"]["angle"];
  const double phi0 = angle["phi0"].get<double>();
  return plan.resolved["physics"]["rate"].get<double>() * phi0 * phi0;
}

double vacuum_closed_form(double t, double n_bar, double gamma) { return 1.0 / (1.0 + n_bar * std::exp(-gamma * t)); }

Verdict weak_cooling() {
  const Run& run = run_config("c01_weak_cooling", 1);
  const Table& t = run.output.table("cool_lindblad");
  const double gamma = cooling_rate(run.plan);
  const double n_bars[] = {0.5, 1.0, 5.0};
  const auto cases = t.column("case"), times = t.column("t"), p0 = t.column("vacuum_population");
  double worst = 0.0, last_gt = 0.0;
  for (size_t i = 0; i < times.size(); ++i) {
    worst = std::max(worst, std::abs(p0[i] - vacuum_closed_form(times[i], n_bars[static_cast<int>(cases[i])], gamma)));
    last_gt = std::max(last_gt, gamma * times[i]);
  }
  Verdict v;
  v.headline = fmt("weak-coupling cooling, n_bar in {0.5, 1, 5}: max |P0 - closed form| = %.3e", worst);
  v.expect(worst < 1e-3, fmt("max abs error %.3e < 1e-3", worst));
  v.expect(last_gt >= 10.0 - 1e-9, fmt("gamma t reaches %.3f (>= 10)", last_gt));
  v.expect(run.plan.resolved["numerics"]["cutoff"] == 60, "cutoff 60");
  v.note(fmt("target 1e-6 %s; the residual is the thermal tail above n = 60 for n_bar = 5",
             worst < 1e-6 ? "met" : "not met"));
  return v;
}

Verdict monte_carlo_consistency() {
  const Run& run = run_config("c02_monte_carlo_cooling", kWorkers);
  const Table& t = run.output.table("cool_monte_carlo");
  const double gamma = cooling_rate(run.plan);
  const auto times = t.column("t"), p0 = t.column("vacuum_population"), se = t.column("vacuum_population_se");
  int within = 0;
  double max_z = 0.0;
  for (size_t i = 0; i < times.size(); ++i) {
    const double z = std::abs(p0[i] - vacuum_closed_form(times[i], 1.0, gamma)) / se[i];
    max_z = std::max(max_z, z);
    within += z <= 3.0 ? 1 : 0;
  }
  Verdict v;
  v.headline = fmt("Monte Carlo vs master equation: %d/%zu points within 3 SE, %.1f s", within, times.size(), run.seconds);
  v.expect(run.plan.resolved["numerics"]["n_traj"] == 10000, "10^4 trajectories");
  v.expect(times.size() == 20 && within == 20, fmt("20 sampled times, max z = %.2f", max_z));
  v.expect(run.seconds <= 120.0, fmt("runtime %.1f s <= 120 s (%d workers)", run.seconds, kWorkers));
  return v;
}

Verdict thermal_steady_state() {
  const Run& run = run_config("c03_thermal_steady_state", 1);
  const json& s = run.output.summary;
  const double ratio = run.plan.resolved["physics"]["ratio_R"].get<double>();
  const double expected = ratio / (1.0 - ratio);
  const double lindblad = s["lindblad"]["final_mean_photons"][0].get<double>();
  const double mc = s["monte_carlo"]["final_mean_photons"][0].get<double>();
  const double mc_se = s["monte_carlo"]["final_mean_photons_se"][0].get<double>();
  const double temperature = 1.0 / std::log(1.0 / ratio);
  Verdict v;
  v.headline = fmt("thermal steady state at R = 0.5: integrator %.7f, Monte Carlo %.4f +- %.4f", lindblad, mc, mc_se);
  v.expect(std::abs(lindblad - expected) < 1e-4, fmt("integrator |<n> - 1| = %.2e < 1e-4", std::abs(lindblad - expected)));
  v.expect(std::abs(mc - expected) <= 3.0 * mc_se, fmt("Monte Carlo within 3 SE (z = %.2f)", std::abs(mc - expected) / mc_se));
  v.expect(std::abs(s["effective_temperature"].get<double>() - temperature) < 1e-12,
           fmt("effective temperature %.6f hbar omega / k_B = 1/ln 2", s["effective_temperature"].get<double>()));
  return v;
}

Verdict bn_closed_form() {
  const Run& run = run_config("c04_bn_closed_form", kWorkers);
  const Table& t = run.output.table("bn_table");
  const auto cases = t.column("case"), ns = t.column("n"), b = t.column("B_n"), q = t.column("B_n_quadrature");
  const double phi0 = kPi / 2.0;
  const double sigmas[] = {0.05 * phi0, kPi};
  double worst_quad = 0.0, worst_oracle = 0.0;
  int max_n = 0;
  for (size_t i = 0; i < ns.size(); ++i) {
    const int n = static_cast<int>(ns[i]);
    max_n = std::max(max_n, n);
    worst_quad = std::max(worst_quad, std::abs(b[i] - q[i]));
    const double reference = n == 0 ? 0.0 : oracle::bn_gaussian_line(n, phi0, sigmas[static_cast<int>(cases[i])]);
    worst_oracle = std::max(worst_oracle, std::abs(b[i] - reference));
  }
  Verdict v;
  v.headline = fmt("B_n closed form, n <= %d, sigma in {0.05 phi0, pi}: max |formula - quadrature| = %.2e", max_n, worst_quad);
  v.expect(max_n == 100, "n runs to 100");
  v.expect(worst_quad < 1e-8, fmt("library quadrature %.2e < 1e-8", worst_quad));
  v.expect(worst_oracle < 1e-8, fmt("adaptive Gauss-Kronrod reference %.2e < 1e-8", worst_oracle));
  return v;
}

Verdict trapping() {
  const Run& run = run_config("c05_trapping", 1);
  const json& s = run.output.summary;
  const auto numbers = s["trapping_numbers"].get<std::vector<int>>();
  const std::vector<int> expected = {0, 4, 16, 36, 64, 100};
  const double deviation = s["max_initial_deviation"].get<double>();
  const Table& t = run.output.table("trapping_populations");
  const double horizon = t.column("t").back() * run.plan.resolved["physics"]["rate"].get<double>();
  Verdict v;
  v.headline = fmt("trapping states at phi0 = pi/2: %zu trapping numbers, max |c4 - 1| = %.1e", numbers.size(), deviation);
  v.expect(numbers == expected, "find_trapping_numbers(pi/2, 100) = {0, 4, 16, 36, 64, 100}");
  v.expect(deviation <= 1e-12, fmt("c4 constant to %.1e <= 1e-12", deviation));
  v.expect(std::abs(horizon - 100.0) < 1e-9, fmt("r t spans [0, %.0f]", horizon));
  return v;
}

Verdict strong_coupling_fidelity() {
  const Run& run = run_config("c06_strong_coupling", 1);
  const Table& t = run.output.table("cool_diagonal");
  const double mu = 0.95, rate = run.plan.resolved["physics"]["rate"].get<double>();
  const auto times = t.column("t"), p0 = t.column("vacuum_population");
  double worst = 0.0;
  for (size_t i = 0; i < times.size(); ++i) {
    const double closed = 1.0 - mu * mu * std::exp(-rate * times[i] * (1.0 - mu * mu) / 2.0);
    worst = std::max(worst, std::abs(p0[i] - closed));
  }
  Verdict v;
  v.headline = fmt("strong-coupling fidelity, mu = 0.95, B_n = 1/2: max abs error %.2e", worst);
  v.expect(worst < 1e-6, fmt("%.2e < 1e-6", worst));
  v.expect(std::abs(rate * times.back() - 100.0) < 1e-9, "r t spans [0, 100]");
  return v;
}

Verdict protocol_timing() {
  const Run& run = run_config("c07_fig4", 1);
  const json& op = run.output.summary["operating_point"];
  const double t_cold = op["T_tot_seconds"].get<double>();
  const double t_warm = op["T_tot_thermal_seconds"].get<double>();
  const double photons = op["n_bar_steady"].get<double>();
  // Independent recomputation of the log law 2 ln(n_b0 / n_inf) / (r Omega_b^2 tau^2).
  const double mu = 0.97, g = 1.25e5, tau = 12.5e-6, rate = 11200.0, n_inf = 0.01, n_th = 0.7;
  const double omega_b = g * std::sqrt((1.0 - mu) / (1.0 + mu));
  const double gamma = rate * omega_b * omega_b * tau * tau;
  const double n0 = mu * mu / (1.0 - mu * mu);
  const double model_cold = 2.0 * std::log(n0 / n_inf) / gamma;
  const double model_warm = 2.0 * std::log((n0 + n_th + 2.0 * n_th * n0) / n_inf) / gamma;
  Verdict v;
  v.headline = fmt("protocol time at mu = 0.97: %.1f ms empty start, %.1f ms thermal start, %.2f photons per mode",
                   t_cold * 1e3, t_warm * 1e3, photons);
  v.expect(std::abs(t_cold / 36e-3 - 1.0) <= 0.10, fmt("T_tot %.2f ms within 10%% of 36 ms", t_cold * 1e3));
  v.expect(std::abs(photons / 16.0 - 1.0) <= 0.05, fmt("steady photons %.3f within 5%% of 16", photons));
  v.expect(std::abs(t_warm / 43e-3 - 1.0) <= 0.20, fmt("thermal-start T_tot %.2f ms within 20%% of 43 ms", t_warm * 1e3));
  v.expect(std::abs(t_cold - model_cold) < 1e-12 && std::abs(t_warm - model_warm) < 1e-12,
           fmt("matches the log law: %.2f ms and %.2f ms", model_cold * 1e3, model_warm * 1e3));
  v.note(fmt("thermal-start model value %.1f ms against the 43 ms reference (%.0f%% low)", model_warm * 1e3,
             100.0 * (1.0 - model_warm / 43e-3)));
  return v;
}

/// Weighted least-squares slope of log(y) over t <= t_max, weights (y/se)^2.
double log_slope(const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& se, double t_max) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] > t_max || y[i] <= 0.0 || se[i] <= 0.0) continue;
    const double w = (y[i] / se[i]) * (y[i] / se[i]), ly = std::log(y[i]);
    sw += w, sx += w * t[i], sy += w * ly, sxx += w * t[i] * t[i], sxy += w * t[i] * ly;
  }
  return (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
}

Verdict epr_full() {
  const Run& run = run_config("c08_epr_full", kWorkers);
  const json& s = run.output.summary;
  const Table& t = run.output.table("epr_series");
  const double mu = 0.5, g = 1.25e5, tau = 2e-6, rate = 25000.0;
  const double omega_b = g * std::sqrt((1.0 - mu) / (1.0 + mu));
  const double gamma = rate * omega_b * omega_b * tau * tau;
  const double step = s["step_time"].get<double>();
  const double decay = -log_slope(t.column("t"), t.column("nb1"), t.column("nb1_se"), step * (1.0 + 1e-12));
  const double fidelity = s["final_fidelity"].get<double>(), se = s["final_fidelity_se"].get<double>();
  Verdict v;
  v.headline = fmt("EPR state by dressed-atom Monte Carlo, mu = 0.5: fidelity %.4f +- %.4f, decay/gamma = %.3f, %.0f s",
                   fidelity, se, decay / gamma, run.seconds);
  v.expect(run.plan.resolved["numerics"]["cutoff"] == 25, "cutoff 25 per mode");
  v.expect(fidelity >= 0.99, fmt("final fidelity %.4f >= 0.99", fidelity));
  v.expect(std::abs(decay / gamma - 1.0) <= 0.05, fmt("<b1^dag b1> decay %.1f /s within 5%% of %.1f /s", decay, gamma));
  v.expect(run.seconds <= 300.0, fmt("runtime %.0f s <= 300 s (%d workers)", run.seconds, kWorkers));
  return v;
}

Verdict two_cavity() {
  const Run& run = run_config("c09_two_cavity", kWorkers);
  const json& s = run.output.summary;
  const double phi = run.plan.resolved["numerics"]["check_phi"].get<double>();
  const double bound = 10.0 * phi * phi;
  const json& cfg = s["generator_check"]["configured"];
  const json& ctl = s["generator_check"]["forward_only"];
  const double mc = s["monte_carlo"]["final_fidelity"].get<double>();
  const double mc_se = s["monte_carlo"]["final_fidelity_se"].get<double>();
  const double e1 = cfg["step1_relative_error"].get<double>(), e2 = cfg["step2_relative_error"].get<double>();
  Verdict v;
  v.headline = fmt("two-cavity protocol, bidirectional beams, mu = 0.5: fidelity %.4f +- %.4f, generator error %.2e",
                   mc, mc_se, std::max(e1, e2));
  v.expect(s["bidirectional"].get<bool>() && run.plan.resolved["numerics"]["cutoff"] == 25,
           "balanced beams in both directions, cutoff 25 per mode");
  v.expect(mc >= 0.99, fmt("Monte Carlo steady fidelity %.4f >= 0.99", mc));
  v.expect(std::max(e1, e2) < bound, fmt("generator relative errors %.2e, %.2e < 10 phi^2 = %.3f at phi = %.2f", e1, e2, bound, phi));
  v.expect(!ctl["conforming"].get<bool>(),
           fmt("forward-only control flagged non-conforming (errors %.2f, %.2f)", ctl["step1_relative_error"].get<double>(),
               ctl["step2_relative_error"].get<double>()));
  v.note(fmt("exact averaged-map model fidelity %.4f", s["lindblad"]["final_fidelity"].get<double>()));
  return v;
}

Verdict fig5_shape() {
  const Run& run = run_config("c10_fig5", kWorkers);
  const Table& t = run.output.table("fig5");
  const auto phi = t.column("phi0"), time = t.column("T_numeric"), censored = t.column("censored");
  const double mu = 0.95, fidelity = 0.99, epsilon = 0.1, sigma_rel = 0.05;
  const double m2 = mu * mu, per_mode = std::sqrt(fidelity);
  const double n0 = m2 / (1.0 - m2), residual = 1.0 / per_mode - 1.0;
  const int populated = static_cast<int>(std::ceil(std::log(1e-12) / std::log(m2)));
  auto weak = [&](double p) { return std::log(n0 / residual) / (epsilon * p); };
  auto strong = [&](double p) { return 2.0 * std::log(m2 / (1.0 - per_mode)) / ((1.0 - m2) * epsilon / p); };
  // Spikes: some populated level n nearly trapped, B_n = (1 - e^{-2 n s^2} cos(2 phi sqrt n)) / 2 < 1/4.
  auto near_trap = [&](double p) {
    const double s = sigma_rel * p;
    for (int n = 1; n <= populated; ++n)
      if (0.5 * (1.0 - std::exp(-2.0 * n * s * s) * std::cos(2.0 * p * std::sqrt(double(n)))) < 0.25) return true;
    return false;
  };

  Verdict v;
  bool a = true, b = true;
  double worst_a = 0.0, worst_b = 0.0, first_bad_a = 0.0;
  int count_a = 0, count_b = 0, excluded = 0;
  size_t best = phi.size();
  for (size_t i = 0; i < phi.size(); ++i) {
    const bool ok = censored[i] == 0.0;
    if (ok && (best == phi.size() || time[i] < time[best])) best = i;
    if (phi[i] <= 0.3) {
      ++count_a;
      const double dev = ok ? std::abs(time[i] / weak(phi[i]) - 1.0) : INFINITY;
      if (dev > 0.1 && a) first_bad_a = phi[i];
      a = a && dev <= 0.1;
      worst_a = std::max(worst_a, dev);
    }
    if (phi[i] >= 3.0) {
      if (near_trap(phi[i])) {
        ++excluded;
        continue;
      }
      ++count_b;
      const double dev = ok ? std::abs(time[i] / strong(phi[i]) - 1.0) : INFINITY;
      b = b && dev <= 0.1;
      worst_b = std::max(worst_b, dev);
    }
  }
  const double minimum = best < phi.size() ? phi[best] : NAN;
  const bool c = best < phi.size() && minimum > 0.3 && minimum < 3.0;

  const double step = std::log(phi[1] / phi[0]);
  bool d = true;
  std::string maxima_text;
  for (int j = 1; j <= 4; ++j) {
    const double target = kPi / std::sqrt(double(j));
    double nearest = NAN;
    for (size_t i = 1; i + 1 < phi.size(); ++i) {
      if (censored[i] != 0.0) continue;
      const auto higher = [&](size_t k) { return censored[k] != 0.0 || time[i] > time[k]; };
      if (!(higher(i - 1) && higher(i + 1))) continue;
      if (std::isnan(nearest) || std::abs(std::log(phi[i] / target)) < std::abs(std::log(nearest / target))) nearest = phi[i];
    }
    const bool hit = !std::isnan(nearest) && std::abs(std::log(nearest / target)) <= step * (1.0 + 1e-9);
    d = d && hit;
    maxima_text += fmt(" pi/sqrt(%d)=%.4f->%.4f%s", j, target, nearest, hit ? "" : "(miss)");
  }

  v.pass = a && b && c && d;
  v.headline = fmt("time-vs-angle curve: (a) %s, (b) %s, (c) %s, (d) %s", a ? "pass" : "FAIL", b ? "pass" : "FAIL",
                   c ? "pass" : "FAIL", d ? "pass" : "FAIL");
  v.details.push_back(fmt("%s  (a) weak-coupling envelope within 10%% for phi0 <= 0.3: max deviation %.1f%% over %d points%s",
                          a ? "ok    " : "FAILED", 100.0 * worst_a, count_a,
                          a ? "" : fmt(", first exceeded at phi0 = %.3f", first_bad_a).c_str()));
  v.details.push_back(fmt("%s  (b) strong-coupling law within 10%% for phi0 >= 3 away from spikes: max deviation %.1f%% "
                          "over %d points (%d near-trapping points excluded)",
                          b ? "ok    " : "FAILED", 100.0 * worst_b, count_b, excluded));
  v.details.push_back(fmt("%s  (c) global minimum strictly between regimes at phi0 = %.4f", c ? "ok    " : "FAILED", minimum));
  v.details.push_back(fmt("%s  (d) local maxima within one grid step (log step %.4f):%s", d ? "ok    " : "FAILED", step,
                          maxima_text.c_str()));
  return v;
}

Verdict determinism() {
  Verdict v;
  int identical = 0;
  for (const char* name : {"c02_monte_carlo_cooling", "c08_epr_full", "c09_two_cavity"}) {
    const Run& one = run_config(name, 1);
    const Run& many = run_config(name, kWorkers);
    bool same = one.output.tables.size() == many.output.tables.size();
    for (size_t k = 0; same && k < one.output.tables.size(); ++k)
      same = one.output.tables[k].first == many.output.tables[k].first &&
             one.output.tables[k].second.csv() == many.output.tables[k].second.csv();
    same = same && qreservoir::cli::manifest(one.plan, one.output).dump(2) ==
                       qreservoir::cli::manifest(many.plan, many.output).dump(2);
    identical += same ? 1 : 0;
    v.expect(same, fmt("%s: CSV tables and manifest identical at 1 and %d workers (%.0f s, %.0f s)", name, kWorkers,
                       one.seconds, many.seconds));
  }
  v.headline = fmt("determinism across worker counts: %d/3 runs byte-identical", identical);
  return v;
}

const std::vector<std::pair<int, std::function<Verdict()>>>& criteria() {
  static const std::vector<std::pair<int, std::function<Verdict()>>> all = {
      {1, weak_cooling},   {2, monte_carlo_consistency}, {3, thermal_steady_state}, {4, bn_closed_form},
      {5, trapping},       {6, strong_coupling_fidelity}, {7, protocol_timing},     {8, epr_full},
      {9, two_cavity},     {10, fig5_shape},             {11, determinism}};
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the reservoir simulator"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-11); all by default")->check(CLI::Range(0, 11));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const auto& [id, check] : criteria()) {
    if (only != 0 && id != only) continue;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.headline = std::string("error: ") + e.what();
    }
    all_pass = all_pass && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << v.headline << "\n";
    for (const auto& line : v.details) std::cout << "      " << line << "\n";
    std::cout.flush();
  }
  return all_pass ? 0 : 1;
}
