// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run everything
//   acceptance 4 5 9      run selected criteria
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "wishpow/eigensolve.hpp"
#include "wishpow/experiments.hpp"
#include "wishpow/json_io.hpp"
#include "wishpow/parallel.hpp"
#include "wishpow/spectral.hpp"

using namespace wishpow;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned workers() { return std::max(1u, default_threads()); }

// 1. Sign of lambda_min at n = 5000 on the four rows away from the boundary.
Verdict table1_signs() {
  const auto rows = reproduce_table1(20240101, 5, workers(), 5000, true);
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    ok = ok && r.sign_agreement >= 4;
    detail += fmt("(s=%.1f a=%.2f: %zu/5 median %+.3f ref %+.3f) ", r.entry.s, r.entry.alpha, r.sign_agreement,
                  r.median_lambda_min, r.entry.published_lambda_min);
  }
  return {ok, detail};
}

// 2. frac_negative = 1 at alpha = 0.85 and 0 at alpha = 1.30 (n = 2000, s = 1).
Verdict phase_dichotomy() {
  ScanConfig cfg;
  cfg.s = 1.0;
  cfg.n_grid = {2000};
  cfg.alpha_grid = {0.85, 1.30};
  cfg.trials = 10;
  cfg.master_seed = 2;
  cfg.threads = workers();
  const auto r = run_phase_scan(cfg);
  const auto& lo = r.points[0];
  const auto& hi = r.points[1];
  return {lo.frac_negative == 1.0 && hi.frac_negative == 0.0,
          fmt("frac_negative(0.85) = %.2f (mean lambda_min %+.4f), frac_negative(1.30) = %.2f (mean lambda_min %+.4f)",
              lo.frac_negative, lo.mean_lambda_min, hi.frac_negative, hi.mean_lambda_min)};
}

// 3. Spectrum of B inside [0.7, 1.3] in >= 9/10 trials (n = 4000, s = 0.4, alpha = 1).
Verdict subgaussian_window() {
  bool ok = true;
  std::string detail;
  for (const auto& law : {EntryLaw::gaussian(), EntryLaw::uniform01(true)}) {
    const auto r = subgaussian_certificate_experiment(4000, 0.4, 1.0, law, 0.3, 10, 3, workers());
    ok = ok && r.within >= 9;
    const double worst_min = *std::min_element(r.lambda_mins.begin(), r.lambda_mins.end());
    const double worst_max = *std::max_element(r.lambda_maxs.begin(), r.lambda_maxs.end());
    detail += fmt("[%s m=%zu: within %zu/10, lambda_min>=0.7 in %zu, lambda_max<=1.3 in %zu, min lambda_min %.3f, "
                  "max lambda_max %.3f] ",
                  r.law.c_str(), r.m, r.within, r.lambda_min_ok, r.lambda_max_ok, worst_min, worst_max);
  }
  return {ok, detail};
}

// 4. ell_alpha against adaptive quadrature.
Verdict ell_closed_form() {
  double worst = 0.0;
  for (int i = 1; i <= 30; ++i) {
    const double a = 0.1 * i;
    worst = std::max(worst, std::abs(ell_alpha(a) - oracle::ell_quadrature(a)));
  }
  const double e2 = std::abs(ell_alpha(2.0) - 1.0), e4 = std::abs(ell_alpha(4.0) - 3.0);
  return {worst <= 1e-10 && e2 <= 1e-12 && e4 <= 1e-12,
          fmt("max |ell - quad| = %.2e over 0.1..3.0; |ell_2 - 1| = %.2e; |ell_4 - 3| = %.2e", worst, e2, e4)};
}

// 5. I(rho) anchors and Monte Carlo agreement.
Verdict bivariate_suite() {
  bool ok = true;
  double zero = 0.0, even = 0.0, isserlis = 0.0, worst_z = 0.0;
  for (double a : {0.5, 1.0, 1.7}) {
    zero = std::max(zero, std::abs(bivariate_I(0.0, a)));
    for (double rho : {0.1, 0.5, 0.9}) even = std::max(even, std::abs(bivariate_I(rho, a) - bivariate_I(-rho, a)));
  }
  for (double rho : {0.2, 0.7}) isserlis = std::max(isserlis, std::abs(bivariate_I(rho, 2.0) - 2.0 * rho * rho));
  std::uint64_t seed = 500;
  for (double rho : {0.3, 0.8})
    for (double a : {0.5, 1.7}) {
      const auto mc = oracle::bivariate_I_mc(rho, a, 1000000, seed++);
      worst_z = std::max(worst_z, std::abs(bivariate_I(rho, a) - mc.mean) / mc.se);
    }
  ok = zero <= 1e-12 && even <= 1e-12 && isserlis <= 1e-8 && worst_z <= 3.0;
  return {ok, fmt("|I(0)| = %.2e, max evenness gap = %.2e, max |I - 2rho^2| (a=2) = %.2e, max MC z-score = %.2f", zero,
                  even, isserlis, worst_z)};
}

// 6. conditional_Y against Monte Carlo over a fresh middle row.
Verdict conditional_y() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  double worst_z = 0.0;
  std::uint64_t seed = 600;
  for (int pair = 0; pair < 5; ++pair) {
    std::vector<double> ri(500), rj(500);
    for (auto& v : ri) v = z(rng);
    for (auto& v : rj) v = z(rng);
    const RowPair p = make_row_pair(ri, rj);
    for (double a : {0.7, 1.3}) {
      const auto mc = oracle::conditional_Y_mc(ri, rj, a, 100000, seed++);
      worst_z = std::max(worst_z, std::abs(conditional_Y(p, a) - mc.mean) / mc.se);
    }
  }
  return {worst_z <= 4.0, fmt("max |Y - MC| / SE = %.2f over 5 pairs x alpha {0.7, 1.3}", worst_z)};
}

// 7. Moments of E at n = 4000, s = 0.9, alpha = 0.6.
Verdict moment_targets_check() {
  const auto res = moment_convergence_experiment({4000}, 0.9, 0.6, 10, 7, workers());
  const auto& r = res[0].report;
  const double rel2 = std::abs(r.m2_hat - r.m2_target) / r.m2_target;
  const double cap4 = 3.0 * r.m4_target;
  return {r.m1_hat == 0.0 && rel2 <= 0.1 && r.m4_hat <= cap4,
          fmt("m1_hat = %g, m2_hat = %.5f vs %.5f (rel %.3f), m4_hat = %.5f <= %.5f; pooled ESD m2 = %.5f", r.m1_hat,
              r.m2_hat, r.m2_target, rel2, r.m4_hat, cap4, esd_moment(res[0].pooled, 2))};
}

// 8. Rank-two perturbation bound on 50 single-row resamples.
Verdict rank_perturbation() {
  try {
    const auto r = rank_perturbation_check(1000, 0.8, 0.5, {8, 0}, 50, workers());
    return {true, fmt("max d_KS = %.5f <= 2/m = %.5f (m = %zu), 0 violations", r.max_distance, r.bound, r.m)};
  } catch (const InvariantFailure& e) {
    return {false, e.what()};
  }
}

// 9. Closed-walk enumeration equals Tr(C^(2k)).
Verdict walk_expansion() {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (std::size_t m = 2; m <= 5; ++m)
    for (unsigned k = 1; k <= 3; ++k)
      for (int rep = 0; rep < 20; ++rep) {
        const auto c = oracle::random_symmetric(m, rng, true);
        const double ref = trace_moment(c, k);
        worst = std::max(worst, std::abs(walk_trace_oracle(c, k) - ref) / std::abs(ref));
      }
  return {worst <= 1e-10, fmt("max relative difference = %.2e over 240 matrices", worst)};
}

// 10. E Tr(C^4) decreasing in n (k = 2, s = 1, alpha = 1.6).
Verdict trace_decay() {
  const auto r = trace_decay_experiment(2, 1.0, 1.6, {200, 400, 800}, 30, 10, workers());
  std::string detail;
  for (const auto& p : r.points) detail += fmt("n=%zu: %.4f +- %.4f  ", p.n, p.mean, p.se);
  return {strictly_decreasing(r, 2.0), detail};
}

// 11. Eigensolver residuals, identities and Gershgorin containment.
Verdict eigensolver_soundness() {
  std::mt19937_64 rng(11);
  double worst_res = 0.0, worst_trace = 0.0, worst_fro = 0.0;
  std::size_t outside = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 1 + static_cast<std::size_t>(rep * 37 % 200);
    const auto a = oracle::random_symmetric(m, rng);
    const auto spec = eigen_spectrum(a);
    double sum = 0.0, sq = 0.0;
    for (double l : spec.eigenvalues) {
      sum += l;
      sq += l * l;
    }
    const double fro = a.frobenius_norm();
    worst_res = std::max(worst_res, spec.max_residual);
    worst_trace = std::max(worst_trace, std::abs(sum - a.trace()) / fro);
    worst_fro = std::max(worst_fro, std::abs(sq - fro * fro) / (fro * fro));
    const auto iv = gershgorin_intervals(a);
    const double slack = 1e-10 * fro;
    for (double l : spec.eigenvalues)
      if (std::none_of(iv.begin(), iv.end(), [&](const auto& g) {
            return l >= g.center - g.radius - slack && l <= g.center + g.radius + slack;
          }))
        ++outside;
  }
  return {worst_res <= 1e-8 && worst_trace <= 1e-8 && worst_fro <= 1e-8 && outside == 0,
          fmt("max residual %.2e, trace gap %.2e, Frobenius gap %.2e, eigenvalues outside Gershgorin: %zu", worst_res,
              worst_trace, worst_fro, outside)};
}

// 12. Horn-Fitzgerald matrices: alpha = 2.5 breaks PSD, 2 and 3.5 do not.
Verdict horn_fitzgerald() {
  const std::vector<double> eps{0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
  const auto bad = hf_counterexample(5, 2.5, eps);
  bool ok = bad.min_lambda < 0.0;
  std::string detail = fmt("alpha=2.5: min lambda_1 = %.3e at eps = %g; ", bad.min_lambda, bad.argmin_eps);
  for (double a : {2.0, 3.5}) {
    const auto r = hf_counterexample(5, a, eps);
    double worst = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      ok = ok && r.lambda_mins[i] >= -1e-10 * r.scales[i];
      worst = std::min(worst, r.lambda_mins[i] / r.scales[i]);
    }
    detail += fmt("alpha=%g: min lambda_1/scale = %.2e; ", a, worst);
  }
  return {ok, detail};
}

// 13. Byte-identical JSON for every experiment across thread counts.
Verdict determinism() {
  std::vector<std::pair<const char*, std::function<std::string(unsigned)>>> runs{
      {"scan",
       [](unsigned t) {
         ScanConfig cfg;
         cfg.s = 0.9;
         cfg.n_grid = {300, 600};
         cfg.alpha_grid = {0.6, 0.9, 1.2};
         cfg.trials = 4;
         cfg.master_seed = 13;
         cfg.threads = t;
         return dump_json(to_json(run_phase_scan(cfg)));
       }},
      {"boundary",
       [](unsigned t) {
         BoundaryConfig cfg;
         cfg.n = 300;
         cfg.trials = 4;
         cfg.tol_alpha = 0.05;
         cfg.master_seed = 13;
         cfg.threads = t;
         return dump_json(to_json(estimate_boundary(cfg)));
       }},
      {"table1", [](unsigned t) { return dump_json(to_json(reproduce_table1(13, 3, t, 300))); }},
      {"moments",
       [](unsigned t) {
         Json arr = Json::array();
         for (const auto& r : moment_convergence_experiment({200, 400}, 0.9, 0.6, 3, 13, t)) arr.push_back(to_json(r.report));
         return dump_json(arr);
       }},
      {"ks-check", [](unsigned t) { return dump_json(to_json(rank_perturbation_check(300, 0.8, 0.5, {13, 0}, 6, t))); }},
      {"certify",
       [](unsigned t) {
         return dump_json(to_json(subgaussian_certificate_experiment(2000, 0.4, 1.0, EntryLaw::gaussian(), 0.3, 4, 13, t)));
       }},
      {"trace-decay", [](unsigned t) { return dump_json(to_json(trace_decay_experiment(2, 1.0, 1.6, {100, 200}, 4, 13, t))); }},
  };
  std::string detail;
  bool ok = true;
  for (const auto& [name, fn] : runs) {
    const std::string ref = fn(1);
    bool same = ref == fn(1);
    for (unsigned t : {2u, 4u}) same = same && ref == fn(t);
    ok = ok && same;
    detail += fmt("%s:%s ", name, same ? "identical" : "DIFFERS");
  }
  return {ok, detail + "(threads 1, 1, 2, 4)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "reference table signs at n=5000", table1_signs},
      {2, "phase dichotomy at n=2000", phase_dichotomy},
      {3, "sub-Gaussian spectrum window", subgaussian_window},
      {4, "ell_alpha closed form", ell_closed_form},
      {5, "I(rho) suite", bivariate_suite},
      {6, "conditional_Y vs Monte Carlo", conditional_y},
      {7, "moment targets of E", moment_targets_check},
      {8, "rank-perturbation invariant", rank_perturbation},
      {9, "walk-expansion oracle", walk_expansion},
      {10, "trace decay", trace_decay},
      {11, "eigensolver soundness", eigensolver_soundness},
      {12, "Horn-Fitzgerald demo", horn_fitzgerald},
      {13, "determinism across thread counts", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    std::printf("%s [%2d] %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
