#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wishpow/eigensolve.hpp"
#include "wishpow/ensembles.hpp"
#include "wishpow/error.hpp"
#include "wishpow/json_io.hpp"
#include "wishpow/matrixops.hpp"
#include "wishpow/parallel.hpp"
#include "wishpow/spectral.hpp"

namespace wishpow {

// ---------------------------------------------------------------------------
// Single trials
// ---------------------------------------------------------------------------

struct TrialRecord {
  std::size_t n = 0;
  std::size_t m = 0;
  double s = 0.0;
  double alpha = 0.0;
  std::uint64_t trial_index = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double tol = 0.0;
  bool is_psd = false;
  double wall_time_seconds = 0.0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline void check_s(double s) {
  if (!(s > 0.0 && s <= 1.0)) throw InvalidArgument("s must lie in (0, 1]");
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive");
}

}  // namespace detail

/// A = X Xᵀ / n for X of size floor(n^s) x n drawn with `seed`.
inline SymmetricMatrix sample_wishart(std::size_t n, double s, const EntryLaw& law, const SeedSpec& seed,
                                      unsigned threads = 1) {
  const std::size_t m = rows_for(n, s);
  return wishart(sample_matrix(m, n, law, seed, threads), n, threads);
}

/// Builds B = |A|^alpha and classifies it from the extremal eigenvalues.
inline TrialRecord evaluate_power(const SymmetricMatrix& a, std::size_t n, double s, double alpha,
                                  std::uint64_t trial_index, const PsdTolerance& tol, unsigned threads = 1) {
  const auto t0 = detail::Clock::now();
  const SymmetricMatrix b = hadamard_abs_power(a, alpha);
  const Tridiagonal t = tridiagonalize(b, false, threads);
  const EigenBracket lo = bisect_eigenvalue(t, 0);
  const EigenBracket hi = bisect_eigenvalue(t, b.dim() - 1);
  TrialRecord r;
  r.n = n;
  r.m = b.dim();
  r.s = s;
  r.alpha = alpha;
  r.trial_index = trial_index;
  r.lambda_min = lo.mid();
  r.lambda_max = hi.mid();
  r.tol = tol.resolve(b);
  r.is_psd = r.lambda_min >= -r.tol;
  r.wall_time_seconds = detail::seconds_since(t0);
  return r;
}

/// Samples X, builds A and B, and records the extremal eigenvalues of B.
inline TrialRecord run_trial(std::size_t n, double s, double alpha, const EntryLaw& law, const SeedSpec& seed,
                             const PsdTolerance& tol = {}, unsigned threads = 1) {
  detail::check_s(s);
  detail::check_alpha(alpha);
  const auto t0 = detail::Clock::now();
  const SymmetricMatrix a = sample_wishart(n, s, law, seed, threads);
  TrialRecord r = evaluate_power(a, n, s, alpha, seed.trial_index, tol, threads);
  r.wall_time_seconds = detail::seconds_since(t0);
  return r;
}

// ---------------------------------------------------------------------------
// Phase scans
// ---------------------------------------------------------------------------

struct ScanConfig {
  EntryLaw law = EntryLaw::gaussian();
  double s = 1.0;
  std::vector<std::size_t> n_grid;
  std::vector<double> alpha_grid;
  std::size_t trials = 1;
  std::uint64_t master_seed = 0;
  PsdTolerance psd_tol;
  unsigned threads = 1;

  void validate() const {
    detail::check_s(s);
    if (n_grid.empty() || alpha_grid.empty()) throw InvalidArgument("scan grids must be non-empty");
    if (!std::is_sorted(n_grid.begin(), n_grid.end()) || !std::is_sorted(alpha_grid.begin(), alpha_grid.end()))
      throw InvalidArgument("scan grids must be sorted ascending");
    for (std::size_t n : n_grid) (void)rows_for(n, s);
    for (double a : alpha_grid) detail::check_alpha(a);
    if (trials < 1) throw InvalidArgument("trials must be >= 1");
    if (threads < 1) throw InvalidArgument("threads must be >= 1");
  }
};

struct ScanPoint {
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha = 0.0;
  double frac_negative = 0.0;
  double mean_lambda_min = 0.0;
  double min_lambda_min = 0.0;
  double se = 0.0;        // standard error of mean_lambda_min
  bool critical = false;  // alpha == s: reported, never used for pass/fail
};

struct ScanResult {
  ScanConfig config;
  std::vector<ScanPoint> points;
  std::vector<TrialRecord> records;  // ordered by (n, alpha, trial)
};

inline ScanPoint summarize_trials(std::span<const TrialRecord> recs, double s) {
  ScanPoint p;
  p.n = recs.front().n;
  p.m = recs.front().m;
  p.alpha = recs.front().alpha;
  p.critical = p.alpha == s;
  p.min_lambda_min = recs.front().lambda_min;
  std::size_t negative = 0;
  double sum = 0.0;
  for (const auto& r : recs) {
    if (!r.is_psd) ++negative;
    sum += r.lambda_min;
    p.min_lambda_min = std::min(p.min_lambda_min, r.lambda_min);
  }
  const double count = static_cast<double>(recs.size());
  p.frac_negative = static_cast<double>(negative) / count;
  p.mean_lambda_min = sum / count;
  if (recs.size() > 1) {
    double ss = 0.0;
    for (const auto& r : recs) ss += (r.lambda_min - p.mean_lambda_min) * (r.lambda_min - p.mean_lambda_min);
    p.se = std::sqrt(ss / (count - 1.0) / count);
  }
  return p;
}

/// Every (n, trial) shares one X across the alpha grid; work items are
/// (n, trial) pairs and results land in pre-indexed slots.
inline ScanResult run_phase_scan(const ScanConfig& cfg) {
  cfg.validate();
  const std::size_t nn = cfg.n_grid.size(), na = cfg.alpha_grid.size(), nt = cfg.trials;
  std::vector<TrialRecord> slots(nn * na * nt);
  parallel_for(nn * nt, cfg.threads, [&](std::size_t item) {
    const std::size_t ni = item / nt, t = item % nt;
    const std::size_t n = cfg.n_grid[ni];
    const SeedSpec seed{cfg.master_seed, t};
    const auto t0 = detail::Clock::now();
    const SymmetricMatrix a = sample_wishart(n, cfg.s, cfg.law, seed);
    const double sample_time = detail::seconds_since(t0);
    for (std::size_t ai = 0; ai < na; ++ai) {
      TrialRecord r = evaluate_power(a, n, cfg.s, cfg.alpha_grid[ai], t, cfg.psd_tol);
      r.wall_time_seconds += sample_time;
      slots[(ni * na + ai) * nt + t] = r;
    }
  });
  ScanResult out{cfg, {}, std::move(slots)};
  for (std::size_t g = 0; g < nn * na; ++g)
    out.points.push_back(summarize_trials(std::span<const TrialRecord>(out.records).subspan(g * nt, nt), cfg.s));
  return out;
}

// ---------------------------------------------------------------------------
// Critical-exponent bisection
// ---------------------------------------------------------------------------

struct BoundaryConfig {
  std::size_t n = 1000;
  double s = 1.0;
  EntryLaw law = EntryLaw::gaussian();
  std::size_t trials = 5;
  double rule = 0.5;
  double tol_alpha = 0.02;
  std::uint64_t master_seed = 0;
  PsdTolerance psd_tol;
  unsigned threads = 1;
  double start_alpha = 1.0;
  unsigned max_depth = 12;
};

struct BoundaryProbe {
  double alpha;
  double frac_negative;
};

struct BoundaryEstimate {
  std::size_t n = 0;
  double s = 0.0;
  double alpha_lo = 0.0;
  double alpha_hi = 0.0;
  double alpha_crit = 0.0;
  std::size_t trials_per_probe = 0;
  double decision_rule = 0.5;
  std::vector<BoundaryProbe> probes;  // in probing order
};

/// Number of places where frac_negative increases along the probes sorted by
/// alpha.
inline std::size_t monotonicity_inversions(std::vector<BoundaryProbe> probes) {
  std::sort(probes.begin(), probes.end(), [](const auto& a, const auto& b) { return a.alpha < b.alpha; });
  std::size_t inversions = 0;
  for (std::size_t i = 1; i < probes.size(); ++i)
    if (probes[i].frac_negative > probes[i - 1].frac_negative) ++inversions;
  return inversions;
}

/// Expands from start_alpha by factors of 1.5 until the rule changes side,
/// then bisects. The same X (one per trial) is reused at every probe.
inline BoundaryEstimate estimate_boundary(const BoundaryConfig& cfg) {
  detail::check_s(cfg.s);
  if (!(cfg.rule > 0.0 && cfg.rule < 1.0)) throw InvalidArgument("decision rule must lie in (0, 1)");
  if (!(cfg.tol_alpha > 0.0)) throw InvalidArgument("tol_alpha must be positive");
  if (cfg.trials < 1) throw InvalidArgument("trials must be >= 1");
  constexpr double kAlphaFloor = 0.05, kAlphaCeil = 4.0;
  const std::size_t m = rows_for(cfg.n, cfg.s);

  // Keep the Gram matrices when they fit in ~1 GiB, otherwise resample.
  const bool cache = cfg.trials * SymmetricMatrix::packed_size(m) <= (std::size_t{1} << 27);
  std::vector<std::optional<SymmetricMatrix>> grams(cfg.trials);
  auto gram = [&](std::size_t t) -> SymmetricMatrix {
    if (cache && grams[t]) return *grams[t];
    SymmetricMatrix a = sample_wishart(cfg.n, cfg.s, cfg.law, {cfg.master_seed, t});
    if (cache) grams[t] = a;
    return a;
  };

  BoundaryEstimate est;
  est.n = cfg.n;
  est.s = cfg.s;
  est.trials_per_probe = cfg.trials;
  est.decision_rule = cfg.rule;
  auto probe = [&](double alpha) {
    std::vector<char> negative(cfg.trials, 0);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
      negative[t] = !evaluate_power(gram(t), cfg.n, cfg.s, alpha, t, cfg.psd_tol).is_psd;
    });
    const double frac = static_cast<double>(std::count(negative.begin(), negative.end(), 1)) / static_cast<double>(cfg.trials);
    est.probes.push_back({alpha, frac});
    return frac >= cfg.rule;
  };

  double lo = 0.0, hi = 0.0;
  double alpha = std::clamp(cfg.start_alpha, kAlphaFloor, kAlphaCeil);
  if (probe(alpha)) {
    lo = alpha;
    for (;;) {
      if (alpha >= kAlphaCeil) throw InvalidArgument("boundary bracket not found: negative side up to alpha = 4");
      alpha = std::min(alpha * 1.5, kAlphaCeil);
      if (!probe(alpha)) {
        hi = alpha;
        break;
      }
      lo = alpha;
    }
  } else {
    hi = alpha;
    for (;;) {
      if (alpha <= kAlphaFloor) throw InvalidArgument("boundary bracket not found: PSD side down to alpha = 0.05");
      alpha = std::max(alpha / 1.5, kAlphaFloor);
      if (probe(alpha)) {
        lo = alpha;
        break;
      }
      hi = alpha;
    }
  }
  for (unsigned depth = 0; depth < cfg.max_depth && hi - lo > cfg.tol_alpha; ++depth) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid))
      lo = mid;
    else
      hi = mid;
  }
  est.alpha_lo = lo;
  est.alpha_hi = hi;
  est.alpha_crit = 0.5 * (lo + hi);
  return est;
}

// ---------------------------------------------------------------------------
// Table of smallest eigenvalues at n = 5000
// ---------------------------------------------------------------------------

struct Table1Entry {
  double s;
  double alpha;
  double published_lambda_min;
  bool gated;  // near-critical rows are reported only
};

inline constexpr std::array<Table1Entry, 8> kTable1 = {{
    {1.0, 0.98, -0.288, true},
    {1.0, 0.99, -0.246, false},
    {1.0, 1.06, 0.016, false},
    {1.0, 1.07, 0.046, true},
    {0.8, 0.78, -0.076, true},
    {0.8, 0.79, -0.049, false},
    {0.8, 0.81, 0.017, false},
    {0.8, 0.82, 0.041, true},
}};

struct Table1Row {
  Table1Entry entry;
  std::vector<double> lambda_mins;  // by trial
  double median_lambda_min = 0.0;
  std::size_t sign_agreement = 0;
  std::size_t trials = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of an empty sequence");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Runs the selected rows at dimension n. Rows with equal s share the same
/// X per trial.
inline std::vector<Table1Row> reproduce_table1(std::uint64_t master_seed, std::size_t trials_per_row, unsigned threads = 1,
                                               std::size_t n = 5000, bool gated_only = false) {
  if (trials_per_row < 1) throw InvalidArgument("trials_per_row must be >= 1");
  std::vector<Table1Entry> entries;
  for (const auto& e : kTable1)
    if (e.gated || !gated_only) entries.push_back(e);
  std::vector<double> s_values;
  for (const auto& e : entries)
    if (std::find(s_values.begin(), s_values.end(), e.s) == s_values.end()) s_values.push_back(e.s);

  std::vector<TrialRecord> slots(entries.size() * trials_per_row);
  parallel_for(s_values.size() * trials_per_row, threads, [&](std::size_t item) {
    const double s = s_values[item / trials_per_row];
    const std::size_t t = item % trials_per_row;
    const SymmetricMatrix a = sample_wishart(n, s, EntryLaw::gaussian(), {master_seed, t});
    for (std::size_t r = 0; r < entries.size(); ++r)
      if (entries[r].s == s) slots[r * trials_per_row + t] = evaluate_power(a, n, s, entries[r].alpha, t, {});
  });

  std::vector<Table1Row> rows;
  for (std::size_t r = 0; r < entries.size(); ++r) {
    Table1Row row{entries[r], {}, 0.0, 0, trials_per_row};
    for (std::size_t t = 0; t < trials_per_row; ++t) {
      const TrialRecord& rec = slots[r * trials_per_row + t];
      row.lambda_mins.push_back(rec.lambda_min);
      const bool observed_negative = !rec.is_psd;
      if (observed_negative == (entries[r].published_lambda_min < 0.0)) ++row.sign_agreement;
    }
    row.median_lambda_min = median(row.lambda_mins);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Sub-Gaussian certificate (alpha > 2s regime)
// ---------------------------------------------------------------------------

struct CertificateResult {
  std::size_t n = 0;
  std::size_t m = 0;
  double s = 0.0;
  double alpha = 0.0;
  double eps = 0.0;
  std::string law;
  std::size_t trials = 0;
  std::size_t within = 0;           // lambda_min >= 1-eps and lambda_max <= 1+eps
  std::size_t lambda_min_ok = 0;
  std::size_t lambda_max_ok = 0;
  std::size_t gershgorin_within = 0;  // all Gershgorin intervals inside [1-eps, 1+eps]
  bool alpha_above_2s = true;
  std::vector<double> lambda_mins;
  std::vector<double> lambda_maxs;

  double fraction() const { return static_cast<double>(within) / static_cast<double>(trials); }
};

inline CertificateResult subgaussian_certificate_experiment(std::size_t n, double s, double alpha, const EntryLaw& law,
                                                            double eps, std::size_t trials, std::uint64_t master_seed,
                                                            unsigned threads = 1) {
  detail::check_s(s);
  detail::check_alpha(alpha);
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  const bool sub_gaussian = law.kind() == LawKind::gaussian || law.kind() == LawKind::uniform01;
  if (!sub_gaussian) throw InvalidArgument("certificate experiment needs a sub-Gaussian law: " + law.to_string());
  if (law.kind() != LawKind::gaussian && !law.standardized())
    throw InvalidArgument("certificate experiment needs a mean-0, variance-1 law; use '" + law.to_string() + ":std'");

  CertificateResult res;
  res.n = n;
  res.m = rows_for(n, s);
  res.s = s;
  res.alpha = alpha;
  res.eps = eps;
  res.law = law.to_string();
  res.trials = trials;
  res.alpha_above_2s = alpha > 2.0 * s;
  res.lambda_mins.assign(trials, 0.0);
  res.lambda_maxs.assign(trials, 0.0);
  std::vector<char> gersh(trials, 0);
  parallel_for(trials, threads, [&](std::size_t t) {
    const SymmetricMatrix b = hadamard_abs_power(sample_wishart(n, s, law, {master_seed, t}), alpha);
    bool inside = true;
    for (const auto& g : gershgorin_intervals(b))
      inside = inside && g.center - g.radius >= 1.0 - eps && g.center + g.radius <= 1.0 + eps;
    gersh[t] = inside;
    const auto ext = extreme_eigenvalues(b);
    res.lambda_mins[t] = ext.min.mid();
    res.lambda_maxs[t] = ext.max.mid();
  });
  for (std::size_t t = 0; t < trials; ++t) {
    const bool lo_ok = res.lambda_mins[t] >= 1.0 - eps;
    const bool hi_ok = res.lambda_maxs[t] <= 1.0 + eps;
    res.lambda_min_ok += lo_ok;
    res.lambda_max_ok += hi_ok;
    res.within += lo_ok && hi_ok;
    res.gershgorin_within += gersh[t];
  }
  return res;
}

// ---------------------------------------------------------------------------
// Moments of the centred subcritical matrix E
// ---------------------------------------------------------------------------

struct MomentExperiment {
  MomentReport report;
  EsdSample pooled;  // eigenvalues of E over all trials
};

/// Moment estimates use trace identities per matrix (Tr E / m, ||E||_F^2 / m,
/// ||E^2||_F^2 / m), averaged over trials; these are the moments of the
/// pooled ESD, and the first is exactly zero because diag(E) = 0.
inline std::vector<MomentExperiment> moment_convergence_experiment(const std::vector<std::size_t>& n_grid, double s,
                                                                   double alpha, std::size_t trials,
                                                                   std::uint64_t master_seed, unsigned threads = 1,
                                                                   const EntryLaw& law = EntryLaw::gaussian()) {
  detail::check_s(s);
  detail::check_alpha(alpha);
  if (!(alpha < s)) throw InvalidArgument("moment experiment needs alpha < s");
  if (n_grid.empty()) throw InvalidArgument("n grid must be non-empty");
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  const MomentTargets targets = moment_targets(alpha);
  std::vector<MomentExperiment> out;
  for (std::size_t n : n_grid) {
    const WishartContext ctx = make_context(n, s, alpha);
    std::vector<std::array<double, 3>> moments(trials);
    std::vector<EsdSample> esds(trials);
    parallel_for(trials, threads, [&](std::size_t t) {
      const SymmetricMatrix b = hadamard_abs_power(sample_wishart(n, s, law, {master_seed, t}), alpha);
      const SymmetricMatrix e = subcritical_split(b, ctx).e;
      const double m = static_cast<double>(ctx.m);
      const double fro = e.frobenius_norm();
      moments[t] = {e.trace() / m, fro * fro / m, trace_moment(e, 2) / m};
      esds[t] = esd(eigen_spectrum(e));
    });
    MomentExperiment res;
    res.report.alpha = alpha;
    res.report.n = n;
    res.report.s = s;
    res.report.trials = trials;
    res.report.m1_target = targets.m1;
    res.report.m2_target = targets.m2;
    res.report.m4_target = targets.m4;
    for (const auto& mo : moments) {
      res.report.m1_hat += mo[0];
      res.report.m2_hat += mo[1];
      res.report.m4_hat += mo[2];
    }
    const double tt = static_cast<double>(trials);
    res.report.m1_hat /= tt;
    res.report.m2_hat /= tt;
    res.report.m4_hat /= tt;
    res.pooled = pool(esds);
    out.push_back(std::move(res));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rank-two perturbation of E under row resampling
// ---------------------------------------------------------------------------

struct RankPerturbationResult {
  std::size_t n = 0;
  std::size_t m = 0;
  double s = 0.0;
  double alpha = 0.0;
  double bound = 0.0;  // 2 / m
  std::vector<std::size_t> rows;
  std::vector<double> distances;
  double max_distance = 0.0;
};

/// Stream tag for resample r; row index and replacement draws come from
/// derive_stream(seed).substream(kResampleTag + r).
inline constexpr std::uint64_t kResampleTag = 0x5245534D504C0000ULL;

/// One Gram entry, accumulated in the same order as wishart().
inline double gram_entry(const RectMatrix& x, std::size_t i, std::size_t j) {
  const auto ri = x.row(i), rj = x.row(j);
  double acc = 0.0;
  for (std::size_t k = 0; k < x.cols(); ++k) acc += ri[k] * rj[k];
  return acc / static_cast<double>(x.cols());
}

/// For each resample, redraws one row of X, rebuilds E and checks
/// d_KS(ESD(E), ESD(E')) <= 2/m. A violation throws InvariantFailure.
inline RankPerturbationResult rank_perturbation_check(std::size_t n, double s, double alpha, const SeedSpec& seed,
                                                      std::size_t resamples, unsigned threads = 1,
                                                      const EntryLaw& law = EntryLaw::gaussian()) {
  detail::check_s(s);
  detail::check_alpha(alpha);
  if (resamples < 1) throw InvalidArgument("resamples must be >= 1");
  const WishartContext ctx = make_context(n, s, alpha);
  const RectMatrix x = sample_matrix(ctx.m, n, law, seed);
  const SymmetricMatrix a = wishart(x, n);
  const EsdSample base = esd(eigen_spectrum(subcritical_split(hadamard_abs_power(a, alpha), ctx).e));

  RankPerturbationResult res;
  res.n = n;
  res.m = ctx.m;
  res.s = s;
  res.alpha = alpha;
  res.bound = 2.0 / static_cast<double>(ctx.m);
  res.rows.assign(resamples, 0);
  res.distances.assign(resamples, 0.0);
  const StreamState stream = derive_stream(seed);
  parallel_for(resamples, threads, [&](std::size_t r) {
    const StreamState rs = stream.substream(kResampleTag + r);
    const std::size_t row = static_cast<std::size_t>(rs.bits(0) % ctx.m);
    RectMatrix xr = x;
    fill_draws(xr.row(row), 0, law, rs.substream(1));
    SymmetricMatrix ar = a;
    for (std::size_t j = 0; j < ctx.m; ++j) ar.set(row, j, gram_entry(xr, row, j));
    const EsdSample pert = esd(eigen_spectrum(subcritical_split(hadamard_abs_power(ar, alpha), ctx).e));
    res.rows[r] = row;
    res.distances[r] = ks_distance(base, pert);
  });
  res.max_distance = *std::max_element(res.distances.begin(), res.distances.end());
  for (std::size_t r = 0; r < resamples; ++r) {
    // distances are multiples of 1/m; the slack only absorbs rounding of the quotient
    if (res.distances[r] > res.bound * (1.0 + 1e-12))
      throw InvariantFailure("rank perturbation bound violated: resample " + std::to_string(r) + " (row " +
                             std::to_string(res.rows[r]) + ") has d_KS = " + std::to_string(res.distances[r]) +
                             " > 2/m = " + std::to_string(res.bound));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Trace-moment decay of the supercritical centred matrix
// ---------------------------------------------------------------------------

struct TraceDecayPoint {
  std::size_t n = 0;
  std::size_t m = 0;
  double mean = 0.0;
  double se = 0.0;
  std::vector<double> values;  // by trial
};

struct TraceDecayResult {
  unsigned k = 1;
  double s = 0.0;
  double alpha = 0.0;
  bool above_threshold = true;  // alpha > (k+1)/k * s
  std::vector<TraceDecayPoint> points;
};

inline TraceDecayResult trace_decay_experiment(unsigned k, double s, double alpha, const std::vector<std::size_t>& n_grid,
                                               std::size_t trials, std::uint64_t master_seed, unsigned threads = 1) {
  detail::check_s(s);
  detail::check_alpha(alpha);
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  if (n_grid.empty()) throw InvalidArgument("n grid must be non-empty");
  TraceDecayResult res;
  res.k = k;
  res.s = s;
  res.alpha = alpha;
  res.above_threshold = alpha > (static_cast<double>(k) + 1.0) / static_cast<double>(k) * s;
  for (std::size_t n : n_grid) {
    const WishartContext ctx = make_context(n, s, alpha);
    TraceDecayPoint p;
    p.n = n;
    p.m = ctx.m;
    p.values.assign(trials, 0.0);
    parallel_for(trials, threads, [&](std::size_t t) {
      const SymmetricMatrix b = hadamard_abs_power(sample_wishart(n, s, EntryLaw::gaussian(), {master_seed, t}), alpha);
      p.values[t] = trace_moment(supercritical_center(b, ctx), k);
    });
    double sum = 0.0;
    for (double v : p.values) sum += v;
    const double tt = static_cast<double>(trials);
    p.mean = sum / tt;
    if (trials > 1) {
      double ss = 0.0;
      for (double v : p.values) ss += (v - p.mean) * (v - p.mean);
      p.se = std::sqrt(ss / (tt - 1.0) / tt);
    }
    res.points.push_back(std::move(p));
  }
  return res;
}

/// Each step must decrease the mean by more than z pooled standard errors
/// sqrt(se_a^2 + se_b^2).
inline bool strictly_decreasing(const TraceDecayResult& r, double z = 2.0) {
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const auto& a = r.points[i - 1];
    const auto& b = r.points[i];
    const double pooled = std::sqrt(a.se * a.se + b.se * b.se);
    if (!(a.mean - b.mean > z * pooled)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Horn-Fitzgerald matrices
// ---------------------------------------------------------------------------

struct HfResult {
  std::size_t n = 0;
  double alpha = 0.0;
  std::vector<double> eps_grid;
  std::vector<double> lambda_mins;
  std::vector<double> scales;  // ||B||_F per eps
  double min_lambda = 0.0;
  double argmin_eps = 0.0;
};

inline HfResult hf_counterexample(std::size_t n, double alpha, const std::vector<double>& eps_grid) {
  if (n < 3) throw InvalidArgument("hf_counterexample needs n >= 3");
  detail::check_alpha(alpha);
  if (eps_grid.empty()) throw InvalidArgument("eps grid must be non-empty");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0)) throw InvalidArgument("eps grid must be positive");
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) throw InvalidArgument("eps grid must be descending");
  }
  HfResult res;
  res.n = n;
  res.alpha = alpha;
  res.eps_grid = eps_grid;
  for (double eps : eps_grid) {
    const SymmetricMatrix b = hadamard_abs_power(horn_fitzgerald_matrix(n, eps), alpha);
    res.lambda_mins.push_back(lambda_min(b));
    res.scales.push_back(b.frobenius_norm());
  }
  const auto it = std::min_element(res.lambda_mins.begin(), res.lambda_mins.end());
  res.min_lambda = *it;
  res.argmin_eps = eps_grid[static_cast<std::size_t>(it - res.lambda_mins.begin())];
  return res;
}

// ---------------------------------------------------------------------------
// JSON / CSV
// ---------------------------------------------------------------------------

inline Json tol_to_json(const PsdTolerance& tol) { return tol.is_auto() ? Json("auto") : Json(*tol.value); }

inline PsdTolerance tol_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "auto") throw InvalidArgument("tolerance must be \"auto\" or a number");
    return PsdTolerance::automatic();
  }
  return PsdTolerance::fixed(j.get<double>());
}

inline Json to_json(const ScanConfig& c) {
  return Json{{"law", c.law.to_string()},     {"s", c.s},
              {"n_grid", c.n_grid},           {"alpha_grid", c.alpha_grid},
              {"trials", c.trials},           {"master_seed", c.master_seed},
              {"tol", tol_to_json(c.psd_tol)}};
}

inline ScanConfig scan_config_from_json(const Json& j) {
  ScanConfig c;
  c.law = EntryLaw::parse(j.at("law").get<std::string>());
  c.s = j.at("s").get<double>();
  c.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
  c.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
  c.trials = j.at("trials").get<std::size_t>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.psd_tol = tol_from_json(j.at("tol"));
  return c;
}

inline Json to_json(const ScanResult& r) {
  Json points = Json::array();
  for (const auto& p : r.points)
    points.push_back(Json{{"n", p.n},
                          {"m", p.m},
                          {"alpha", p.alpha},
                          {"frac_negative", p.frac_negative},
                          {"mean_lambda_min", p.mean_lambda_min},
                          {"min_lambda_min", p.min_lambda_min},
                          {"se", p.se},
                          {"critical", p.critical}});
  return Json{{"config", to_json(r.config)}, {"points", std::move(points)}};
}

inline void write_trial_csv(std::ostream& os, std::span<const TrialRecord> records) {
  os << "n,m,s,alpha,trial,lambda_min,lambda_max,is_psd,seconds\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%llu,%.17g,%.17g,%d,%.17g\n", r.n, r.m, r.s, r.alpha,
                  static_cast<unsigned long long>(r.trial_index), r.lambda_min, r.lambda_max, r.is_psd ? 1 : 0,
                  r.wall_time_seconds);
    os << buf;
  }
}

inline Json to_json(const MomentReport& r) {
  return Json{{"m1_hat", r.m1_hat},       {"m2_hat", r.m2_hat},       {"m4_hat", r.m4_hat},
              {"m1_target", r.m1_target}, {"m2_target", r.m2_target}, {"m4_target", r.m4_target},
              {"alpha", r.alpha},         {"n", r.n},                 {"s", r.s},
              {"trials", r.trials}};
}

inline MomentReport moment_report_from_json(const Json& j) {
  MomentReport r;
  r.m1_hat = j.at("m1_hat").get<double>();
  r.m2_hat = j.at("m2_hat").get<double>();
  r.m4_hat = j.at("m4_hat").get<double>();
  r.m1_target = j.at("m1_target").get<double>();
  r.m2_target = j.at("m2_target").get<double>();
  r.m4_target = j.at("m4_target").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.s = j.at("s").get<double>();
  r.trials = j.at("trials").get<std::size_t>();
  return r;
}

inline Json to_json(const BoundaryEstimate& b) {
  Json probes = Json::array();
  for (const auto& p : b.probes) probes.push_back(Json{{"alpha", p.alpha}, {"frac_negative", p.frac_negative}});
  return Json{{"n", b.n},
              {"s", b.s},
              {"alpha_lo", b.alpha_lo},
              {"alpha_hi", b.alpha_hi},
              {"alpha_crit", b.alpha_crit},
              {"trials_per_probe", b.trials_per_probe},
              {"decision_rule", b.decision_rule},
              {"probes", std::move(probes)}};
}

inline Json to_json(const std::vector<Table1Row>& rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back(Json{{"s", r.entry.s},
                       {"alpha", r.entry.alpha},
                       {"published_lambda_min", r.entry.published_lambda_min},
                       {"gated", r.entry.gated},
                       {"median_lambda_min", r.median_lambda_min},
                       {"sign_agreement", r.sign_agreement},
                       {"trials", r.trials},
                       {"lambda_min", r.lambda_mins}});
  return out;
}

inline Json to_json(const CertificateResult& c) {
  return Json{{"n", c.n},
              {"m", c.m},
              {"s", c.s},
              {"alpha", c.alpha},
              {"eps", c.eps},
              {"law", c.law},
              {"trials", c.trials},
              {"fraction_within", c.fraction()},
              {"lambda_min_ok", c.lambda_min_ok},
              {"lambda_max_ok", c.lambda_max_ok},
              {"gershgorin_within", c.gershgorin_within},
              {"alpha_above_2s", c.alpha_above_2s},
              {"lambda_min", c.lambda_mins},
              {"lambda_max", c.lambda_maxs}};
}

inline Json to_json(const RankPerturbationResult& r) {
  return Json{{"n", r.n},         {"m", r.m},
              {"s", r.s},         {"alpha", r.alpha},
              {"bound", r.bound}, {"max_distance", r.max_distance},
              {"rows", r.rows},   {"distances", r.distances}};
}

inline Json to_json(const TraceDecayResult& r) {
  Json points = Json::array();
  for (const auto& p : r.points)
    points.push_back(Json{{"n", p.n}, {"m", p.m}, {"mean", p.mean}, {"se", p.se}, {"values", p.values}});
  return Json{{"k", r.k},
              {"s", r.s},
              {"alpha", r.alpha},
              {"above_threshold", r.above_threshold},
              {"points", std::move(points)}};
}

inline Json to_json(const HfResult& r) {
  return Json{{"n", r.n},
              {"alpha", r.alpha},
              {"eps_grid", r.eps_grid},
              {"lambda_min", r.lambda_mins},
              {"scale", r.scales},
              {"min_lambda", r.min_lambda},
              {"argmin_eps", r.argmin_eps}};
}

}  // namespace wishpow
