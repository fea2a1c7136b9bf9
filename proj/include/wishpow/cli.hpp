#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wishpow/error.hpp"
#include "wishpow/experiments.hpp"
#include "wishpow/json_io.hpp"
#include "wishpow/parallel.hpp"
#include "wishpow/spectral.hpp"

namespace wishpow::cli {

enum ExitCode : int { kOk = 0, kInvalidArguments = 1, kInvariantFailure = 2, kRuntimeError = 3 };

// ---------------------------------------------------------------------------
// Grid parsing
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw InvalidArgument("not a finite number: '" + text + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

// 12 significant digits hide the rounding of lo + i * step.
inline double snap(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::stod(buf);
}

}  // namespace detail

/// "a,b,c" or "lo:hi:step" (inclusive of hi up to rounding).
inline std::vector<double> parse_grid(const std::string& text) {
  if (text.empty()) throw InvalidArgument("empty grid");
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = detail::split(text, ':');
    if (parts.size() != 3) throw InvalidArgument("range grid must be lo:hi:step, got '" + text + "'");
    const double lo = detail::parse_number(parts[0]);
    const double hi = detail::parse_number(parts[1]);
    const double step = detail::parse_number(parts[2]);
    if (!(step > 0.0)) throw InvalidArgument("range step must be positive");
    if (hi < lo) throw InvalidArgument("range grid needs lo <= hi");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (count > 1000000) throw InvalidArgument("range grid has too many points");
    for (std::size_t i = 0; i < count; ++i) out.push_back(detail::snap(lo + static_cast<double>(i) * step));
    return out;
  }
  for (const auto& part : detail::split(text, ',')) out.push_back(detail::parse_number(part));
  return out;
}

inline std::vector<std::size_t> parse_size_grid(const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_grid(text)) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e12) throw InvalidArgument("expected positive integers in grid '" + text + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline PsdTolerance parse_tolerance(const std::string& text) {
  if (text == "auto") return PsdTolerance::automatic();
  return PsdTolerance::fixed(detail::parse_number(text));
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

struct HistogramBin {
  double left;
  double right;
  double density;
};

/// Equal-width bins over [min, max]; a degenerate sample is widened to
/// [x - 0.5, x + 0.5].
inline std::vector<HistogramBin> emit_histogram(const EsdSample& e, std::size_t bins) {
  if (bins < 1) throw InvalidArgument("bins must be >= 1");
  if (e.eigenvalues.empty()) throw InvalidArgument("histogram of an empty sample");
  double lo = e.eigenvalues.front(), hi = e.eigenvalues.back();
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double x : e.eigenvalues) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    if (b >= bins) b = bins - 1;
    ++counts[b];
  }
  std::vector<HistogramBin> out;
  const double total = static_cast<double>(e.total());
  for (std::size_t b = 0; b < bins; ++b) {
    const double left = lo + static_cast<double>(b) * width;
    const double right = b + 1 == bins ? hi : lo + static_cast<double>(b + 1) * width;
    out.push_back({left, right, static_cast<double>(counts[b]) / (total * (right - left))});
  }
  return out;
}

inline void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& bins) {
  os << "bin_left,bin_right,density\n";
  char buf[96];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", b.left, b.right, b.density);
    os << buf;
  }
}

/// Pooled ESD of E over `trials` draws at one (n, s, alpha).
inline EsdSample pooled_esd(std::size_t n, double s, double alpha, const EntryLaw& law, std::size_t trials,
                            std::uint64_t master_seed, unsigned threads = 1) {
  if (!(alpha < s)) throw InvalidArgument("the centred matrix E needs alpha < s");
  const WishartContext ctx = make_context(n, s, alpha);
  std::vector<EsdSample> esds(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    const SymmetricMatrix b = hadamard_abs_power(sample_wishart(n, s, law, {master_seed, t}), alpha);
    esds[t] = esd(eigen_spectrum(subcritical_split(b, ctx).e));
  });
  return pool(esds);
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace detail {

struct Common {
  std::uint64_t seed = 0;
  std::size_t trials = 0;  // 0: subcommand default
  std::string out;
  unsigned threads = 0;  // 0: environment fallback
  std::string law = "gaussian";

  unsigned resolved_threads() const { return threads ? threads : default_threads(); }
  std::size_t trials_or(std::size_t fallback) const { return trials ? trials : fallback; }
};

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "master seed (u64)");
  sub->add_option("--trials", c.trials, "trials per point")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output path (default: standard output)");
  sub->add_option("--threads", c.threads, std::string("worker threads (default: $") + kThreadsEnv + " or 1)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--law", c.law, "entry law: gaussian|uniform01|exp1|cauchy|pareto:<b>, optional ':std'");
}

inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
  f.close();
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace detail

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return kInvalidArguments;
  if (dynamic_cast<const InvariantFailure*>(&e)) return kInvariantFailure;
  return kRuntimeError;
}

/// Parses args (without the program name) and runs one subcommand.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entrywise powers of Wishart matrices: simulations and spectral checks", "wishpow"};
  app.require_subcommand(1);
  detail::Common common;
  std::function<void()> action;

  // scan
  std::string n_text, alpha_text, tol_text = "auto", csv_path;
  double s = 1.0, alpha = 1.0;
  std::size_t n = 0;
  auto* scan = app.add_subcommand("scan", "frac_negative and lambda_min over an (n, alpha) grid");
  detail::add_common(scan, common);
  scan->add_option("--s", s, "row exponent s in (0, 1]")->required();
  scan->add_option("--n", n_text, "n grid, e.g. 500,1000 or 500:2000:500")->required();
  scan->add_option("--alpha", alpha_text, "alpha grid")->required();
  scan->add_option("--tol", tol_text, "PSD tolerance: auto or a number");
  scan->add_option("--csv", csv_path, "also write per-trial records as CSV");
  scan->callback([&] {
    action = [&] {
      ScanConfig cfg;
      cfg.law = EntryLaw::parse(common.law);
      cfg.s = s;
      cfg.n_grid = parse_size_grid(n_text);
      cfg.alpha_grid = parse_grid(alpha_text);
      cfg.trials = common.trials_or(5);
      cfg.master_seed = common.seed;
      cfg.psd_tol = parse_tolerance(tol_text);
      cfg.threads = common.resolved_threads();
      cfg.validate();
      const ScanResult r = run_phase_scan(cfg);
      if (!csv_path.empty()) {
        std::ostringstream os;
        write_trial_csv(os, r.records);
        detail::emit(csv_path, os.str(), out);
      }
      detail::emit(common.out, dump_json(to_json(r)), out);
    };
  });

  // boundary
  BoundaryConfig bcfg;
  auto* boundary = app.add_subcommand("boundary", "bisect for the alpha where frac_negative crosses the rule");
  detail::add_common(boundary, common);
  boundary->add_option("--s", bcfg.s, "row exponent s in (0, 1]")->required();
  boundary->add_option("--n", bcfg.n, "dimension n")->required()->check(CLI::PositiveNumber);
  boundary->add_option("--rule", bcfg.rule, "decision rule on frac_negative")->capture_default_str();
  boundary->add_option("--tol-alpha", bcfg.tol_alpha, "stop when the bracket is this narrow")->capture_default_str();
  boundary->add_option("--start", bcfg.start_alpha, "first alpha probed")->capture_default_str();
  boundary->add_option("--tol", tol_text, "PSD tolerance: auto or a number");
  boundary->callback([&] {
    action = [&] {
      bcfg.law = EntryLaw::parse(common.law);
      bcfg.trials = common.trials_or(5);
      bcfg.master_seed = common.seed;
      bcfg.psd_tol = parse_tolerance(tol_text);
      bcfg.threads = common.resolved_threads();
      detail::emit(common.out, dump_json(to_json(estimate_boundary(bcfg))), out);
    };
  });

  // table1
  std::size_t table_n = 5000;
  bool gated_only = false;
  auto* table1 = app.add_subcommand("table1", "smallest eigenvalues for the eight reference rows");
  detail::add_common(table1, common);
  table1->add_option("--n", table_n, "dimension n")->capture_default_str()->check(CLI::PositiveNumber);
  table1->add_flag("--gated-only", gated_only, "only the four rows away from the boundary");
  table1->callback([&] {
    action = [&] {
      const auto rows = reproduce_table1(common.seed, common.trials_or(5), common.resolved_threads(), table_n, gated_only);
      detail::emit(common.out, dump_json(to_json(rows)), out);
    };
  });

  // moments
  auto* moments = app.add_subcommand("moments", "moments of the centred matrix E against their limits");
  detail::add_common(moments, common);
  moments->add_option("--n", n_text, "n grid")->required();
  moments->add_option("--s", s, "row exponent s in (0, 1]")->required();
  moments->add_option("--alpha", alpha, "exponent alpha < s")->required();
  moments->callback([&] {
    action = [&] {
      const auto res = moment_convergence_experiment(parse_size_grid(n_text), s, alpha, common.trials_or(10), common.seed,
                                                     common.resolved_threads(), EntryLaw::parse(common.law));
      Json arr = Json::array();
      for (const auto& r : res) arr.push_back(to_json(r.report));
      detail::emit(common.out, dump_json(arr), out);
    };
  });

  // ks-check
  std::size_t resamples = 50;
  std::uint64_t trial_index = 0;
  auto* ks = app.add_subcommand("ks-check", "row-resampling bound on the KS distance between ESDs of E");
  detail::add_common(ks, common);
  ks->add_option("--n", n, "dimension n")->required()->check(CLI::PositiveNumber);
  ks->add_option("--s", s, "row exponent s in (0, 1]")->required();
  ks->add_option("--alpha", alpha, "exponent alpha")->required();
  ks->add_option("--resamples", resamples, "number of single-row resamples")->capture_default_str()->check(CLI::PositiveNumber);
  ks->add_option("--trial", trial_index, "trial index of the base matrix")->capture_default_str();
  ks->callback([&] {
    action = [&] {
      const auto r = rank_perturbation_check(n, s, alpha, {common.seed, trial_index}, resamples, common.resolved_threads(),
                                             EntryLaw::parse(common.law));
      detail::emit(common.out, dump_json(to_json(r)), out);
    };
  });

  // certify
  double eps = 0.3;
  auto* certify = app.add_subcommand("certify", "fraction of trials with spectrum inside [1-eps, 1+eps]");
  detail::add_common(certify, common);
  certify->add_option("--n", n, "dimension n")->required()->check(CLI::PositiveNumber);
  certify->add_option("--s", s, "row exponent s in (0, 1]")->required();
  certify->add_option("--alpha", alpha, "exponent alpha")->required();
  certify->add_option("--eps", eps, "half-width around 1")->capture_default_str();
  certify->callback([&] {
    action = [&] {
      const auto r = subgaussian_certificate_experiment(n, s, alpha, EntryLaw::parse(common.law), eps, common.trials_or(10),
                                                        common.seed, common.resolved_threads());
      if (!r.alpha_above_2s) err << "warning: alpha <= 2s, outside the regime where the bound is expected\n";
      detail::emit(common.out, dump_json(to_json(r)), out);
    };
  });

  // trace-decay
  unsigned k = 2;
  auto* decay = app.add_subcommand("trace-decay", "E Tr(C^(2k)) of the centred supercritical matrix over an n grid");
  detail::add_common(decay, common);
  decay->add_option("--k", k, "walk half-length k")->capture_default_str()->check(CLI::PositiveNumber);
  decay->add_option("--s", s, "row exponent s in (0, 1]")->required();
  decay->add_option("--alpha", alpha, "exponent alpha")->required();
  decay->add_option("--n", n_text, "n grid")->required();
  decay->callback([&] {
    action = [&] {
      const auto r = trace_decay_experiment(k, s, alpha, parse_size_grid(n_text), common.trials_or(30), common.seed,
                                            common.resolved_threads());
      if (!r.above_threshold) err << "warning: alpha <= (k+1)/k * s, decay is not expected\n";
      detail::emit(common.out, dump_json(to_json(r)), out);
    };
  });

  // hf
  std::size_t hf_n = 5;
  std::string eps_text = "0.5,0.2,0.1,0.05,0.02,0.01,0.005,0.002,0.001";
  auto* hf = app.add_subcommand("hf", "lambda_min of |1 + eps*i*j|^alpha over a descending eps grid");
  detail::add_common(hf, common);
  hf->add_option("--n", hf_n, "dimension (>= 3)")->capture_default_str();
  hf->add_option("--alpha", alpha, "exponent alpha")->required();
  hf->add_option("--eps", eps_text, "descending eps grid")->capture_default_str();
  hf->callback([&] {
    action = [&] {
      std::vector<double> grid = parse_grid(eps_text);
      // range grids ascend; the eps sweep runs towards zero
      if (eps_text.find(':') != std::string::npos) std::reverse(grid.begin(), grid.end());
      detail::emit(common.out, dump_json(to_json(hf_counterexample(hf_n, alpha, grid))), out);
    };
  });

  // esd-hist
  std::size_t bins = 50;
  auto* hist = app.add_subcommand("esd-hist", "histogram CSV of the pooled ESD of E");
  detail::add_common(hist, common);
  hist->add_option("--n", n, "dimension n")->required()->check(CLI::PositiveNumber);
  hist->add_option("--s", s, "row exponent s in (0, 1]")->required();
  hist->add_option("--alpha", alpha, "exponent alpha < s")->required();
  hist->add_option("--bins", bins, "number of bins")->capture_default_str()->check(CLI::PositiveNumber);
  hist->callback([&] {
    action = [&] {
      const EsdSample e =
          pooled_esd(n, s, alpha, EntryLaw::parse(common.law), common.trials_or(10), common.seed, common.resolved_threads());
      std::ostringstream os;
      write_histogram_csv(os, emit_histogram(e, bins));
      detail::emit(common.out, os.str(), out);
    };
  });

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kInvalidArguments;
  }

  try {
    action();
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << (code == kInvariantFailure ? "invariant failure: " : "error: ") << e.what() << '\n';
    return code;
  }
  return kOk;
}

inline int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args), out, err);
}

}  // namespace wishpow::cli
