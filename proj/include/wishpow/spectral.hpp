#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wishpow/eigensolve.hpp"
#include "wishpow/error.hpp"
#include "wishpow/matrixops.hpp"
#include "wishpow/special.hpp"

namespace wishpow {

// ---------------------------------------------------------------------------
// Gaussian functionals
// ---------------------------------------------------------------------------

namespace detail {

// ∫_0^L (sin x · sin(L - x))^alpha dx
inline double sine_product_integral(double length, double alpha, double step) {
  return tanh_sinh(
      length, [alpha](double from_left, double from_right) { return std::pow(std::sin(from_left) * std::sin(from_right), alpha); },
      step);
}

}  // namespace detail

/// I(rho) = E[(|X|^a - ell_a)(|Y|^a - ell_a)] for a standard bivariate normal
/// pair with correlation rho.
///
/// In polar coordinates (X, Y) = r (cos t, cos(t - phi)) with cos phi = rho,
/// so E|XY|^a = E[r^(2a)] (1/2pi) ∫|cos t cos(t - phi)|^a dt, where
/// E[r^(2a)] = 2^a Gamma(1 + a) and the angular integral over one period
/// splits at the two kinks into ∫_0^phi + ∫_0^(pi - phi) of
/// (sin x sin(L - x))^a. `step` is the tanh-sinh node spacing.
inline double bivariate_I(double rho, double alpha, double step = 1.0 / 64.0) {
  if (!(std::abs(rho) < 1.0)) throw InvalidArgument("bivariate_I requires |rho| < 1");
  if (!(alpha > 0.0)) throw InvalidArgument("bivariate_I requires alpha > 0");
  const double phi = std::acos(rho);
  const double angular = detail::sine_product_integral(phi, alpha, step) + detail::sine_product_integral(std::numbers::pi - phi, alpha, step);
  const double radial = std::exp2(alpha) * lanczos_gamma(1.0 + alpha);
  const double ell = ell_alpha(alpha);
  return radial * angular / std::numbers::pi - ell * ell;
}

/// Two rows of X with their normalised lengths and correlation.
struct RowPair {
  std::vector<double> r_i;
  std::vector<double> r_j;
  double sigma_i = 0.0;  // ||R_i|| / sqrt(n)
  double sigma_j = 0.0;
  double rho_ij = 0.0;   // <R_i, R_j> / (||R_i|| ||R_j||)

  std::size_t n() const { return r_i.size(); }
};

inline RowPair make_row_pair(std::span<const double> r_i, std::span<const double> r_j) {
  if (r_i.size() != r_j.size() || r_i.empty()) throw InvalidArgument("row pair needs two non-empty rows of equal length");
  double ii = 0.0, jj = 0.0, ij = 0.0;
  for (std::size_t k = 0; k < r_i.size(); ++k) {
    ii += r_i[k] * r_i[k];
    jj += r_j[k] * r_j[k];
    ij += r_i[k] * r_j[k];
  }
  if (ii == 0.0 || jj == 0.0) throw InvalidArgument("row pair has a zero row");
  const double n = static_cast<double>(r_i.size());
  RowPair p;
  p.r_i.assign(r_i.begin(), r_i.end());
  p.r_j.assign(r_j.begin(), r_j.end());
  p.sigma_i = std::sqrt(ii / n);
  p.sigma_j = std::sqrt(jj / n);
  p.rho_ij = ij / (std::sqrt(ii) * std::sqrt(jj));
  if (!(std::abs(p.rho_ij) < 1.0)) throw InvalidArgument("row pair is collinear (|rho| = 1)");
  return p;
}

/// E[(|<R_i,R>/sqrt n|^a - ell)(|<R,R_j>/sqrt n|^a - ell) | R_i, R_j] for a
/// fresh standard Gaussian row R:
/// sigma_i^a sigma_j^a I(rho_ij) + ell^2 (sigma_i^a - 1)(sigma_j^a - 1).
inline double conditional_Y(const RowPair& pair, double alpha) {
  if (!(pair.sigma_i > 0.0 && pair.sigma_j > 0.0)) throw InvalidArgument("conditional_Y: sigma must be positive");
  const double si = std::pow(pair.sigma_i, alpha);
  const double sj = std::pow(pair.sigma_j, alpha);
  const double ell = ell_alpha(alpha);
  return si * sj * bivariate_I(pair.rho_ij, alpha) + ell * ell * (si - 1.0) * (sj - 1.0);
}

// ---------------------------------------------------------------------------
// Empirical spectral distributions
// ---------------------------------------------------------------------------

struct EsdSample {
  std::vector<double> eigenvalues;  // sorted ascending
  std::size_t m = 0;
  std::size_t trials = 0;

  std::size_t total() const { return eigenvalues.size(); }

  /// F(x) = #{lambda <= x} / total
  double cdf(double x) const {
    const auto it = std::upper_bound(eigenvalues.begin(), eigenvalues.end(), x);
    return static_cast<double>(it - eigenvalues.begin()) / static_cast<double>(total());
  }
};

inline EsdSample esd(const Spectrum& spec) {
  if (spec.eigenvalues.empty()) throw InvalidArgument("esd of an empty spectrum");
  EsdSample e{spec.eigenvalues, spec.dim, 1};
  std::sort(e.eigenvalues.begin(), e.eigenvalues.end());
  return e;
}

inline EsdSample esd(std::vector<double> eigenvalues) {
  if (eigenvalues.empty()) throw InvalidArgument("esd of an empty spectrum");
  std::sort(eigenvalues.begin(), eigenvalues.end());
  const std::size_t m = eigenvalues.size();
  return {std::move(eigenvalues), m, 1};
}

/// Concatenates samples of a common dimension; approximates the expected ESD.
inline EsdSample pool(std::span<const EsdSample> samples) {
  if (samples.empty()) throw InvalidArgument("pool of no samples");
  EsdSample out;
  out.m = samples.front().m;
  for (const auto& s : samples) {
    if (s.eigenvalues.empty()) throw InvalidArgument("pool of an empty sample");
    if (s.m != out.m) throw InvalidArgument("pool: samples have different dimensions");
    out.eigenvalues.insert(out.eigenvalues.end(), s.eigenvalues.begin(), s.eigenvalues.end());
    out.trials += s.trials;
  }
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  return out;
}

inline double esd_moment(const EsdSample& e, unsigned k) {
  if (k == 0) throw InvalidArgument("esd_moment needs k >= 1");
  if (e.eigenvalues.empty()) throw InvalidArgument("esd_moment of an empty sample");
  double s = 0.0;
  for (double x : e.eigenvalues) {
    double p = x;
    for (unsigned q = 1; q < k; ++q) p *= x;
    s += p;
  }
  return s / static_cast<double>(e.total());
}

/// sup_x |F_a(x) - F_b(x)|, evaluated exactly at every jump point.
inline double ks_distance(const EsdSample& a, const EsdSample& b) {
  if (a.eigenvalues.empty() || b.eigenvalues.empty()) throw InvalidArgument("ks_distance of an empty sample");
  const auto& x = a.eigenvalues;
  const auto& y = b.eigenvalues;
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j == y.size() || (i < x.size() && x[i] <= y[j]))
      v = x[i];
    else
      v = y[j];
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

inline void write_esd_csv(std::ostream& os, const EsdSample& e) {
  os << "eigenvalue\n";
  char buf[32];
  for (double x : e.eigenvalues) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    os << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// Moment targets
// ---------------------------------------------------------------------------

struct MomentTargets {
  double m1 = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
};

/// Limits for the centred matrix E: first moment 0, second moment
/// Var|Z|^a = ell_2a - ell_a^2, fourth moment 2 * (second)^2.
inline MomentTargets moment_targets(double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("moment_targets requires alpha > 0");
  const double ell = ell_alpha(alpha);
  const double var = ell_alpha(2.0 * alpha) - ell * ell;
  return {0.0, var, 2.0 * var * var};
}

struct MomentReport {
  double m1_hat = 0.0;
  double m2_hat = 0.0;
  double m4_hat = 0.0;
  double m1_target = 0.0;
  double m2_target = 0.0;
  double m4_target = 0.0;
  double alpha = 0.0;
  std::size_t n = 0;
  double s = 0.0;
  std::size_t trials = 0;
};

// ---------------------------------------------------------------------------
// Trace moments and the closed-walk expansion
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> dense_multiply(const std::vector<double>& a, const std::vector<double>& b, std::size_t m) {
  std::vector<double> c(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < m; ++l) {
      const double ail = a[i * m + l];
      if (ail == 0.0) continue;
      const double* brow = b.data() + l * m;
      double* crow = c.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += ail * brow[j];
    }
  return c;
}

}  // namespace detail

/// Tr(C^(2k)) = ||C^k||_F^2 for symmetric C.
inline double trace_moment(const SymmetricMatrix& c, unsigned k) {
  if (k == 0) throw InvalidArgument("trace_moment needs k >= 1");
  const std::size_t m = c.dim();
  const std::vector<double> base = c.dense();
  std::vector<double> power = base;
  for (unsigned q = 1; q < k; ++q) power = detail::dense_multiply(power, base, m);
  double s = 0.0;
  for (double v : power) s += v * v;
  if (!std::isfinite(s)) throw RangeError("trace_moment overflow");
  return s;
}

/// Sum over all closed walks of length 2k on K_m without loops of the product
/// of traversed entries. Enumerates m (m-1)^(2k-1) walks; guarded to m <= 8,
/// k <= 3.
inline double walk_trace_oracle(const SymmetricMatrix& c, unsigned k) {
  const std::size_t m = c.dim();
  if (k == 0) throw InvalidArgument("walk_trace_oracle needs k >= 1");
  if (m > 8 || k > 3) throw InvalidArgument("walk_trace_oracle size guard: m <= 8 and k <= 3");
  for (std::size_t i = 0; i < m; ++i)
    if (c(i, i) != 0.0) throw InvalidArgument("walk_trace_oracle needs an exactly zero diagonal");
  const unsigned steps = 2 * k;
  double total = 0.0;
  std::vector<std::size_t> path(steps + 1);
  // Depth-first over vertex sequences; consecutive vertices must differ.
  auto walk = [&](auto&& self, unsigned depth, double product) -> void {
    const std::size_t cur = path[depth];
    if (depth + 1 == steps) {
      if (cur != path[0]) total += product * c(cur, path[0]);
      return;
    }
    for (std::size_t next = 0; next < m; ++next) {
      if (next == cur) continue;
      path[depth + 1] = next;
      self(self, depth + 1, product * c(cur, next));
    }
  };
  for (std::size_t start = 0; start < m; ++start) {
    path[0] = start;
    walk(walk, 0, 1.0);
  }
  return total;
}

}  // namespace wishpow
