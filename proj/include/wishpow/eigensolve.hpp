#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wishpow/error.hpp"
#include "wishpow/matrixops.hpp"
#include "wishpow/parallel.hpp"

namespace wishpow {

// ---------------------------------------------------------------------------
// Householder reduction to tridiagonal form
// ---------------------------------------------------------------------------

/// T = Qᵀ A Q with Q = H_0 H_1 ... H_{m-3}. When reflectors are kept, the
/// Householder vector of H_k sits in column k of `work` below the diagonal and
/// its coefficient in `tau[k]`.
struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> off;  // off[k] couples k and k+1
  std::optional<SymmetricMatrix> work;
  std::vector<double> tau;

  std::size_t dim() const { return diag.size(); }

  /// Applies Q to a vector of length m (maps eigenvectors of T to those of A).
  void apply_q(std::span<double> y) const {
    if (!work) throw InvalidArgument("tridiagonal form was computed without reflectors");
    const std::size_t m = dim();
    for (std::size_t kk = tau.size(); kk-- > 0;) {
      if (tau[kk] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t i = kk + 1; i < m; ++i) dot += (*work)(i, kk) * y[i];
      const double f = tau[kk] * dot;
      for (std::size_t i = kk + 1; i < m; ++i) y[i] -= f * (*work)(i, kk);
    }
  }
};

namespace detail {

// Row block boundaries for the trailing block of size len; the number of
// blocks depends only on len so reductions are thread-count independent.
inline std::vector<std::size_t> triangle_blocks(std::size_t len) {
  const std::size_t nb = std::clamp<std::size_t>(len / 256, 1, 16);
  std::vector<std::size_t> bounds(nb + 1, 0);
  for (std::size_t b = 1; b < nb; ++b)
    bounds[b] = static_cast<std::size_t>(static_cast<double>(len) * std::sqrt(static_cast<double>(b) / static_cast<double>(nb)));
  bounds[nb] = len;
  return bounds;
}

inline std::uint64_t fingerprint(const SymmetricMatrix& a) {
  std::uint64_t h = 0xCBF29CE484222325ULL ^ a.dim();
  for (double v : a.packed()) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}

}  // namespace detail

inline Tridiagonal tridiagonalize(const SymmetricMatrix& a, bool keep_reflectors = false, unsigned threads = 1) {
  for (double v : a.packed())
    if (!std::isfinite(v)) throw InvalidArgument("eigensolver input has non-finite entries");
  const std::size_t m = a.dim();
  SymmetricMatrix w = a;
  Tridiagonal t;
  t.diag.assign(m, 0.0);
  t.off.assign(m > 0 ? m - 1 : 0, 0.0);
  if (m >= 3) t.tau.assign(m - 2, 0.0);

  std::vector<double> v, p, wv, partial;
  for (std::size_t k = 0; k + 2 < m; ++k) {
    const std::size_t r0 = k + 1;
    const std::size_t len = m - r0;
    t.diag[k] = w(k, k);

    v.resize(len);
    double scale = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      v[i] = w(r0 + i, k);
      scale = std::max(scale, std::abs(v[i]));
    }
    double tail = 0.0;
    for (std::size_t i = 1; i < len; ++i) tail += v[i] * v[i];
    if (scale == 0.0 || tail == 0.0) {
      t.off[k] = v[0];
      if (keep_reflectors)
        for (std::size_t i = 0; i < len; ++i) w.set(r0 + i, k, 0.0);
      continue;
    }
    double sumsq = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double x = v[i] / scale;
      sumsq += x * x;
    }
    const double norm = scale * std::sqrt(sumsq);
    const double beta = v[0] >= 0.0 ? -norm : norm;
    v[0] -= beta;
    double vtv = v[0] * v[0] + tail;
    const double tau = 2.0 / vtv;
    t.off[k] = beta;

    // p = tau * A22 v, accumulated per fixed row block.
    const auto bounds = detail::triangle_blocks(len);
    const std::size_t nb = bounds.size() - 1;
    partial.assign(nb * len, 0.0);
    parallel_for(nb, threads, [&](std::size_t b) {
      double* pb = partial.data() + b * len;
      for (std::size_t li = bounds[b]; li < bounds[b + 1]; ++li) {
        const double* row = w.lower_row(r0 + li).data() + r0;
        const double vi = v[li];
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t j = 0;
        for (; j + 4 <= li; j += 4) {
          s0 += row[j] * v[j];
          s1 += row[j + 1] * v[j + 1];
          s2 += row[j + 2] * v[j + 2];
          s3 += row[j + 3] * v[j + 3];
          pb[j] += row[j] * vi;
          pb[j + 1] += row[j + 1] * vi;
          pb[j + 2] += row[j + 2] * vi;
          pb[j + 3] += row[j + 3] * vi;
        }
        for (; j < li; ++j) {
          s0 += row[j] * v[j];
          pb[j] += row[j] * vi;
        }
        pb[li] += ((s0 + s1) + (s2 + s3)) + row[li] * vi;
      }
    });
    p.assign(len, 0.0);
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t i = 0; i < len; ++i) p[i] += partial[b * len + i];
    double ptv = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      p[i] *= tau;
      ptv += p[i] * v[i];
    }
    const double kfac = 0.5 * tau * ptv;
    wv.resize(len);
    for (std::size_t i = 0; i < len; ++i) wv[i] = p[i] - kfac * v[i];

    // A22 -= v wᵀ + w vᵀ
    parallel_for(nb, threads, [&](std::size_t b) {
      for (std::size_t li = bounds[b]; li < bounds[b + 1]; ++li) {
        double* row = w.lower_row(r0 + li).data() + r0;
        const double vi = v[li], wi = wv[li];
        for (std::size_t j = 0; j <= li; ++j) row[j] -= vi * wv[j] + wi * v[j];
      }
    });

    if (keep_reflectors) {
      for (std::size_t i = 0; i < len; ++i) w.set(r0 + i, k, v[i]);
      t.tau[k] = tau;
    }
  }
  if (m >= 2) {
    t.diag[m - 2] = w(m - 2, m - 2);
    t.off[m - 2] = w(m - 1, m - 2);
  }
  t.diag[m - 1] = w(m - 1, m - 1);
  if (keep_reflectors) t.work = std::move(w);
  return t;
}

// ---------------------------------------------------------------------------
// Tridiagonal eigenvalues
// ---------------------------------------------------------------------------

/// All eigenvalues of T by implicit-shift QL (EISPACK tql1 lineage), sorted
/// ascending. Iteration cap: 30*m shifts in total.
inline std::vector<double> tridiagonal_eigenvalues(const Tridiagonal& t) {
  const std::size_t m = t.dim();
  std::vector<double> d = t.diag;
  std::vector<double> e(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) e[i] = t.off[i];
  const std::size_t cap = 30 * m;
  std::size_t total = 0;
  constexpr double eps = std::numeric_limits<double>::epsilon();

  for (std::size_t l = 0; l < m; ++l) {
    for (;;) {
      std::size_t mm = l;
      for (; mm + 1 < m; ++mm) {
        const double dd = std::abs(d[mm]) + std::abs(d[mm + 1]);
        if (std::abs(e[mm]) <= eps * dd) break;
      }
      if (mm == l) break;
      if (++total > cap) throw SolverError("QL iteration cap exceeded");
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[mm] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool deflated = false;
      for (std::size_t i = mm; i-- > l;) {
        double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[mm] = 0.0;
          deflated = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
      }
      if (deflated) continue;
      d[l] -= p;
      e[l] = g;
      e[mm] = 0.0;
    }
  }
  std::sort(d.begin(), d.end());
  return d;
}

/// Number of eigenvalues of T strictly below x (Sturm sequence).
inline std::size_t sturm_count(const Tridiagonal& t, double x, double pivmin) {
  std::size_t count = 0;
  double q = t.diag[0] - x;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < t.dim(); ++i) {
    q = t.diag[i] - x - t.off[i - 1] * t.off[i - 1] / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0.0) ++count;
  }
  return count;
}

struct EigenBracket {
  double lo;
  double hi;
  double mid() const { return 0.5 * (lo + hi); }
};

/// Bracket [lo, hi] of the k-th smallest eigenvalue (0-based) by bisection.
inline EigenBracket bisect_eigenvalue(const Tridiagonal& t, std::size_t k) {
  const std::size_t m = t.dim();
  if (k >= m) throw InvalidArgument("eigenvalue index out of range");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  double tnorm = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(t.off[i - 1]);
    if (i + 1 < m) r += std::abs(t.off[i]);
    lo = std::min(lo, t.diag[i] - r);
    hi = std::max(hi, t.diag[i] + r);
    tnorm = std::max(tnorm, std::abs(t.diag[i]) + r);
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double pivmin = std::max(std::numeric_limits<double>::min(), eps * eps * tnorm * tnorm + std::numeric_limits<double>::min());
  const double pad = 2.0 * eps * tnorm + pivmin;
  lo -= pad;
  hi += pad;
  for (int iter = 0; iter < 200; ++iter) {
    const double width_tol = 2.0 * eps * std::max(std::abs(lo), std::abs(hi)) + pivmin;
    if (hi - lo <= width_tol) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(t, mid, pivmin) > k)
      hi = mid;
    else
      lo = mid;
  }
  return {lo, hi};
}

/// Eigenvector of T for eigenvalue estimate lambda by inverse iteration
/// (tridiagonal LU with partial pivoting), normalised to unit length.
inline std::vector<double> tridiagonal_eigenvector(const Tridiagonal& t, double lambda) {
  const std::size_t m = t.dim();
  double tnorm = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    tnorm = std::max(tnorm, std::abs(t.diag[i]) + (i > 0 ? std::abs(t.off[i - 1]) : 0.0) + (i + 1 < m ? std::abs(t.off[i]) : 0.0));
  const double tiny = std::max(tnorm, 1.0) * std::numeric_limits<double>::epsilon();

  // LU of (T - lambda I) with row interchanges: U has up to two superdiagonals.
  std::vector<double> u0(m), u1(m, 0.0), u2(m, 0.0), lmul(m, 0.0);
  std::vector<char> swapped(m, 0);
  double cur_d = t.diag[0] - lambda;
  double cur_e = m > 1 ? t.off[0] : 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double below = t.off[i];
    const double next_d = t.diag[i + 1] - lambda;
    const double next_e = i + 2 < m ? t.off[i + 1] : 0.0;
    if (std::abs(cur_d) >= std::abs(below)) {
      const double piv = cur_d == 0.0 ? tiny : cur_d;
      lmul[i] = below / piv;
      u0[i] = piv;
      u1[i] = cur_e;
      u2[i] = 0.0;
      cur_d = next_d - lmul[i] * cur_e;
      cur_e = next_e;
    } else {
      swapped[i] = 1;
      lmul[i] = cur_d / below;
      u0[i] = below;
      u1[i] = next_d;
      u2[i] = next_e;
      cur_d = cur_e - lmul[i] * next_d;
      cur_e = -lmul[i] * next_e;
    }
  }
  u0[m - 1] = cur_d == 0.0 ? tiny : cur_d;
  for (std::size_t i = 0; i < m; ++i)
    if (std::abs(u0[i]) < tiny) u0[i] = std::copysign(tiny, u0[i] == 0.0 ? 1.0 : u0[i]);

  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = 1.0 + 0.1 * std::sin(static_cast<double>(i + 1));
  for (int iter = 0; iter < 4; ++iter) {
    // forward: apply L^{-1} with the recorded interchanges
    for (std::size_t i = 0; i + 1 < m; ++i) {
      if (swapped[i]) std::swap(x[i], x[i + 1]);
      x[i + 1] -= lmul[i] * x[i];
    }
    // back substitution
    for (std::size_t i = m; i-- > 0;) {
      double s = x[i];
      if (i + 1 < m) s -= u1[i] * x[i + 1];
      if (i + 2 < m) s -= u2[i] * x[i + 2];
      x[i] = s / u0[i];
    }
    double nrm = 0.0;
    for (double v : x) nrm = std::max(nrm, std::abs(v));
    for (double& v : x) v /= nrm;
  }
  double nrm = 0.0;
  for (double v : x) nrm += v * v;
  nrm = std::sqrt(nrm);
  for (double& v : x) v /= nrm;
  return x;
}

// ---------------------------------------------------------------------------
// Public spectrum API
// ---------------------------------------------------------------------------

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  double max_residual = 0.0;        // max ||Av - lambda v|| / ||A||_F over checked pairs
  std::size_t dim = 0;
};

inline std::vector<double> symmetric_matvec(const SymmetricMatrix& a, std::span<const double> x) {
  const std::size_t m = a.dim();
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = a.lower_row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      s += r[j] * x[j];
      y[j] += r[j] * x[i];
    }
    y[i] += s + r[i] * x[i];
  }
  return y;
}

inline double eigenpair_residual(const SymmetricMatrix& a, double lambda, std::span<const double> v) {
  const auto av = symmetric_matvec(a, v);
  double r = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - lambda * v[i];
    r += d * d;
  }
  const double fro = a.frobenius_norm();
  return fro == 0.0 ? std::sqrt(r) : std::sqrt(r) / fro;
}

/// Indices whose eigenpairs are residual-checked: all of them for m <= 256,
/// otherwise both extremes and six interior points.
inline std::vector<std::size_t> residual_check_indices(std::size_t m) {
  std::vector<std::size_t> idx;
  if (m <= 256) {
    for (std::size_t i = 0; i < m; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t q = 0; q <= 7; ++q) idx.push_back(q * (m - 1) / 7);
  return idx;
}

/// Full spectrum, ascending, with eigenpair residuals on a fixed subset.
inline Spectrum eigen_spectrum(const SymmetricMatrix& a, unsigned threads = 1) {
  const Tridiagonal t = tridiagonalize(a, true, threads);
  Spectrum out;
  out.dim = a.dim();
  try {
    out.eigenvalues = tridiagonal_eigenvalues(t);
  } catch (const SolverError&) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fingerprint(a)));
    throw SolverError("eigen_spectrum did not converge (m=" + std::to_string(a.dim()) + ", fingerprint " + buf + ")");
  }
  for (std::size_t k : residual_check_indices(a.dim())) {
    auto v = tridiagonal_eigenvector(t, out.eigenvalues[k]);
    t.apply_q(v);
    out.max_residual = std::max(out.max_residual, eigenpair_residual(a, out.eigenvalues[k], v));
  }
  return out;
}

struct ExtremeEigenvalues {
  EigenBracket min;
  EigenBracket max;
};

/// Smallest and largest eigenvalues by Sturm bisection on the tridiagonal form.
inline ExtremeEigenvalues extreme_eigenvalues(const SymmetricMatrix& a, unsigned threads = 1) {
  const Tridiagonal t = tridiagonalize(a, false, threads);
  return {bisect_eigenvalue(t, 0), bisect_eigenvalue(t, a.dim() - 1)};
}

inline double lambda_min(const SymmetricMatrix& a, unsigned threads = 1) {
  return bisect_eigenvalue(tridiagonalize(a, false, threads), 0).mid();
}

inline double lambda_max(const SymmetricMatrix& a, unsigned threads = 1) {
  return bisect_eigenvalue(tridiagonalize(a, false, threads), a.dim() - 1).mid();
}

// ---------------------------------------------------------------------------
// Gershgorin and PSD certificates
// ---------------------------------------------------------------------------

struct GershgorinInterval {
  double center;
  double radius;
};

inline std::vector<GershgorinInterval> gershgorin_intervals(const SymmetricMatrix& a) {
  const std::size_t m = a.dim();
  std::vector<GershgorinInterval> out(m, {0.0, 0.0});
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = a.lower_row(i);
    out[i].center = r[i];
    for (std::size_t j = 0; j < i; ++j) {
      out[i].radius += std::abs(r[j]);
      out[j].radius += std::abs(r[j]);
    }
  }
  return out;
}

/// min_i (center_i - radius_i): a lower bound on the smallest eigenvalue.
inline double gershgorin_lower_bound(const SymmetricMatrix& a) {
  double lb = std::numeric_limits<double>::infinity();
  for (const auto& g : gershgorin_intervals(a)) lb = std::min(lb, g.center - g.radius);
  return lb;
}

/// "auto" (1e-10 * ||A||_F) or a fixed non-negative tolerance.
struct PsdTolerance {
  std::optional<double> value;

  static PsdTolerance automatic() { return {}; }
  static PsdTolerance fixed(double tol) {
    if (!(tol >= 0.0)) throw InvalidArgument("PSD tolerance must be non-negative");
    return {tol};
  }
  bool is_auto() const { return !value.has_value(); }
  double resolve(const SymmetricMatrix& a) const { return value ? *value : 1e-10 * a.frobenius_norm(); }
};

enum class CertificateMethod { gershgorin, spectral };

inline const char* to_string(CertificateMethod m) { return m == CertificateMethod::gershgorin ? "gershgorin" : "spectral"; }

/// margin = (certified lower bound on lambda_min) + tol, hence >= 0.
struct CertifiedPsd {
  CertificateMethod method;
  double margin;
};
struct CertifiedNotPsd {
  double lambda_min;
};
/// The bisection bracket of lambda_min straddles -tol.
struct Indeterminate {
  double lambda_lo;
  double lambda_hi;
};

using PsdVerdict = std::variant<CertifiedPsd, CertifiedNotPsd, Indeterminate>;

inline bool is_certified_psd(const PsdVerdict& v) { return std::holds_alternative<CertifiedPsd>(v); }
inline bool is_certified_not_psd(const PsdVerdict& v) { return std::holds_alternative<CertifiedNotPsd>(v); }

/// Classification from a Gershgorin bound and (lazily) a bracket of lambda_min.
template <class BracketFn>
PsdVerdict classify_psd(double gershgorin_bound, double tol, BracketFn&& lambda_min_bracket) {
  if (gershgorin_bound >= -tol) return CertifiedPsd{CertificateMethod::gershgorin, gershgorin_bound + tol};
  const EigenBracket br = lambda_min_bracket();
  if (br.lo >= -tol) return CertifiedPsd{CertificateMethod::spectral, br.lo + tol};
  if (br.hi < -tol) return CertifiedNotPsd{br.mid()};
  return Indeterminate{br.lo, br.hi};
}

/// Gershgorin first; falls back to the smallest eigenvalue.
inline PsdVerdict psd_certificate(const SymmetricMatrix& a, double tol, unsigned threads = 1) {
  if (!(tol >= 0.0)) throw InvalidArgument("PSD tolerance must be non-negative");
  return classify_psd(gershgorin_lower_bound(a), tol,
                      [&] { return bisect_eigenvalue(tridiagonalize(a, false, threads), 0); });
}

inline PsdVerdict psd_certificate(const SymmetricMatrix& a, PsdTolerance tol = {}, unsigned threads = 1) {
  return psd_certificate(a, tol.resolve(a), threads);
}

/// CSV "index,eigenvalue".
inline void write_spectrum_csv(std::ostream& os, const Spectrum& s) {
  os << "index,eigenvalue\n";
  char buf[48];
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", s.eigenvalues[i]);
    os << i << ',' << buf << '\n';
  }
}

}  // namespace wishpow
