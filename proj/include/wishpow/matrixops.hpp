#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "wishpow/ensembles.hpp"
#include "wishpow/error.hpp"
#include "wishpow/parallel.hpp"
#include "wishpow/special.hpp"

namespace wishpow {

/// Dense real symmetric matrix stored as a packed lower triangle, row-major:
/// entry (i, j) with j <= i lives at i*(i+1)/2 + j.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(std::size_t dim) : dim_(dim), data_(packed_size(dim), 0.0) {
    if (dim == 0) throw InvalidArgument("symmetric matrix dimension must be positive");
  }

  SymmetricMatrix(std::size_t dim, std::vector<double> packed) : dim_(dim), data_(std::move(packed)) {
    if (dim == 0) throw InvalidArgument("symmetric matrix dimension must be positive");
    if (data_.size() != packed_size(dim)) throw InvalidArgument("packed entry count does not match dimension");
    for (double v : data_)
      if (!std::isfinite(v)) throw RangeError("symmetric matrix entries must be finite");
  }

  /// Builds from a full square array; the input must be exactly symmetric.
  static SymmetricMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    std::vector<std::vector<double>> full;
    for (const auto& r : rows) {
      if (r.size() != m) throw InvalidArgument("from_rows needs a square array");
      full.emplace_back(r);
    }
    SymmetricMatrix a(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        if (full[i][j] != full[j][i]) throw InvalidArgument("from_rows input is not symmetric");
        a.set(i, j, full[i][j]);
      }
    return a;
  }

  static SymmetricMatrix identity(std::size_t m) {
    SymmetricMatrix a(m);
    for (std::size_t i = 0; i < m; ++i) a.set(i, i, 1.0);
    return a;
  }

  static SymmetricMatrix all_ones(std::size_t m) {
    SymmetricMatrix a(m);
    std::fill(a.data_.begin(), a.data_.end(), 1.0);
    return a;
  }

  static SymmetricMatrix diagonal(std::span<const double> d) {
    SymmetricMatrix a(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) a.set(i, i, d[i]);
    return a;
  }

  static constexpr std::size_t packed_size(std::size_t m) { return m * (m + 1) / 2; }
  static constexpr std::size_t row_offset(std::size_t i) { return i * (i + 1) / 2; }

  std::size_t dim() const { return dim_; }

  double operator()(std::size_t i, std::size_t j) const {
    return i >= j ? data_[row_offset(i) + j] : data_[row_offset(j) + i];
  }
  void set(std::size_t i, std::size_t j, double v) {
    if (i >= j)
      data_[row_offset(i) + j] = v;
    else
      data_[row_offset(j) + i] = v;
  }

  /// Entries (i, 0..i).
  std::span<const double> lower_row(std::size_t i) const { return {data_.data() + row_offset(i), i + 1}; }
  std::span<double> lower_row(std::size_t i) { return {data_.data() + row_offset(i), i + 1}; }

  std::span<const double> packed() const { return data_; }
  std::span<double> packed() { return data_; }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const auto r = lower_row(i);
      for (std::size_t j = 0; j < i; ++j) s += 2.0 * r[j] * r[j];
      s += r[i] * r[i];
    }
    return std::sqrt(s);
  }

  double max_abs() const {
    double v = 0.0;
    for (double x : data_) v = std::max(v, std::abs(x));
    return v;
  }

  /// Row-major m x m copy.
  std::vector<double> dense() const {
    std::vector<double> out(dim_ * dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j <= i; ++j) out[i * dim_ + j] = out[j * dim_ + i] = (*this)(i, j);
    return out;
  }

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Text dump: "symmetric <m>" then m lines of the lower triangle, %.17g.
// ---------------------------------------------------------------------------

inline void write_symmetric(std::ostream& os, const SymmetricMatrix& a) {
  os << "symmetric " << a.dim() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const auto r = a.lower_row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r[j]);
      if (j) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

inline SymmetricMatrix read_symmetric(std::istream& is) {
  std::string tag;
  std::size_t m = 0;
  if (!(is >> tag >> m) || tag != "symmetric" || m == 0) throw InvalidArgument("bad symmetric matrix header");
  std::vector<double> packed(SymmetricMatrix::packed_size(m));
  for (double& v : packed) {
    std::string tok;
    if (!(is >> tok)) throw InvalidArgument("truncated symmetric matrix dump");
    try {
      v = std::stod(tok);
    } catch (const std::logic_error&) {
      throw InvalidArgument("bad number '" + tok + "' in symmetric matrix dump");
    }
  }
  return SymmetricMatrix(m, std::move(packed));
}

// ---------------------------------------------------------------------------
// Construction of A, B and the centred decompositions
// ---------------------------------------------------------------------------

struct WishartContext {
  std::size_t n = 1;
  double s = 1.0;
  std::size_t m = 1;
  double alpha = 1.0;
  double ell_alpha = 0.0;
};

inline WishartContext make_context(std::size_t n, double s, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  return {n, s, rows_for(n, s), alpha, wishpow::ell_alpha(alpha)};
}

namespace detail {

inline constexpr std::size_t kGramPanel = 8;

// Xᵀ in column panels of width 8: panel p holds, for each k, the entries
// X(8p .. 8p+7, k) contiguously. Missing rows are zero padded.
inline std::vector<double> pack_gram_panels(const RectMatrix& x) {
  const std::size_t m = x.rows(), n = x.cols();
  const std::size_t panels = (m + kGramPanel - 1) / kGramPanel;
  std::vector<double> packed(panels * n * kGramPanel, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = x.row(i);
    double* dst = packed.data() + (i / kGramPanel) * n * kGramPanel + (i % kGramPanel);
    for (std::size_t k = 0; k < n; ++k) dst[k * kGramPanel] = r[k];
  }
  return packed;
}

}  // namespace detail

/// A = X Xᵀ / n. Each entry is one dot product summed sequentially in column
/// order and then divided by n, so the result is bit-identical for every
/// thread count.
inline SymmetricMatrix wishart(const RectMatrix& x, std::size_t n, unsigned threads = 1) {
  using detail::kGramPanel;
  if (x.cols() != n) throw InvalidArgument("wishart: X has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(n));
  const std::size_t m = x.rows();
  const auto packed = detail::pack_gram_panels(x);
  const std::size_t panels = (m + kGramPanel - 1) / kGramPanel;
  const double scale = static_cast<double>(n);
  SymmetricMatrix a(m);

  // Work item = one row panel (8 rows) against every column panel at or
  // below it.
  parallel_for(panels, threads, [&](std::size_t pi) {
    const double* left = packed.data() + pi * n * kGramPanel;
    for (std::size_t pj = 0; pj <= pi; ++pj) {
      const double* right = packed.data() + pj * n * kGramPanel;
      for (std::size_t half = 0; half < 2; ++half) {
        double acc[4][kGramPanel] = {};
        const double* l = left + half * 4;
        for (std::size_t k = 0; k < n; ++k) {
          const double* lk = l + k * kGramPanel;
          const double* rk = right + k * kGramPanel;
          for (std::size_t ii = 0; ii < 4; ++ii)
            for (std::size_t jj = 0; jj < kGramPanel; ++jj) acc[ii][jj] += lk[ii] * rk[jj];
        }
        for (std::size_t ii = 0; ii < 4; ++ii) {
          const std::size_t i = pi * kGramPanel + half * 4 + ii;
          if (i >= m) break;
          for (std::size_t jj = 0; jj < kGramPanel; ++jj) {
            const std::size_t j = pj * kGramPanel + jj;
            if (j > i) break;
            a.lower_row(i)[j] = acc[ii][jj] / scale;
          }
        }
      }
    }
  });
  return a;
}

/// Entrywise |a_ij|^alpha with 0^alpha = 0.
inline SymmetricMatrix hadamard_abs_power(const SymmetricMatrix& a, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("hadamard_abs_power: alpha must be positive");
  SymmetricMatrix b(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const auto src = a.lower_row(i);
    auto dst = b.lower_row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = src[j] == 0.0 ? 0.0 : std::pow(std::abs(src[j]), alpha);
      if (!std::isfinite(v))
        throw RangeError("hadamard_abs_power overflow at entry (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      dst[j] = v;
    }
  }
  return b;
}

struct SubcriticalSplit {
  SymmetricMatrix c;  // B * n^((alpha-s)/2)
  SymmetricMatrix d;  // diagonal: C_ii - ell/n^(s/2)
  SymmetricMatrix e;  // C - D - (ell/n^(s/2)) J, zero diagonal
};

/// Splits the rescaled Hadamard power C into a diagonal part, a constant
/// rank-one part and a centred zero-diagonal part E.
inline SubcriticalSplit subcritical_split(const SymmetricMatrix& b, const WishartContext& ctx) {
  if (b.dim() != ctx.m)
    throw InvalidArgument("subcritical_split: matrix dimension " + std::to_string(b.dim()) + " != m = " + std::to_string(ctx.m));
  const double n = static_cast<double>(ctx.n);
  const double scale = std::pow(n, 0.5 * (ctx.alpha - ctx.s));
  const double shift = ctx.ell_alpha / std::pow(n, 0.5 * ctx.s);
  SubcriticalSplit out{SymmetricMatrix(ctx.m), SymmetricMatrix(ctx.m), SymmetricMatrix(ctx.m)};
  for (std::size_t i = 0; i < ctx.m; ++i) {
    const auto src = b.lower_row(i);
    auto c = out.c.lower_row(i);
    auto e = out.e.lower_row(i);
    for (std::size_t j = 0; j < i; ++j) {
      c[j] = src[j] * scale;
      e[j] = c[j] - shift;
    }
    c[i] = src[i] * scale;
    e[i] = 0.0;
    out.d.set(i, i, c[i] - shift);
  }
  return out;
}

/// Off-diagonal B_ij - ell/n^(alpha/2), zero diagonal.
inline SymmetricMatrix supercritical_center(const SymmetricMatrix& b, const WishartContext& ctx) {
  if (b.dim() != ctx.m)
    throw InvalidArgument("supercritical_center: matrix dimension " + std::to_string(b.dim()) + " != m = " + std::to_string(ctx.m));
  const double shift = ctx.ell_alpha / std::pow(static_cast<double>(ctx.n), 0.5 * ctx.alpha);
  SymmetricMatrix c(ctx.m);
  for (std::size_t i = 0; i < ctx.m; ++i) {
    const auto src = b.lower_row(i);
    auto dst = c.lower_row(i);
    for (std::size_t j = 0; j < i; ++j) dst[j] = src[j] - shift;
  }
  return c;
}

/// (i, j) -> 1 + eps*i*j with 1-based indices; J + eps v vᵀ, v = (1..n).
inline SymmetricMatrix horn_fitzgerald_matrix(std::size_t n, double eps) {
  if (n < 2) throw InvalidArgument("horn_fitzgerald_matrix needs n >= 2");
  if (!(eps > 0.0)) throw InvalidArgument("horn_fitzgerald_matrix needs eps > 0");
  SymmetricMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) a.set(i, j, 1.0 + eps * static_cast<double>((i + 1) * (j + 1)));
  return a;
}

}  // namespace wishpow
