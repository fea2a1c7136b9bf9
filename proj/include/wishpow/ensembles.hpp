#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "wishpow/error.hpp"
#include "wishpow/parallel.hpp"

namespace wishpow {

// ---------------------------------------------------------------------------
// Entry laws
// ---------------------------------------------------------------------------

enum class LawKind { gaussian, uniform01, exp1, cauchy, pareto };

/// Law of the i.i.d. entries of X.
///
/// Config encoding: "gaussian", "uniform01", "exp1", "cauchy", "pareto:<b>",
/// each optionally followed by ":std" to shift/scale to mean 0, variance 1.
/// Standardization uses analytic constants and is refused when the variance
/// does not exist (Cauchy, Pareto with b <= 2).
class EntryLaw {
 public:
  EntryLaw() = default;

  static EntryLaw gaussian(bool standardize = false) { return EntryLaw(LawKind::gaussian, 0.0, standardize); }
  static EntryLaw uniform01(bool standardize = false) { return EntryLaw(LawKind::uniform01, 0.0, standardize); }
  static EntryLaw exp1(bool standardize = false) { return EntryLaw(LawKind::exp1, 0.0, standardize); }
  static EntryLaw cauchy() { return EntryLaw(LawKind::cauchy, 0.0, false); }
  static EntryLaw pareto(double b, bool standardize = false) { return EntryLaw(LawKind::pareto, b, standardize); }

  static EntryLaw parse(std::string_view text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
      const auto colon = text.find(':', start);
      parts.emplace_back(text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
      if (colon == std::string_view::npos) break;
      start = colon + 1;
    }
    bool standardize = false;
    if (parts.size() > 1 && parts.back() == "std") {
      standardize = true;
      parts.pop_back();
    }
    const std::string& name = parts.front();
    const auto bad = [&] { return InvalidArgument("unknown entry law '" + std::string(text) + "'"); };
    if (name == "pareto") {
      if (parts.size() != 2) throw bad();
      double b = 0.0;
      try {
        std::size_t used = 0;
        b = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw bad();
      } catch (const std::logic_error&) {
        throw bad();
      }
      return pareto(b, standardize);
    }
    if (parts.size() != 1) throw bad();
    if (name == "gaussian") return gaussian(standardize);
    if (name == "uniform01") return uniform01(standardize);
    if (name == "exp1") return exp1(standardize);
    if (name == "cauchy") {
      if (standardize) throw InvalidArgument("cauchy law cannot be standardized");
      return cauchy();
    }
    throw bad();
  }

  std::string to_string() const {
    std::string out;
    switch (kind_) {
      case LawKind::gaussian: out = "gaussian"; break;
      case LawKind::uniform01: out = "uniform01"; break;
      case LawKind::exp1: out = "exp1"; break;
      case LawKind::cauchy: out = "cauchy"; break;
      case LawKind::pareto: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "pareto:%.17g", shape_);
        out = buf;
        break;
      }
    }
    if (standardize_) out += ":std";
    return out;
  }

  LawKind kind() const { return kind_; }
  double shape() const { return shape_; }
  bool standardized() const { return standardize_; }
  bool heavy_tailed() const { return kind_ == LawKind::cauchy || kind_ == LawKind::pareto; }

  /// Maps two independent uniforms (u1 in (0,1], u2 in [0,1)) to one draw.
  /// Every law consumes exactly two uniforms.
  double transform(double u1, double u2) const {
    double x = 0.0;
    switch (kind_) {
      case LawKind::gaussian:
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      case LawKind::uniform01:
        x = u2;
        return standardize_ ? (x - 0.5) * std::sqrt(12.0) : x;
      case LawKind::exp1:
        x = -std::log(u1);
        return standardize_ ? x - 1.0 : x;
      case LawKind::cauchy:
        return std::tan(std::numbers::pi * (u2 - 0.5));
      case LawKind::pareto: {
        x = std::pow(u1, -1.0 / shape_);
        if (!standardize_) return x;
        const double b = shape_;
        const double mean = b / (b - 1.0);
        const double sd = std::sqrt(b / ((b - 1.0) * (b - 1.0) * (b - 2.0)));
        return (x - mean) / sd;
      }
    }
    return x;
  }

  friend bool operator==(const EntryLaw&, const EntryLaw&) = default;

 private:
  EntryLaw(LawKind kind, double shape, bool standardize) : kind_(kind), shape_(shape), standardize_(standardize) {
    if (kind == LawKind::pareto && !(shape > 0.0 && std::isfinite(shape)))
      throw InvalidArgument("pareto shape must be a positive finite number");
    if (standardize && kind == LawKind::cauchy) throw InvalidArgument("cauchy law cannot be standardized");
    if (standardize && kind == LawKind::pareto && shape <= 2.0)
      throw InvalidArgument("pareto law with b <= 2 has no variance and cannot be standardized");
  }

  LawKind kind_ = LawKind::gaussian;
  double shape_ = 0.0;
  bool standardize_ = false;
};

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t trial_index = 0;

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Counter-based generator state: a 128-bit key. Draw c of the stream is
/// mix64(mix64(k0 + (c+1)*golden) ^ k1), so any draw can be produced without
/// touching the others.
struct StreamState {
  std::uint64_t k0 = 0;
  std::uint64_t k1 = 0;

  std::uint64_t bits(std::uint64_t counter) const { return mix64(mix64(k0 + (counter + 1) * kGolden) ^ k1); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const { return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_open0(std::uint64_t counter) const {
    return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
  }

  /// Independent child stream for a named purpose (e.g. row resampling).
  StreamState substream(std::uint64_t tag) const {
    const std::uint64_t t = mix64(tag + 0x632BE59BD9B4E019ULL);
    return {mix64(k0 ^ t), mix64(k1 + t * kGolden)};
  }

  friend bool operator==(const StreamState&, const StreamState&) = default;
};

/// Mixes (master_seed, trial_index) into a stream key. Both words pass
/// through independent SplitMix64 rounds before being combined, so nearby
/// trial indices give unrelated keys.
inline StreamState derive_stream(const SeedSpec& seed) {
  const std::uint64_t a = mix64(seed.master_seed + kGolden);
  const std::uint64_t b = mix64(seed.trial_index ^ 0xD1B54A32D192ED03ULL);
  const std::uint64_t k0 = mix64(a ^ mix64(b));
  const std::uint64_t k1 = mix64(k0 + a + 0x8CB92BA72F3D8DD7ULL);
  return {k0, k1};
}

// ---------------------------------------------------------------------------
// Rectangular matrices
// ---------------------------------------------------------------------------

/// Dense row-major m x n matrix.
class RectMatrix {
 public:
  RectMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) throw InvalidArgument("matrix dimensions must be positive");
  }
  RectMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw InvalidArgument("matrix dimensions must be positive");
    if (data_.size() != rows * cols) throw InvalidArgument("entry count does not match dimensions");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const RectMatrix&, const RectMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

namespace detail {

// Smallest q <= 64 with s*q integral (to 1e-12), or 0.
inline std::uint64_t rational_denominator(double s) {
  for (std::uint64_t q = 1; q <= 64; ++q) {
    const double sq = s * static_cast<double>(q);
    if (std::abs(sq - std::round(sq)) < 1e-12) return q;
  }
  return 0;
}

// Exact test of c <= n^(p/q), i.e. c^q <= n^p.
inline bool power_at_least(std::uint64_t n, std::uint64_t p, std::uint64_t q, std::uint64_t c) {
  using boost::multiprecision::cpp_int;
  return boost::multiprecision::pow(cpp_int(c), static_cast<unsigned>(q)) <=
         boost::multiprecision::pow(cpp_int(n), static_cast<unsigned>(p));
}

}  // namespace detail

/// m = floor(n^s). When n^s lies within 1e-9 of an integer and s is a
/// rational with small denominator, the floor is decided by exact integer
/// comparison so perfect powers are not rounded down.
inline std::size_t rows_for(std::size_t n, double s) {
  if (n < 1) throw InvalidArgument("n must be positive");
  if (!(s > 0.0 && s <= 1.0)) throw InvalidArgument("s must lie in (0, 1]");
  const long double v = std::pow(static_cast<long double>(n), static_cast<long double>(s));
  auto m = static_cast<std::uint64_t>(std::floor(v));
  const long double nearest = std::round(v);
  if (std::abs(v - nearest) <= 1e-9L * v) {
    if (const std::uint64_t q = detail::rational_denominator(s); q != 0) {
      const auto p = static_cast<std::uint64_t>(std::llround(s * static_cast<double>(q)));
      const auto c = static_cast<std::uint64_t>(nearest);
      m = detail::power_at_least(n, p, q, c) ? c : c - 1;
    }
  }
  if (m == 0) throw InvalidArgument("n^s < 1: no rows");
  return static_cast<std::size_t>(m);
}

/// Fills `out` with law draws for entries [offset, offset + out.size()) of the
/// stream. Entry k consumes counters 2k and 2k+1.
inline void fill_draws(std::span<double> out, std::uint64_t offset, const EntryLaw& law, const StreamState& stream) {
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::uint64_t k = offset + j;
    const double x = law.transform(stream.uniform_open0(2 * k), stream.uniform(2 * k + 1));
    if (!std::isfinite(x)) throw RangeError("non-finite draw at stream position " + std::to_string(k));
    out[j] = x;
  }
}

/// m x n matrix of i.i.d. draws; entry (i, j) depends only on (seed, n, i, j).
inline RectMatrix sample_matrix(std::size_t m, std::size_t n, const EntryLaw& law, const SeedSpec& seed,
                                unsigned threads = 1) {
  RectMatrix x(m, n);
  const StreamState stream = derive_stream(seed);
  parallel_for(m, threads, [&](std::size_t i) { fill_draws(x.row(i), static_cast<std::uint64_t>(i) * n, law, stream); });
  return x;
}

}  // namespace wishpow
