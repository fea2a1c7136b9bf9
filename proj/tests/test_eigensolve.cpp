#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "wishpow/eigensolve.hpp"
#include "wishpow/ensembles.hpp"

using namespace wishpow;

namespace {

Eigen::VectorXd eigen_reference(const SymmetricMatrix& a) {
  const std::size_t m = a.dim();
  Eigen::MatrixXd d(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) d(i, j) = a(i, j);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d, Eigen::EigenvaluesOnly).eigenvalues();
}

}  // namespace

TEST(EigenSpectrum, Examples) {
  EXPECT_EQ(eigen_spectrum(SymmetricMatrix::identity(3)).eigenvalues, (std::vector<double>{1, 1, 1}));
  const auto two = eigen_spectrum(SymmetricMatrix::from_rows({{2, 1}, {1, 2}})).eigenvalues;
  EXPECT_NEAR(two[0], 1.0, 1e-14);
  EXPECT_NEAR(two[1], 3.0, 1e-14);
  const auto ones = eigen_spectrum(SymmetricMatrix::all_ones(3)).eigenvalues;
  EXPECT_NEAR(ones[0], 0.0, 1e-14);
  EXPECT_NEAR(ones[1], 0.0, 1e-14);
  EXPECT_NEAR(ones[2], 3.0, 1e-14);
  const auto one = eigen_spectrum(SymmetricMatrix::from_rows({{-4}}));
  EXPECT_EQ(one.eigenvalues, std::vector<double>{-4});
}

TEST(EigenSpectrum, AgreesWithReferenceSolver) {
  std::mt19937_64 rng(17);
  for (std::size_t m : {2u, 3u, 10u, 57u, 130u}) {
    const auto a = oracle::random_symmetric(m, rng);
    const auto spec = eigen_spectrum(a);
    const auto ref = eigen_reference(a);
    ASSERT_EQ(spec.eigenvalues.size(), m);
    for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(spec.eigenvalues[i], ref(static_cast<Eigen::Index>(i)), 1e-11 * a.frobenius_norm());
    EXPECT_LE(spec.max_residual, 1e-8);
  }
}

TEST(EigenSpectrum, TraceAndFrobeniusIdentities) {
  std::mt19937_64 rng(18);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = oracle::random_symmetric(5 + rep * 7, rng);
    const auto spec = eigen_spectrum(a);
    double sum = 0.0, sq = 0.0;
    for (double l : spec.eigenvalues) {
      sum += l;
      sq += l * l;
    }
    const double fro = a.frobenius_norm();
    EXPECT_LE(std::abs(sum - a.trace()), 1e-8 * fro);
    EXPECT_LE(std::abs(sq - fro * fro), 1e-8 * fro * fro);
  }
}

TEST(EigenSpectrum, ClusteredAndDegenerateSpectra) {
  // Wishart with m > n has m - n zero eigenvalues.
  const auto a = wishart(sample_matrix(60, 20, EntryLaw::gaussian(), {1, 0}), 20);
  const auto spec = eigen_spectrum(a);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(spec.eigenvalues[i], 0.0, 1e-12 * a.frobenius_norm());
  EXPECT_LE(spec.max_residual, 1e-8);
  const auto scaled = eigen_spectrum(SymmetricMatrix::diagonal(std::vector<double>{1e-300, -1e300, 0.0}));
  EXPECT_EQ(scaled.eigenvalues[0], -1e300);
}

TEST(Tridiagonalize, ThreadCountDoesNotMatter) {
  std::mt19937_64 rng(19);
  const auto a = oracle::random_symmetric(700, rng);
  const Tridiagonal one = tridiagonalize(a, false, 1);
  for (unsigned t : {2u, 3u}) {
    const Tridiagonal many = tridiagonalize(a, false, t);
    EXPECT_EQ(many.diag, one.diag);
    EXPECT_EQ(many.off, one.off);
  }
}

TEST(Bisection, MatchesQlAndBrackets) {
  std::mt19937_64 rng(20);
  const auto a = oracle::random_symmetric(80, rng);
  const Tridiagonal t = tridiagonalize(a);
  const auto all = tridiagonal_eigenvalues(t);
  for (std::size_t k : {0u, 1u, 40u, 79u}) {
    const EigenBracket br = bisect_eigenvalue(t, k);
    EXPECT_LE(br.lo, br.hi);
    EXPECT_NEAR(br.mid(), all[k], 1e-12 * a.frobenius_norm());
  }
  EXPECT_THROW(bisect_eigenvalue(t, 80), InvalidArgument);
}

TEST(InverseIteration, EigenvectorsHaveSmallResidual) {
  std::mt19937_64 rng(21);
  const auto a = oracle::random_symmetric(40, rng);
  Tridiagonal t = tridiagonalize(a, true);
  const auto vals = tridiagonal_eigenvalues(t);
  for (std::size_t k : {0u, 20u, 39u}) {
    auto v = tridiagonal_eigenvector(t, vals[k]);
    t.apply_q(v);
    EXPECT_LE(eigenpair_residual(a, vals[k], v), 1e-10);
  }
}

TEST(ExtremeEigenvalues, Examples) {
  EXPECT_NEAR(lambda_min(SymmetricMatrix::identity(5)), 1.0, 1e-15);
  EXPECT_NEAR(lambda_min(SymmetricMatrix::from_rows({{0, 1}, {1, 0}})), -1.0, 1e-15);
  EXPECT_NEAR(lambda_min(SymmetricMatrix::diagonal(std::vector<double>{-3, 7})), -3.0, 1e-15);
  EXPECT_NEAR(lambda_max(SymmetricMatrix::diagonal(std::vector<double>{-3, 7})), 7.0, 1e-15);
}

TEST(ExtremeEigenvalues, MatchFullSolver) {
  std::mt19937_64 rng(22);
  for (std::size_t m : {1u, 2u, 33u, 150u}) {
    const auto a = oracle::random_symmetric(m, rng);
    const auto full = eigen_spectrum(a).eigenvalues;
    EXPECT_NEAR(lambda_min(a), full.front(), 1e-10 * a.frobenius_norm());
    EXPECT_NEAR(lambda_max(a), full.back(), 1e-10 * a.frobenius_norm());
  }
}

TEST(Gershgorin, Examples) {
  const auto d = gershgorin_intervals(SymmetricMatrix::diagonal(std::vector<double>{1, 2, 3}));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(d[i].center, static_cast<double>(i + 1));
    EXPECT_EQ(d[i].radius, 0.0);
  }
  const auto two = gershgorin_intervals(SymmetricMatrix::from_rows({{2, 1}, {1, 2}}));
  EXPECT_EQ(two[0].center, 2.0);
  EXPECT_EQ(two[0].radius, 1.0);
  const auto three = gershgorin_intervals(SymmetricMatrix::from_rows({{1, 0.2, 0.2}, {0.2, 1, 0.2}, {0.2, 0.2, 1}}));
  for (const auto& g : three) {
    EXPECT_EQ(g.center, 1.0);
    EXPECT_DOUBLE_EQ(g.radius, 0.4);
  }
}

TEST(Gershgorin, ContainsSpectrum) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = oracle::random_symmetric(30, rng);
    const auto iv = gershgorin_intervals(a);
    const double slack = 1e-10 * a.frobenius_norm();
    for (double l : eigen_spectrum(a).eigenvalues) {
      const bool inside = std::any_of(iv.begin(), iv.end(), [&](const auto& g) {
        return l >= g.center - g.radius - slack && l <= g.center + g.radius + slack;
      });
      EXPECT_TRUE(inside) << l;
    }
  }
}

TEST(PsdCertificate, Examples) {
  const auto id = psd_certificate(SymmetricMatrix::identity(3), 0.0);
  ASSERT_TRUE(std::holds_alternative<CertifiedPsd>(id));
  EXPECT_EQ(std::get<CertifiedPsd>(id).method, CertificateMethod::gershgorin);
  EXPECT_EQ(std::get<CertifiedPsd>(id).margin, 1.0);

  for (const auto& a : {SymmetricMatrix::from_rows({{0, 1}, {1, 0}}), SymmetricMatrix::from_rows({{1, 2}, {2, 1}})}) {
    const auto v = psd_certificate(a, 1e-12);
    ASSERT_TRUE(std::holds_alternative<CertifiedNotPsd>(v));
    EXPECT_NEAR(std::get<CertifiedNotPsd>(v).lambda_min, -1.0, 1e-14);
  }

  // Gershgorin bound 1 - 2 < 0, eigenvalues 3 -+ sqrt(5) > 0
  const auto v = psd_certificate(SymmetricMatrix::from_rows({{1, 2}, {2, 5}}), 0.0);
  ASSERT_TRUE(std::holds_alternative<CertifiedPsd>(v));
  EXPECT_EQ(std::get<CertifiedPsd>(v).method, CertificateMethod::spectral);
  EXPECT_THROW(psd_certificate(SymmetricMatrix::identity(2), -1.0), InvalidArgument);
}

TEST(PsdCertificate, IndeterminateWhenBracketStraddles) {
  const auto v = classify_psd(-1.0, 0.1, [] { return EigenBracket{-0.2, 0.0}; });
  ASSERT_TRUE(std::holds_alternative<Indeterminate>(v));
  EXPECT_EQ(std::get<Indeterminate>(v).lambda_lo, -0.2);
}

TEST(PsdTolerance, AutoScalesWithNorm) {
  const auto a = SymmetricMatrix::from_rows({{3, 0}, {0, 4}});
  EXPECT_DOUBLE_EQ(PsdTolerance::automatic().resolve(a), 5e-10);
  EXPECT_EQ(PsdTolerance::fixed(0.25).resolve(a), 0.25);
  EXPECT_THROW(PsdTolerance::fixed(-1.0), InvalidArgument);
}

TEST(SpectrumCsv, Header) {
  std::ostringstream os;
  write_spectrum_csv(os, eigen_spectrum(SymmetricMatrix::identity(2)));
  EXPECT_EQ(os.str(), "index,eigenvalue\n0,1\n1,1\n");
}
