#include <gtest/gtest.h>

#include "plsec/errors.hpp"
#include "plsec/numerics.hpp"

using namespace plsec;

TEST(PseudoInverse, IdentityMapsToIdentity) {
  const CMatrix I = CMatrix::Identity(3, 3);
  EXPECT_LT((pseudo_inverse(I) - I).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PseudoInverse, ScalarInverse) {
  CMatrix H(1, 1);
  H(0, 0) = cplx(2.0, 0.0);
  const CMatrix P = pseudo_inverse(H);
  EXPECT_NEAR(P(0, 0).real(), 0.5, 1e-15);
  EXPECT_EQ(P(0, 0).imag(), 0.0);
}

TEST(PseudoInverse, PenroseConditionsOnRandomWideMatrices) {
  SeededRng rng(11, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 1 + trial % 4;
    const int Nt = K + trial % 3;
    CMatrix H(K, Nt);
    for (int r = 0; r < K; ++r) H.row(r) = sample_cn(rng, Nt, 1.0).transpose();
    const CMatrix P = pseudo_inverse(H);
    EXPECT_LT((H * P - CMatrix::Identity(K, K)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((P * H * P - P).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(PseudoInverse, RankDeficientThrows) {
  CMatrix H(2, 3);
  H << cplx(1, 0), cplx(2, 0), cplx(0, 1), cplx(2, 0), cplx(4, 0), cplx(0, 2);
  EXPECT_THROW(pseudo_inverse(H), SingularChannelError);
  EXPECT_THROW(pseudo_inverse(CMatrix::Identity(3, 2)), SingularChannelError);
}

TEST(RealEmbed, Definition) {
  CVector v(2);
  v << cplx(1, -1), cplx(3, 0);
  const RVector r = real_embed(v);
  ASSERT_EQ(r.size(), 4);
  EXPECT_EQ(r[0], 1.0);
  EXPECT_EQ(r[1], -1.0);
  EXPECT_EQ(r[2], 3.0);
  EXPECT_EQ(r[3], 0.0);
  EXPECT_EQ(real_embed(CVector::Zero(1)), RVector::Zero(2));
  CVector w(1);
  w << cplx(1, 2);
  EXPECT_EQ(real_embed(w), (RVector(2) << 1, 2).finished());
}

TEST(RealEmbed, RoundTripsExactly) {
  SeededRng rng(3, 1);
  const CVector v = sample_cn(rng, 17, 2.0);
  EXPECT_EQ(complex_from_embed(real_embed(v)), v);
  EXPECT_THROW(complex_from_embed(RVector::Zero(3)), DimensionError);
}

TEST(RealEmbed, MatrixActsLikeComplexProduct) {
  SeededRng rng(5, 2);
  CMatrix A(3, 4);
  for (int r = 0; r < 3; ++r) A.row(r) = sample_cn(rng, 4, 1.0).transpose();
  const CVector v = sample_cn(rng, 4, 1.0);
  const RVector lhs = real_embed(A * v);
  const RVector rhs = real_embed_matrix(A) * real_embed(v);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SampleCn, ZeroVarianceGivesExactZeros) {
  SeededRng rng(1, 1);
  const CVector z = sample_cn(rng, 4, 0.0);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(z[i], cplx(0.0, 0.0));
}

TEST(SampleCn, NegativeVarianceThrows) {
  SeededRng rng(1, 1);
  EXPECT_THROW(sample_cn(rng, 2, -1.0), DomainError);
}

TEST(SampleCn, SameKeySameDraws) {
  SeededRng a(42, 9), b(42, 9);
  EXPECT_EQ(sample_cn(a, 2, 1.0), sample_cn(b, 2, 1.0));
}

TEST(SampleCn, DistinctStreamsDiffer) {
  SeededRng a(42, 9), b(42, 10);
  EXPECT_NE(sample_cn(a, 8, 1.0), sample_cn(b, 8, 1.0));
}

TEST(SampleCn, MomentsAtUnitVariance) {
  SeededRng rng(2024, 0);
  const int n = 100000;
  const CVector z = sample_cn(rng, n, 1.0);
  const cplx mean = z.mean();
  double var = 0.0, var_re = 0.0;
  for (int i = 0; i < n; ++i) {
    var += std::norm(z[i] - mean);
    var_re += std::pow(z[i].real() - mean.real(), 2);
  }
  var /= n - 1;
  var_re /= n - 1;
  EXPECT_LT(std::abs(mean), 0.02);
  EXPECT_NEAR(var, 1.0, 0.05);
  EXPECT_NEAR(var_re, 0.5, 0.025);
}

TEST(SeededRng, UniformAndBitRanges) {
  SeededRng rng(8, 8);
  int ones = 0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ones += rng.bit();
  }
  EXPECT_NEAR(ones / 10000.0, 0.5, 0.02);
}

TEST(DeriveStream, SensitiveToEveryArgument) {
  const auto base = derive_stream(1, 2, 3, 4);
  EXPECT_NE(base, derive_stream(0, 2, 3, 4));
  EXPECT_NE(base, derive_stream(1, 0, 3, 4));
  EXPECT_NE(base, derive_stream(1, 2, 0, 4));
  EXPECT_NE(base, derive_stream(1, 2, 3, 0));
  EXPECT_EQ(base, derive_stream(1, 2, 3, 4));
}

TEST(Decibel, RoundTrip) {
  EXPECT_NEAR(db_to_linear(6.0), 3.981071705534973, 1e-12);
  EXPECT_NEAR(linear_to_db(db_to_linear(-3.5)), -3.5, 1e-12);
}
