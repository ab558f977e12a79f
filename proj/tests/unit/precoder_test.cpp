#include <gtest/gtest.h>

#include <cmath>

#include "plsec/errors.hpp"
#include "plsec/modem.hpp"
#include "plsec/precoder.hpp"

using namespace plsec;

namespace {

CVector random_symbols(SeededRng& rng, int K) {
  CVector d(K);
  for (int k = 0; k < K; ++k) d[k] = Qpsk::point(static_cast<int>(rng.next_u64() % 4));
  return d;
}

double min_ci_margin(const ChannelRealization& ch, const CVector& d, const CVector& x,
                     double gamma) {
  const CVector y = ch.H * x;
  double worst = 1e300;
  for (int k = 0; k < ch.num_users(); ++k) {
    auto [mr, mi] = ci_margins(d[k], y[k], std::sqrt(ch.sigma_z2 * gamma));
    worst = std::min({worst, mr, mi});
  }
  return worst;
}

const double g6 = db_to_linear(6.0);

}  // namespace

TEST(ZfPrecode, IdentityChannel) {
  ChannelRealization ch;
  ch.H = CMatrix::Identity(2, 2);
  ch.He = CMatrix::Zero(1, 2);
  CVector d(2);
  d << Qpsk::point(0), Qpsk::point(3);
  const auto r = zf_precode(ch, d, 2.0);
  EXPECT_LT((r.x - d).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(r.power, 2.0, 1e-12);
}

TEST(ZfPrecode, ExactPowerAndNoInterference) {
  SeededRng rng(1, 0);
  const auto ch = sample_channel(rng, 6, 15, 9);
  const double eta = std::pow(10.0, 0.5);
  for (int n = 0; n < 50; ++n) {
    const CVector d = random_symbols(rng, 6);
    const auto r = zf_precode(ch, d, eta);
    EXPECT_NEAR(r.power, eta, 1e-12);
    EXPECT_NEAR(r.x.squaredNorm(), r.power, 1e-12);
    const CVector y = ch.H * r.x;
    const cplx beta = y[0] / d[0];
    EXPECT_NEAR(beta.imag(), 0.0, 1e-9);
    EXPECT_GT(beta.real(), 0.0);
    for (int k = 0; k < 6; ++k) EXPECT_LT(std::abs(y[k] - beta * d[k]), 1e-9);
  }
}

TEST(CispmPrecode, SingleUserHalfPlanes) {
  ChannelRealization ch;
  ch.H = CMatrix::Zero(1, 2);
  ch.H(0, 0) = 1.0;
  ch.He = CMatrix::Zero(0, 2);
  CVector d(1);
  d << Qpsk::point(0);
  const auto r = cispm_precode(ch, d, {1.0});
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(r.x[0].real(), s, 1e-12);
  EXPECT_NEAR(r.x[0].imag(), s, 1e-12);
  EXPECT_NEAR(std::abs(r.x[1]), 0.0, 1e-12);
  EXPECT_NEAR(r.power, 1.0, 1e-12);
}

TEST(CispmPrecode, FeasibleOptimalAndCheaperThanZf) {
  SeededRng rng(2, 0);
  double p_cispm = 0.0;
  int slots = 0;
  for (int real = 0; real < 5; ++real) {
    const auto ch = sample_channel(rng, 6, 15, 9);
    for (int n = 0; n < 40; ++n) {
      const CVector d = random_symbols(rng, 6);
      const auto r = cispm_precode(ch, d, {g6});
      ASSERT_EQ(r.status, SolveStatus::kOptimal);
      EXPECT_GE(min_ci_margin(ch, d, r.x, g6), -1e-6);
      EXPECT_NEAR(r.power, r.x.squaredNorm(), 1e-12);
      const CVector scaled = 1.01 * r.x;
      EXPECT_GE(min_ci_margin(ch, d, scaled, g6), -1e-6);
      EXPECT_LE(r.objective, scaled.squaredNorm());
      p_cispm += r.power;
      ++slots;
    }
  }
  EXPECT_LT(p_cispm / slots, g6);
}

TEST(CispmPrecode, NoFeasiblePerturbationDecreasesPower) {
  SeededRng rng(3, 0);
  const auto ch = sample_channel(rng, 4, 8, 2);
  const CVector d = random_symbols(rng, 4);
  const auto r = cispm_precode(ch, d, {g6});
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  const double tau = std::sqrt(g6);
  int tried = 0;
  for (int i = 0; i < 1000 && tried < 100; ++i) {
    // Random step, then the smallest uniform rescale that restores every CI
    // constraint (they are sign-aligned half-planes through the origin).
    const CVector y0 = r.x + 1e-2 * sample_cn(rng, 8, 1.0);
    const CVector y = ch.H * y0;
    double c = 0.0;
    bool ok = true;
    for (int k = 0; k < 4; ++k) {
      const double sr = d[k].real() > 0 ? 1 : -1, si = d[k].imag() > 0 ? 1 : -1;
      const double ar = sr * y[k].real(), ai = si * y[k].imag();
      if (ar <= 0 || ai <= 0) ok = false;
      c = std::max({c, tau * std::abs(d[k].real()) / ar, tau * std::abs(d[k].imag()) / ai});
    }
    if (!ok) continue;
    const CVector cand = c * y0;
    ASSERT_GE(min_ci_margin(ch, d, cand, g6), -1e-9);
    ++tried;
    EXPECT_GE(cand.squaredNorm(), r.power - 1e-6);
  }
  EXPECT_EQ(tried, 100);
}

TEST(SampleBoundary, ReproducibleAndFair) {
  SeededRng a(5, 1), b(5, 1);
  EXPECT_EQ(sample_boundary(a, 3).b, sample_boundary(b, 3).b);
  SeededRng rng(6, 0);
  const int slots = 10000;
  int ones = 0;
  double cross = 0.0;
  auto prev = sample_boundary(rng, 1).b[0];
  for (int i = 0; i < slots; ++i) {
    const auto s = sample_boundary(rng, 1).b[0];
    ones += s;
    cross += (2.0 * s - 1.0) * (2.0 * prev - 1.0);
    prev = s;
  }
  EXPECT_NEAR(static_cast<double>(ones) / slots, 0.5, 0.02);
  EXPECT_LT(std::abs(cross / slots), 0.05);
}

TEST(PlsRandom, NoEveAntennasEqualsCispm) {
  SeededRng rng(7, 0);
  const auto ch = sample_channel(rng, 3, 6, 0);
  const CVector d = random_symbols(rng, 3);
  const auto a = pls_random_precode(ch, d, {g6}, 0.1, BoundarySelector{});
  const auto b = cispm_precode(ch, d, {g6});
  EXPECT_LT((a.x - b.x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PlsRandom, StripHoldsAndNoiseFlipsHalf) {
  SeededRng rng(8, 0);
  SeededRng noise(8, 1);
  const double delta = 0.1;
  int flips = 0, total = 0;
  for (int real = 0; real < 4; ++real) {
    const auto ch = sample_channel(rng, 6, 15, 5);
    for (int n = 0; n < 100; ++n) {
      const CVector d = random_symbols(rng, 6);
      const auto sel = sample_boundary(rng, 5);
      const auto r = pls_random_precode(ch, d, {g6}, delta, sel);
      if (r.status != SolveStatus::kOptimal) continue;
      EXPECT_GE(min_ci_margin(ch, d, r.x, g6), -1e-6);
      const CVector ye = ch.He * r.x;
      for (int i = 0; i < 5; ++i) {
        const double c = sel.b[i] ? ye[i].real() : ye[i].imag();
        EXPECT_LE(std::abs(c), delta + 1e-6);
        const double z = std::sqrt(ch.sigma_e2 / 2.0) * noise.normal();
        flips += (c >= 0.0) != (c + z >= 0.0);
        ++total;
      }
    }
  }
  ASSERT_GT(total, 1000);
  const double rate = static_cast<double>(flips) / total;
  // Strip of half-width 0.1 against noise std 0.707: flip rate in [0.444, 0.5].
  EXPECT_GT(rate, 0.42);
  EXPECT_LT(rate, 0.53);
}

TEST(PlsRandom, AllVerticalMatchesDirectConstruction) {
  SeededRng rng(9, 0);
  const auto ch = sample_channel(rng, 3, 8, 2);
  const CVector d = random_symbols(rng, 3);
  BoundarySelector sel{{1, 1}};
  const auto r = pls_random_precode(ch, d, {g6}, 0.1, sel);
  // Direct: CI rows written by hand from complex arithmetic.
  const int n = 16;
  RMatrix G(6 + 4, n);
  RVector h(10);
  const double tau = std::sqrt(g6);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 8; ++j) {
      const cplx hk = ch.H(k, j);
      // Re(h x) = Re h Re x - Im h Im x ; Im(h x) = Im h Re x + Re h Im x
      const double sr = d[k].real() > 0 ? 1 : -1, si = d[k].imag() > 0 ? 1 : -1;
      G(2 * k, 2 * j) = -sr * hk.real();
      G(2 * k, 2 * j + 1) = sr * hk.imag();
      G(2 * k + 1, 2 * j) = -si * hk.imag();
      G(2 * k + 1, 2 * j + 1) = -si * hk.real();
    }
    h[2 * k] = -tau * std::abs(d[k].real());
    h[2 * k + 1] = -tau * std::abs(d[k].imag());
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 8; ++j) {
      const cplx he = ch.He(i, j);
      G(6 + 2 * i, 2 * j) = he.real();
      G(6 + 2 * i, 2 * j + 1) = -he.imag();
    }
    G.row(6 + 2 * i + 1) = -G.row(6 + 2 * i);
    h[6 + 2 * i] = h[6 + 2 * i + 1] = 0.1;
  }
  const auto direct = solve_ldp(G, h);
  ASSERT_EQ(direct.status, r.status);
  if (r.status == SolveStatus::kOptimal) {
    EXPECT_LT((real_embed(r.x) - direct.x).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(PlsRandom, PrecoderFallsBackOnInfeasibleSlots) {
  // Eve shares the single user's channel: pinning Re{h x} near zero
  // contradicts the CI threshold on the same axis.
  ChannelRealization ch;
  ch.H = CMatrix::Zero(1, 2);
  ch.H(0, 0) = 1.0;
  ch.He = ch.H;
  PrecoderSpec spec{PrecoderKind::kPLSRandom, 1.0, {1.0}, 0.1};
  Precoder pre(ch, spec);
  SeededRng brng(1, 1);
  CMatrix D(64, 1);
  for (int n = 0; n < 64; ++n) D(n, 0) = Qpsk::point(n % 4);
  PrecodeTelemetry tel;
  const auto out = pre.precode_block(D, brng, &tel);
  EXPECT_EQ(tel.infeasible, 64);
  EXPECT_EQ(tel.slots, 64);
  for (int n = 0; n < 64; ++n) {
    EXPECT_TRUE(out[n].fell_back);
    EXPECT_EQ(out[n].status, SolveStatus::kOptimal);
  }
}

TEST(PlsEveMin, ZeroEveChannelGivesCispmArgmin) {
  SeededRng rng(10, 0);
  auto ch = sample_channel(rng, 4, 8, 3);
  ch.He.setZero();
  for (int n = 0; n < 20; ++n) {
    const CVector d = random_symbols(rng, 4);
    const auto a = pls_evemin_precode(ch, d, {g6});
    const auto b = cispm_precode(ch, d, {g6});
    ASSERT_EQ(a.status, SolveStatus::kOptimal);
    EXPECT_LT((a.x - b.x).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(PlsEveMin, AgreesWithEpigraphBarrierRoute) {
  SeededRng rng(11, 0);
  const auto ch = sample_channel(rng, 6, 15, 9);
  const RMatrix Hr = real_embed_matrix(ch.H);
  const RMatrix Her = real_embed_matrix(ch.He);
  RVector tau = RVector::Constant(6, std::sqrt(g6));
  for (int n = 0; n < 10; ++n) {
    const CVector d = random_symbols(rng, 6);
    const auto fast = pls_evemin_precode(ch, d, {g6});
    ConeProgram p;
    p.quad_weight = 0.0;
    p.norms = {{1.0, RMatrix::Identity(30, 30)}, {1.0, Her}};
    ci_constraints(Hr, d, tau, p.G, p.h);
    const auto slow = solve_cqp(p);
    ASSERT_EQ(fast.status, SolveStatus::kOptimal);
    ASSERT_EQ(slow.status, SolveStatus::kOptimal);
    EXPECT_NEAR(fast.objective, slow.objective, 1e-6 * (1.0 + slow.objective));
    EXPECT_LT((real_embed(fast.x) - slow.x).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_GE(min_ci_margin(ch, d, fast.x, g6), -1e-6);
  }
}

TEST(PlsEveMin, PenalisesEvePowerAndCostsMoreThanCispm) {
  SeededRng rng(12, 0);
  double eve_min = 0.0, eve_cispm = 0.0, p_min = 0.0, p_cispm = 0.0;
  for (int real = 0; real < 3; ++real) {
    const auto ch = sample_channel(rng, 6, 15, 11);
    for (int n = 0; n < 30; ++n) {
      const CVector d = random_symbols(rng, 6);
      const auto a = pls_evemin_precode(ch, d, {g6});
      const auto b = cispm_precode(ch, d, {g6});
      eve_min += (ch.He * a.x).norm();
      eve_cispm += (ch.He * b.x).norm();
      p_min += a.power;
      p_cispm += b.power;
    }
  }
  EXPECT_LE(eve_min, eve_cispm);
  EXPECT_GT(p_min, p_cispm);
}

TEST(PlsEveMin, SquaredSurrogateIsTheWeightedQp) {
  SeededRng rng(13, 0);
  const auto ch = sample_channel(rng, 3, 6, 2);
  PrecoderSpec spec{PrecoderKind::kPLSEveMin, 1.0, {g6}, 0.1};
  spec.evemin_squared = true;
  Precoder pre(ch, spec);
  const CVector d = random_symbols(rng, 3);
  const auto r = pre.precode(d, rng);
  RMatrix G;
  RVector h;
  ci_constraints(real_embed_matrix(ch.H), d, RVector::Constant(3, std::sqrt(g6)), G, h);
  const RMatrix Her = real_embed_matrix(ch.He);
  const RMatrix Q = 2.0 * (RMatrix::Identity(12, 12) + Her.transpose() * Her);
  const auto q = solve_qp(Q, G, h);
  ASSERT_EQ(q.status, SolveStatus::kOptimal);
  EXPECT_LT((real_embed(r.x) - q.x).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Precoder, ZfBlockNormalisationAveragesEta) {
  SeededRng rng(14, 0);
  const auto ch = sample_channel(rng, 6, 15, 1);
  PrecoderSpec spec{PrecoderKind::kZF, 3.0, {1.0}, 0.1};
  spec.zf_block_normalization = true;
  Precoder pre(ch, spec);
  CMatrix D(50, 6);
  for (int n = 0; n < 50; ++n) D.row(n) = random_symbols(rng, 6).transpose();
  const auto out = pre.precode_block(D, rng);
  double total = 0.0;
  for (const auto& s : out) total += s.power;
  EXPECT_NEAR(total / 50.0, 3.0, 1e-12);
  // One common scale: the noiseless user point is beta d for every slot.
  const cplx beta0 = (ch.H * out[0].x)[0] / D(0, 0);
  for (int n = 0; n < 50; ++n) {
    EXPECT_LT(std::abs((ch.H * out[n].x)[2] - beta0 * D(n, 2)), 1e-9);
  }
}

TEST(Precoder, SpecValidation) {
  PrecoderSpec s;
  s.gamma = {};
  EXPECT_THROW(s.validate(2), ConfigError);
  s.gamma = {1.0, 2.0, 3.0};
  EXPECT_THROW(s.validate(2), ConfigError);
  s.gamma = {1.0};
  s.eta = 0.0;
  EXPECT_THROW(s.validate(2), ConfigError);
  s.kind = PrecoderKind::kPLSRandom;
  s.delta = 0.0;
  EXPECT_THROW(s.validate(2), ConfigError);
  EXPECT_EQ(parse_precoder_kind("PLS_Random"), PrecoderKind::kPLSRandom);
  EXPECT_THROW(parse_precoder_kind("mmse"), ConfigError);
}
