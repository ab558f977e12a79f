#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "plsec/eavesdropper.hpp"
#include "plsec/errors.hpp"

using namespace plsec;

namespace {

std::vector<Frame> random_frames(SeededRng& rng, const ConvCode& code, int count) {
  std::vector<Frame> out;
  for (int i = 0; i < count; ++i) out.push_back(make_frame(rng, code, 0, FrameRole::kPilot));
  return out;
}

// Eve observes the user's own symbol through fixed complex gains plus noise.
CMatrix observe(SeededRng& rng, const std::vector<Frame>& frames, const CVector& gains,
                double noise_var) {
  Eigen::Index slots = 0;
  for (const auto& f : frames) slots += f.symbols.size();
  CMatrix Y(slots, gains.size());
  Eigen::Index n = 0;
  for (const auto& f : frames) {
    for (Eigen::Index s = 0; s < f.symbols.size(); ++s, ++n) {
      Y.row(n) = (gains * f.symbols[s]).transpose();
      if (noise_var > 0.0) Y.row(n) += sample_cn(rng, static_cast<int>(gains.size()), noise_var).transpose();
    }
  }
  return Y;
}

Bits concat_payload(const std::vector<Frame>& frames) {
  Bits out;
  for (const auto& f : frames) out.insert(out.end(), f.info_bits.begin(), f.info_bits.end());
  return out;
}

Bits concat_coded(const std::vector<Frame>& frames) {
  Bits out;
  for (const auto& f : frames) out.insert(out.end(), f.coded_bits.begin(), f.coded_bits.end());
  return out;
}

double agreement(const Bits& a, const Bits& b) {
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace

TEST(TrainingSet, ShapesAndLabels) {
  SeededRng rng(1, 0);
  const auto code = ConvCode::rate_1_3();
  const auto frames = random_frames(rng, code, 1);
  const auto D9 = build_training_set(observe(rng, frames, CVector::Ones(9), 1.0), frames);
  EXPECT_EQ(D9.features.rows(), 150);
  EXPECT_EQ(D9.features.cols(), 18);
  const auto D1 = build_training_set(observe(rng, frames, CVector::Ones(1), 1.0), frames);
  EXPECT_EQ(D1.features.cols(), 2);
  for (std::size_t n = 0; n < 150; ++n) {
    const auto b = D1.bits[n];
    EXPECT_EQ(b[0], frames[0].coded_bits[2 * n]);
    EXPECT_EQ(Qpsk::point(D1.classes[n]), frames[0].symbols[static_cast<Eigen::Index>(n)]);
    if (b[0] == 1 && b[1] == 0) {
      EXPECT_EQ(Qpsk::point(D1.classes[n]), cplx(-1.0, 1.0) / std::sqrt(2.0));
    }
  }
  EXPECT_THROW(build_training_set(CMatrix::Zero(149, 1), frames), DimensionError);
}

TEST(FitLogreg, SeparableOneDimensional) {
  RMatrix X(40, 1);
  RVector y(40);
  for (int i = 0; i < 40; ++i) {
    X(i, 0) = (i - 19.5) / 10.0;
    y[i] = X(i, 0) > 0 ? 1.0 : 0.0;
  }
  LogRegTrace trace;
  const auto c = fit_logreg(X, y, {}, &trace);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(predict_proba(c, X.row(i).transpose()) > 0.5, y[i] == 1.0);
  EXPECT_LT(trace.final_gradient_norm, 1e-6);
  for (std::size_t k = 1; k < trace.loss.size(); ++k) EXPECT_LE(trace.loss[k], trace.loss[k - 1]);
}

TEST(FitLogreg, StationaryPointOfRegularisedLoss) {
  SeededRng rng(2, 0);
  const int n = 300, d = 4;
  RMatrix X(n, d);
  RVector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-(X(i, 0) - 0.5 * X(i, 2) + 0.3))) ? 1.0 : 0.0;
  }
  LogRegOptions o;
  o.l2 = 0.01;
  const auto c = fit_logreg(X, y, o);
  // Independent gradient of mean loss + (l2/2)||w||^2.
  RVector gw = RVector::Zero(d);
  double gb = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(X.row(i).dot(c.weights) + c.bias)));
    gw += (p - y[i]) * X.row(i).transpose() / n;
    gb += (p - y[i]) / n;
  }
  gw += o.l2 * c.weights;
  EXPECT_LT(std::sqrt(gw.squaredNorm() + gb * gb), 1e-6);
  EXPECT_NEAR(c.prior1, y.mean(), 1e-15);
}

TEST(FitLogreg, CoinFlipLabelsGiveChance) {
  SeededRng rng(3, 0);
  const int n = 2000;
  auto draw = [&](RMatrix& X, RVector& y) {
    X.resize(n, 3);
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();
      y[i] = rng.bit();
    }
  };
  RMatrix Xtr, Xte;
  RVector ytr, yte;
  draw(Xtr, ytr);
  draw(Xte, yte);
  const auto c = fit_logreg(Xtr, ytr);
  int right = 0;
  for (int i = 0; i < n; ++i) right += (predict_proba(c, Xte.row(i).transpose()) > 0.5) == (yte[i] == 1.0);
  EXPECT_NEAR(right / static_cast<double>(n), 0.5, 0.05);
}

TEST(FitLogreg, RejectsNonFiniteAndHandlesOneClass) {
  RMatrix X = RMatrix::Ones(3, 1);
  X(1, 0) = std::nan("");
  EXPECT_THROW(fit_logreg(X, RVector::Ones(3)), InputError);
  const auto c = fit_logreg(RMatrix::Ones(3, 1), RVector::Ones(3));
  EXPECT_NEAR(predict_proba(c, RVector::Ones(1)), 1.0 - kProbClip, 1e-15);
}

TEST(PredictProba, SigmoidAndClip) {
  BinaryClassifier c;
  c.weights = RVector::Ones(1);
  EXPECT_DOUBLE_EQ(predict_proba(c, RVector::Zero(1)), 0.5);
  EXPECT_NEAR(predict_proba(c, RVector::Constant(1, 2.0)), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(predict_proba(c, RVector::Constant(1, 2.0)), 0.8808, 1e-4);
  const double top = predict_proba(c, RVector::Constant(1, 1e3));
  EXPECT_EQ(top, 1.0 - 1e-9);
  EXPECT_LT(top, 1.0);
  EXPECT_EQ(predict_proba(c, RVector::Constant(1, -1e3)), 1e-9);
}

TEST(PlattFit, RecoversIdentityOnTrueLogits) {
  SeededRng rng(4, 0);
  const int n = 5000;
  RVector f(n);
  std::vector<std::uint8_t> y(n), flipped(n);
  for (int i = 0; i < n; ++i) {
    f[i] = 3.0 * rng.normal();
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-f[i]));
    flipped[i] = !y[i];
  }
  const auto p = platt_fit(f, y);
  EXPECT_NEAR(p.A, -1.0, 0.1);
  EXPECT_NEAR(p.B, 0.0, 0.1);
  const auto q = platt_fit(f, flipped);
  EXPECT_GT(q.A, 0.0);
}

TEST(PlattFit, ConstantScoresGiveBaseRate) {
  RVector f = RVector::Constant(400, 0.7);
  std::vector<std::uint8_t> y(400, 0);
  for (int i = 0; i < 100; ++i) y[i] = 1;
  const auto p = platt_fit(f, y);
  const double prob = 1.0 / (1.0 + std::exp(p.A * 0.7 + p.B));
  EXPECT_NEAR(prob, 0.25, 0.01);
  EXPECT_THROW(platt_fit(f, std::vector<std::uint8_t>(400, 1)), DomainError);
}

TEST(Llr, Values) {
  EXPECT_EQ(llr_from_proba(0.5), 0.0);
  EXPECT_NEAR(llr_from_proba(0.9), -2.1972, 1e-4);
  EXPECT_NEAR(llr_from_proba(0.1), 2.1972, 1e-4);
  EXPECT_NEAR(llr_from_proba(0.0), std::log((1 - 1e-9) / 1e-9), 1e-6);
  EXPECT_LE(std::abs(llr_from_proba(1.0)), 20.73);
  SeededRng rng(5, 0);
  for (int i = 0; i < 1000; ++i) {
    const double q = rng.uniform();
    const double l = llr_from_proba(q);
    EXPECT_TRUE(std::isfinite(l));
    if (q != 0.5) EXPECT_EQ(l > 0, q < 0.5);
  }
}

TEST(FitSoftmax, StationaryPointOfRegularisedLoss) {
  SeededRng rng(12, 0);
  const int n = 400, d = 3, C = 4;
  RMatrix X(n, d);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
    y[i] = (X(i, 0) + 0.7 * rng.normal() > 0 ? 2 : 0) + (X(i, 1) - 0.5 * X(i, 2) > 0.2 ? 1 : 0);
  }
  LogRegOptions o;
  o.l2 = 0.01;
  const auto cs = fit_softmax(X, y, C, o);
  ASSERT_EQ(cs.size(), 4u);
  // Independent gradient of mean cross-entropy + (l2/2) sum ||w_j||^2.
  RMatrix gw = RMatrix::Zero(d, C);
  RVector gb = RVector::Zero(C);
  for (int i = 0; i < n; ++i) {
    RVector s(C);
    for (int j = 0; j < C; ++j) s[j] = X.row(i).dot(cs[j].weights) + cs[j].bias;
    RVector p = (s.array() - s.maxCoeff()).exp();
    p /= p.sum();
    for (int j = 0; j < C; ++j) {
      const double r = p[j] - (y[i] == j ? 1.0 : 0.0);
      gw.col(j) += r * X.row(i).transpose() / n;
      gb[j] += r / n;
    }
  }
  for (int j = 0; j < C; ++j) gw.col(j) += o.l2 * cs[j].weights;
  EXPECT_LT(std::sqrt(gw.squaredNorm() + gb.squaredNorm()), 1e-6);
  EXPECT_NEAR(softmax_proba(cs, X.row(0).transpose()).sum(), 1.0, 1e-12);
}

TEST(FitSoftmax, AbsentClassNeverPredicted) {
  RMatrix X(6, 1);
  X << -2, -1, 0.1, 0.2, 1, 2;
  const std::vector<int> y = {0, 0, 1, 1, 3, 3};
  const auto cs = fit_softmax(X, y, 4);
  for (int i = 0; i < 6; ++i) EXPECT_LT(softmax_proba(cs, X.row(i).transpose())[2], 1e-10);
  EXPECT_THROW(fit_softmax(X, {0, 0, 1, 1, 3, 4}, 4), DomainError);
}

TEST(Attacker, NoiselessSeparableDecodesPerfectly) {
  SeededRng rng(6, 0);
  const auto code = ConvCode::rate_1_3();
  const CVector gains = (CVector(2) << cplx(1.0, 0.3), cplx(-0.4, 0.8)).finished();
  const auto pilots = random_frames(rng, code, 2);
  const auto data = random_frames(rng, code, 3);
  const auto D = build_training_set(observe(rng, pilots, gains, 0.0), pilots);
  const CMatrix Yd = observe(rng, data, gains, 0.0);
  for (auto s : {Strategy::kBR, Strategy::kCC}) {
    const auto att = fit_attacker(D, s);
    const auto out = attack_soft(att, Yd, code);
    EXPECT_EQ(out.payload, concat_payload(data)) << to_string(s);
    EXPECT_EQ(out.coded_decisions, concat_coded(data));
  }
  const auto mcc = fit_attacker(D, Strategy::kMCC);
  ASSERT_EQ(mcc.classifiers.size(), 4u);
  const auto out = attack_hard(mcc, Yd, code);
  EXPECT_EQ(out.payload, concat_payload(data));
  int right = 0;
  for (Eigen::Index i = 0; i < D.size(); ++i) {
    right += mcc.predict_class(D.features.row(i).transpose()) == D.classes[i];
  }
  EXPECT_EQ(right, D.size());

  AttackerOptions so;
  so.softmax = true;
  const auto sm = fit_attacker(D, Strategy::kMCC, so);
  EXPECT_TRUE(sm.softmax);
  EXPECT_EQ(attack_hard(sm, Yd, code).payload, concat_payload(data));
}

TEST(Attacker, SoftThresholdMatchesMccOnSeparableData) {
  SeededRng rng(7, 0);
  const auto code = ConvCode::rate_1_3();
  const auto pilots = random_frames(rng, code, 2);
  const auto D = build_training_set(observe(rng, pilots, CVector::Ones(1), 0.0), pilots);
  const auto br = fit_attacker(D, Strategy::kBR);
  const auto mcc = fit_attacker(D, Strategy::kMCC);
  for (Eigen::Index i = 0; i < D.size(); ++i) {
    const RVector row = D.features.row(i).transpose();
    const auto q = br.bit_proba(row);
    const int from_soft = 2 * (q[0] > 0.5 ? 1 : 0) + (q[1] > 0.5 ? 1 : 0);
    EXPECT_EQ(from_soft, mcc.predict_class(row));
  }
}

TEST(Attacker, BrAndCcAgreeWithoutLabelCorrelation) {
  SeededRng rng(8, 0);
  const auto code = ConvCode::rate_1_3();
  const CVector gains = (CVector(3) << cplx(0.5, 0.1), cplx(0.2, -0.6), cplx(-0.3, 0.3)).finished();
  const auto pilots = random_frames(rng, code, 2);
  const auto data = random_frames(rng, code, 10);
  const auto D = build_training_set(observe(rng, pilots, gains, 1.0), pilots);
  const CMatrix Yd = observe(rng, data, gains, 1.0);
  const Bits truth = concat_coded(data);
  const double acc_br = agreement(attack_soft(fit_attacker(D, Strategy::kBR), Yd, code).coded_decisions, truth);
  const double acc_cc = agreement(attack_soft(fit_attacker(D, Strategy::kCC), Yd, code).coded_decisions, truth);
  EXPECT_GT(acc_br, 0.6);
  EXPECT_NEAR(acc_br, acc_cc, 0.02);
}

TEST(Attacker, NoLeakageWhenLabelsAreIndependent) {
  SeededRng rng(9, 0);
  const auto code = ConvCode::rate_1_3();
  const CVector gains = CVector::Ones(4);
  const auto pilots = random_frames(rng, code, 2);
  const auto decoys = random_frames(rng, code, 2);
  // Features come from decoy frames; labels from unrelated pilot frames.
  const auto D = build_training_set(observe(rng, decoys, gains, 0.5), pilots);
  const auto data = random_frames(rng, code, 20);
  const auto other = random_frames(rng, code, 20);
  const CMatrix Yd = observe(rng, other, gains, 0.5);
  const auto out = attack_soft(fit_attacker(D, Strategy::kCC), Yd, code);
  const Bits truth = concat_coded(data);
  const double acc = agreement(out.coded_decisions, truth);
  const double se = std::sqrt(0.25 / static_cast<double>(truth.size()));
  EXPECT_LT(std::abs(acc - 0.5), 3.0 * se);
}

TEST(Attacker, DeterministicAndCalibratedPathRuns) {
  SeededRng r1(10, 0), r2(10, 0);
  const auto code = ConvCode::rate_1_3();
  auto make = [&](SeededRng& rng) {
    const auto pilots = random_frames(rng, code, 1);
    return build_training_set(observe(rng, pilots, CVector::Ones(2), 1.0), pilots);
  };
  const auto D1 = make(r1);
  const auto D2 = make(r2);
  AttackerOptions o;
  o.calibrate = true;
  const auto a = fit_attacker(D1, Strategy::kCC, o);
  const auto b = fit_attacker(D2, Strategy::kCC, o);
  std::ostringstream sa, sb;
  save_attacker_csv(a, sa);
  save_attacker_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(a.classifiers[0].calib_A, -1.0);
  EXPECT_LT(a.classifiers[0].calib_A, 0.0);
  int lines = 0;
  for (char ch : sa.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 3);
}

TEST(Attacker, InputChecks) {
  SeededRng rng(11, 0);
  const auto code = ConvCode::rate_1_3();
  const auto pilots = random_frames(rng, code, 1);
  const auto D = build_training_set(observe(rng, pilots, CVector::Ones(2), 1.0), pilots);
  const auto att = fit_attacker(D, Strategy::kBR);
  EXPECT_THROW(attack_soft(att, CMatrix::Zero(150, 3), code), DimensionError);
  EXPECT_THROW(attack_soft(att, CMatrix::Zero(100, 2), code), FramingError);
  EXPECT_THROW(attack_hard(att, CMatrix::Zero(150, 2), code), ConfigError);
}
