#include "plsec/eavesdropper.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

#include "plsec/errors.hpp"

namespace plsec {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clip(double p) { return std::clamp(p, kProbClip, 1.0 - kProbClip); }

RMatrix with_column(const RMatrix& X, const RVector& col) {
  RMatrix out(X.rows(), X.cols() + 1);
  out.leftCols(X.cols()) = X;
  out.col(X.cols()) = col;
  return out;
}

RVector with_entry(const Eigen::Ref<const RVector>& row, double v) {
  RVector out(row.size() + 1);
  out.head(row.size()) = row;
  out[row.size()] = v;
  return out;
}

}  // namespace

TrainingSet build_training_set(const CMatrix& Ye, const std::vector<Frame>& frames) {
  Eigen::Index slots = 0;
  for (const auto& f : frames) slots += f.symbols.size();
  if (slots != Ye.rows()) {
    throw DimensionError("build_training_set: " + std::to_string(Ye.rows()) +
                         " received slots for " + std::to_string(slots) + " pilot symbols");
  }
  TrainingSet D;
  D.features.resize(Ye.rows(), 2 * Ye.cols());
  for (Eigen::Index n = 0; n < Ye.rows(); ++n) {
    D.features.row(n) = real_embed(Ye.row(n).transpose()).transpose();
  }
  D.bits.reserve(static_cast<std::size_t>(slots));
  D.classes.reserve(static_cast<std::size_t>(slots));
  for (const auto& f : frames) {
    for (std::size_t i = 0; i + 1 < f.coded_bits.size(); i += 2) {
      D.bits.push_back({f.coded_bits[i], f.coded_bits[i + 1]});
      D.classes.push_back(Qpsk::index(f.coded_bits[i], f.coded_bits[i + 1]));
    }
  }
  return D;
}

BinaryClassifier fit_logreg(const RMatrix& X, const RVector& targets,
                            const LogRegOptions& opts, LogRegTrace* trace) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (targets.size() != n || n == 0) throw DimensionError("fit_logreg: need one target per row");
  if (!X.allFinite()) throw InputError("fit_logreg: non-finite features");
  if (!(opts.l2 >= 0.0)) throw ConfigError("fit_logreg: l2 must be >= 0");
  if ((targets.array() < 0.0).any() || (targets.array() > 1.0).any()) {
    throw DomainError("fit_logreg: targets must lie in [0, 1]");
  }

  BinaryClassifier c;
  c.weights = RVector::Zero(d);
  c.prior1 = targets.mean();
  c.prior0 = 1.0 - c.prior1;
  if (targets.maxCoeff() == targets.minCoeff() &&
      (targets[0] == 0.0 || targets[0] == 1.0)) {
    // One class only: the likelihood has no maximiser, predict the class.
    const double edge = std::log((1.0 - kProbClip) / kProbClip);
    c.bias = targets[0] == 1.0 ? edge : -edge;
    if (trace) trace->iterations = 0;
    return c;
  }

  RMatrix Xa(n, d + 1);
  Xa.leftCols(d) = X;
  Xa.col(d).setOnes();
  RVector theta = RVector::Zero(d + 1);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto loss_at = [&](const RVector& th) {
    const RVector z = Xa * th;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += softplus(z[i]) - targets[i] * z[i];
    return s * inv_n + 0.5 * opts.l2 * th.head(d).squaredNorm();
  };

  double loss = loss_at(theta);
  if (trace) trace->loss.push_back(loss);
  RVector grad(d + 1), p(n), wts(n);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const RVector z = Xa * theta;
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(z[i]);
      wts[i] = p[i] * (1.0 - p[i]) * inv_n;
    }
    grad.noalias() = Xa.transpose() * (p - targets) * inv_n;
    grad.head(d) += opts.l2 * theta.head(d);
    if (grad.norm() < opts.gradient_tolerance) break;

    RMatrix H = Xa.transpose() * wts.asDiagonal() * Xa;
    H.diagonal().head(d).array() += opts.l2;
    const double ridge = 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
    H.diagonal().array() += ridge;
    RVector step = -H.ldlt().solve(grad);
    double slope = grad.dot(step);
    if (!step.allFinite() || !(slope < 0.0)) {
      step = -grad;
      slope = -grad.squaredNorm();
    }
    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-14) {
      const RVector cand = theta + alpha * step;
      const double l = loss_at(cand);
      if (l <= loss + 1e-4 * alpha * slope) {
        theta = cand;
        loss = l;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (trace) trace->loss.push_back(loss);
    if (!moved) break;
  }
  c.weights = theta.head(d);
  c.bias = theta[d];
  if (trace) {
    const RVector z = Xa * theta;
    for (Eigen::Index i = 0; i < n; ++i) p[i] = sigmoid(z[i]);
    grad.noalias() = Xa.transpose() * (p - targets) * inv_n;
    grad.head(d) += opts.l2 * theta.head(d);
    trace->final_gradient_norm = grad.norm();
    trace->iterations = it;
  }
  return c;
}

std::vector<BinaryClassifier> fit_softmax(const RMatrix& X, const std::vector<int>& labels,
                                          int n_classes, const LogRegOptions& opts,
                                          LogRegTrace* trace) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const int C = n_classes;
  if (C < 2) throw ConfigError("fit_softmax: need at least two classes");
  if (static_cast<Eigen::Index>(labels.size()) != n || n == 0) {
    throw DimensionError("fit_softmax: need one label per row");
  }
  if (!X.allFinite()) throw InputError("fit_softmax: non-finite features");
  if (!(opts.l2 >= 0.0)) throw ConfigError("fit_softmax: l2 must be >= 0");
  std::vector<int> count(static_cast<std::size_t>(C), 0);
  for (int y : labels) {
    if (y < 0 || y >= C) throw DomainError("fit_softmax: label out of range");
    ++count[static_cast<std::size_t>(y)];
  }
  // Absent classes have no finite optimum; fit on the present ones only.
  std::vector<int> present, slot(static_cast<std::size_t>(C), -1);
  for (int j = 0; j < C; ++j) {
    if (count[static_cast<std::size_t>(j)] > 0) {
      slot[static_cast<std::size_t>(j)] = static_cast<int>(present.size());
      present.push_back(j);
    }
  }
  std::vector<BinaryClassifier> out(static_cast<std::size_t>(C));
  for (int j = 0; j < C; ++j) {
    auto& c = out[static_cast<std::size_t>(j)];
    c.weights = RVector::Zero(d);
    c.prior1 = static_cast<double>(count[static_cast<std::size_t>(j)]) / static_cast<double>(n);
    c.prior0 = 1.0 - c.prior1;
    c.bias = slot[static_cast<std::size_t>(j)] < 0 ? -kAbsentBias : 0.0;
  }
  const int P = static_cast<int>(present.size());
  if (P == 1) {
    out[static_cast<std::size_t>(present[0])].bias = 0.0;
    if (trace) trace->iterations = 0;
    return out;
  }

  const Eigen::Index q = d + 1;  // parameters per class, bias last
  RMatrix Xa(n, q);
  Xa.leftCols(d) = X;
  Xa.col(d).setOnes();
  const double inv_n = 1.0 / static_cast<double>(n);
  RMatrix theta = RMatrix::Zero(q, P);  // column per present class

  auto probs = [&](const RMatrix& th, RMatrix& pr) {
    pr = Xa * th;  // n x P scores
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = pr.row(i).maxCoeff();
      pr.row(i).array() = (pr.row(i).array() - mx).exp();
      const double z = pr.row(i).sum();
      pr.row(i) /= z;
      nll += -std::log(std::max(pr(i, slot[static_cast<std::size_t>(labels[i])]), 1e-300));
    }
    return nll * inv_n + 0.5 * opts.l2 * th.topRows(d).squaredNorm();
  };
  auto flat = [&](const RMatrix& m) { return Eigen::Map<const RVector>(m.data(), m.size()); };

  RMatrix pr;
  double loss = probs(theta, pr);
  if (trace) trace->loss.push_back(loss);
  RMatrix Y = RMatrix::Zero(n, P);
  for (Eigen::Index i = 0; i < n; ++i) Y(i, slot[static_cast<std::size_t>(labels[i])]) = 1.0;

  int it = 0;
  double gnorm = 0.0;
  for (; it < opts.max_iterations; ++it) {
    RMatrix G = Xa.transpose() * (pr - Y) * inv_n;
    G.topRows(d) += opts.l2 * theta.topRows(d);
    gnorm = G.norm();
    if (gnorm < opts.gradient_tolerance) break;

    // Block (a, b) of the Hessian: X^T diag(p_a (delta_ab - p_b)) X / n.
    RMatrix H = RMatrix::Zero(q * P, q * P);
    for (int a = 0; a < P; ++a) {
      for (int b = a; b < P; ++b) {
        RVector w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          w[i] = pr(i, a) * ((a == b ? 1.0 : 0.0) - pr(i, b)) * inv_n;
        }
        const RMatrix blk = Xa.transpose() * w.asDiagonal() * Xa;
        H.block(a * q, b * q, q, q) = blk;
        if (b != a) H.block(b * q, a * q, q, q) = blk.transpose();
      }
      H.block(a * q, a * q, d, d).diagonal().array() += opts.l2;
    }
    // The common shift of all biases is a flat direction; the ridge fixes it.
    H.diagonal().array() += 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
    const RVector g = flat(G);
    RVector step = -H.ldlt().solve(g);
    double slope = g.dot(step);
    if (!step.allFinite() || !(slope < 0.0)) {
      step = -g;
      slope = -g.squaredNorm();
    }
    double alpha = 1.0;
    bool moved = false;
    RMatrix cand_pr;
    while (alpha > 1e-14) {
      RMatrix cand = theta + alpha * Eigen::Map<const RMatrix>(step.data(), q, P);
      const double l = probs(cand, cand_pr);
      if (l <= loss + 1e-4 * alpha * slope) {
        theta = std::move(cand);
        pr = std::move(cand_pr);
        loss = l;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (trace) trace->loss.push_back(loss);
    if (!moved) break;
  }
  for (int a = 0; a < P; ++a) {
    auto& c = out[static_cast<std::size_t>(present[static_cast<std::size_t>(a)])];
    c.weights = theta.col(a).head(d);
    c.bias = theta(d, a);
  }
  if (trace) {
    RMatrix G = Xa.transpose() * (pr - Y) * inv_n;
    G.topRows(d) += opts.l2 * theta.topRows(d);
    trace->final_gradient_norm = G.norm();
    trace->iterations = it;
  }
  return out;
}

RVector softmax_proba(const std::vector<BinaryClassifier>& scorers,
                      const Eigen::Ref<const RVector>& row) {
  RVector s(static_cast<Eigen::Index>(scorers.size()));
  for (std::size_t j = 0; j < scorers.size(); ++j) {
    if (row.size() != scorers[j].weights.size()) {
      throw DimensionError("softmax_proba: feature row has wrong length");
    }
    s[static_cast<Eigen::Index>(j)] = scorers[j].score(row);
  }
  s.array() = (s.array() - s.maxCoeff()).exp();
  return s / s.sum();
}

double predict_proba(const BinaryClassifier& c, const Eigen::Ref<const RVector>& row) {
  if (row.size() != c.weights.size()) {
    throw DimensionError("predict_proba: feature row has wrong length");
  }
  return clip(sigmoid(-(c.calib_A * c.score(row) + c.calib_B)));
}

PlattParams platt_fit(const RVector& scores, const std::vector<std::uint8_t>& labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size() || labels.empty()) {
    throw DimensionError("platt_fit: need one label per score");
  }
  double pos = 0.0;
  for (auto l : labels) pos += l ? 1.0 : 0.0;
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw DomainError("platt_fit: both classes are required");
  const double hi = (pos + 1.0) / (pos + 2.0);
  const double lo = 1.0 / (neg + 2.0);
  RVector t(scores.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = labels[i] ? hi : lo;
  LogRegOptions o;
  o.l2 = 0.0;
  o.gradient_tolerance = 1e-10;
  const auto fit = fit_logreg(scores, t, o);
  return {-fit.weights[0], -fit.bias};
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kBR: return "br";
    case Strategy::kCC: return "cc";
    case Strategy::kMCC: return "mcc";
  }
  return "unknown";
}

namespace {

BinaryClassifier fit_one(const RMatrix& X, const std::vector<std::uint8_t>& y,
                         const AttackerOptions& opts) {
  RVector t(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) t[static_cast<Eigen::Index>(i)] = y[i];
  BinaryClassifier c = fit_logreg(X, t, opts.logreg);
  if (!opts.calibrate || c.prior1 == 0.0 || c.prior1 == 1.0) return c;

  // Out-of-fold scores: slot i belongs to fold i mod 3.
  constexpr int kFolds = 3;
  const Eigen::Index n = X.rows();
  RVector oof(n);
  for (int f = 0; f < kFolds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) (i % kFolds == f ? test : train).push_back(i);
    RMatrix Xt(static_cast<Eigen::Index>(train.size()), X.cols());
    RVector tt(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      Xt.row(static_cast<Eigen::Index>(i)) = X.row(train[i]);
      tt[static_cast<Eigen::Index>(i)] = t[train[i]];
    }
    const auto fold_model = fit_logreg(Xt, tt, opts.logreg);
    for (auto i : test) oof[i] = fold_model.score(X.row(i).transpose());
  }
  const auto pp = platt_fit(oof, y);
  c.calib_A = pp.A;
  c.calib_B = pp.B;
  return c;
}

}  // namespace

TrainedAttacker fit_attacker(const TrainingSet& D, Strategy strategy,
                             const AttackerOptions& opts) {
  const auto n = static_cast<std::size_t>(D.size());
  if (D.bits.size() != n || D.classes.size() != n || n == 0) {
    throw DimensionError("fit_attacker: training set row counts disagree");
  }
  TrainedAttacker att;
  att.strategy = strategy;
  att.feature_dim = static_cast<int>(D.features.cols());
  std::vector<std::uint8_t> b0(n), b1(n);
  for (std::size_t i = 0; i < n; ++i) {
    b0[i] = D.bits[i][0];
    b1[i] = D.bits[i][1];
  }
  switch (strategy) {
    case Strategy::kBR:
      att.classifiers.push_back(fit_one(D.features, b0, opts));
      att.classifiers.push_back(fit_one(D.features, b1, opts));
      break;
    case Strategy::kCC: {
      att.classifiers.push_back(fit_one(D.features, b0, opts));
      RVector col(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) col[static_cast<Eigen::Index>(i)] = b0[i];
      att.classifiers.push_back(fit_one(with_column(D.features, col), b1, opts));
      break;
    }
    case Strategy::kMCC:
      if (opts.softmax) {
        att.softmax = true;
        att.classifiers = fit_softmax(D.features, D.classes, Qpsk::kOrder, opts.logreg);
        break;
      }
      for (int j = 0; j < Qpsk::kOrder; ++j) {
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = D.classes[i] == j;
        att.classifiers.push_back(fit_one(D.features, y, opts));
      }
      break;
  }
  return att;
}

std::array<double, 2> TrainedAttacker::bit_proba(const Eigen::Ref<const RVector>& row) const {
  if (strategy == Strategy::kMCC) throw ConfigError("bit_proba: MCC attacker has no bit classifiers");
  const double q0 = predict_proba(classifiers[0], row);
  if (strategy == Strategy::kBR) return {q0, predict_proba(classifiers[1], row)};
  return {q0, predict_proba(classifiers[1], with_entry(row, q0 > 0.5 ? 1.0 : 0.0))};
}

int TrainedAttacker::predict_class(const Eigen::Ref<const RVector>& row) const {
  if (strategy != Strategy::kMCC) throw ConfigError("predict_class: needs an MCC attacker");
  int best = 0;
  double best_p = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(classifiers.size()); ++j) {
    if (row.size() != classifiers[j].weights.size()) {
      throw DimensionError("predict_class: feature row has wrong length");
    }
    // Softmax is monotone in the score; one-vs-rest compares probabilities.
    const double p = softmax ? classifiers[j].score(row) : predict_proba(classifiers[j], row);
    if (p > best_p) {
      best_p = p;
      best = j;
    }
  }
  return best;
}

double llr_from_proba(double q1) {
  const double q = clip(q1);
  return std::log((1.0 - q) / q);
}

namespace {

void check_attack_input(const TrainedAttacker& att, const CMatrix& Ye, const ConvCode& code) {
  if (2 * Ye.cols() != att.feature_dim) {
    throw DimensionError("attack: Eve antenna count differs from training");
  }
  if (Ye.rows() % code.frame_symbols != 0) {
    throw FramingError("attack: slot count is not a whole number of frames");
  }
}

}  // namespace

AttackOutput attack_soft(const TrainedAttacker& att, const CMatrix& Ye, const ConvCode& code) {
  check_attack_input(att, Ye, code);
  if (att.strategy == Strategy::kMCC) throw ConfigError("attack_soft: needs a BR or CC attacker");
  AttackOutput out;
  out.coded_decisions.reserve(static_cast<std::size_t>(2 * Ye.rows()));
  std::vector<double> llr(static_cast<std::size_t>(code.coded_bits()));
  for (Eigen::Index start = 0; start < Ye.rows(); start += code.frame_symbols) {
    for (int s = 0; s < code.frame_symbols; ++s) {
      const auto q = att.bit_proba(real_embed(Ye.row(start + s).transpose()));
      for (int b = 0; b < 2; ++b) {
        llr[2 * s + b] = llr_from_proba(q[b]);
        out.coded_decisions.push_back(q[b] > 0.5);
      }
    }
    const Bits p = viterbi_soft(code, llr);
    out.payload.insert(out.payload.end(), p.begin(), p.end());
  }
  return out;
}

AttackOutput attack_hard(const TrainedAttacker& att, const CMatrix& Ye, const ConvCode& code) {
  check_attack_input(att, Ye, code);
  if (att.strategy != Strategy::kMCC) throw ConfigError("attack_hard: needs an MCC attacker");
  AttackOutput out;
  out.coded_decisions.reserve(static_cast<std::size_t>(2 * Ye.rows()));
  Bits coded(static_cast<std::size_t>(code.coded_bits()));
  for (Eigen::Index start = 0; start < Ye.rows(); start += code.frame_symbols) {
    for (int s = 0; s < code.frame_symbols; ++s) {
      const auto b = Qpsk::bits(att.predict_class(real_embed(Ye.row(start + s).transpose())));
      coded[2 * s] = b[0];
      coded[2 * s + 1] = b[1];
    }
    out.coded_decisions.insert(out.coded_decisions.end(), coded.begin(), coded.end());
    const Bits p = viterbi_hard(code, coded);
    out.payload.insert(out.payload.end(), p.begin(), p.end());
  }
  return out;
}

void save_attacker_csv(const TrainedAttacker& att, std::ostream& os) {
  const auto old = os.precision(17);
  os << "# strategy=" << to_string(att.strategy) << (att.softmax ? " softmax" : "") << "\n";
  for (std::size_t j = 0; j < att.classifiers.size(); ++j) {
    const auto& c = att.classifiers[j];
    os << j << ',' << c.bias << ',' << c.calib_A << ',' << c.calib_B << ',' << c.prior0
       << ',' << c.prior1;
    for (Eigen::Index i = 0; i < c.weights.size(); ++i) os << ',' << c.weights[i];
    os << '\n';
  }
  os.precision(old);
}

}  // namespace plsec
