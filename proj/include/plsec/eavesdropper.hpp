#pragma once

// Eve's learning attack: logistic-regression classifiers trained on the
// precoded pilots she overhears, turned into bit LLRs for a soft Viterbi
// decoder (BR, CC) or into symbol decisions for a hard one (MCC).

#include <array>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "plsec/fec.hpp"
#include "plsec/modem.hpp"
#include "plsec/numerics.hpp"

namespace plsec {

struct TrainingSet {
  RMatrix features;                               ///< N x 2M
  std::vector<std::array<std::uint8_t, 2>> bits;  ///< N coded bit pairs
  std::vector<int> classes;                       ///< N symbol indices

  Eigen::Index size() const { return features.rows(); }
};

/// Rows of Ye (slots x M) are real-embedded; labels are the coded bits of
/// the given frames in time order.
TrainingSet build_training_set(const CMatrix& Ye, const std::vector<Frame>& frames);

struct BinaryClassifier {
  RVector weights;
  double bias = 0.0;
  double calib_A = -1.0;  ///< p = 1 / (1 + exp(A f + B)) on the raw score f
  double calib_B = 0.0;
  double prior0 = 0.5;
  double prior1 = 0.5;

  double score(const Eigen::Ref<const RVector>& row) const { return weights.dot(row) + bias; }
};

struct LogRegOptions {
  double l2 = 1e-4;
  double gradient_tolerance = 1e-6;
  int max_iterations = 200;
};

/// Optional per-iteration record of the regularised mean loss.
struct LogRegTrace {
  std::vector<double> loss;
  double final_gradient_norm = 0.0;
  int iterations = 0;
};

/// Minimises mean log-loss + (l2/2)||w||^2 (bias unpenalised) by damped
/// Newton steps with backtracking. Targets may be soft, in [0, 1].
/// Single-class data yields a constant classifier.
BinaryClassifier fit_logreg(const RMatrix& X, const RVector& targets,
                            const LogRegOptions& opts = {}, LogRegTrace* trace = nullptr);

inline constexpr double kProbClip = 1e-9;

/// Calibrated sigmoid of the score, clipped to [kProbClip, 1 - kProbClip].
double predict_proba(const BinaryClassifier& c, const Eigen::Ref<const RVector>& row);

struct PlattParams {
  double A = -1.0;
  double B = 0.0;
};

/// Sigmoid fit p = 1 / (1 + exp(A f + B)) to (score, label) pairs, with the
/// usual prior-smoothed targets. Throws DomainError on single-class input.
PlattParams platt_fit(const RVector& scores, const std::vector<std::uint8_t>& labels);

enum class Strategy { kBR, kCC, kMCC };

std::string_view to_string(Strategy s);

/// Multinomial (softmax) regression over n_classes labels 0..n_classes-1:
/// mean cross-entropy + (l2/2) sum_j ||w_j||^2, biases unpenalised, by
/// damped Newton steps. Returns one linear scorer per class; argmax of the
/// scores is the most probable class. Classes absent from the data get a
/// bias of -kAbsentBias.
std::vector<BinaryClassifier> fit_softmax(const RMatrix& X, const std::vector<int>& labels,
                                          int n_classes, const LogRegOptions& opts = {},
                                          LogRegTrace* trace = nullptr);

inline constexpr double kAbsentBias = 40.0;

/// Class probabilities from softmax scorers.
RVector softmax_proba(const std::vector<BinaryClassifier>& scorers,
                      const Eigen::Ref<const RVector>& row);

struct AttackerOptions {
  LogRegOptions logreg;
  bool calibrate = false;     ///< Platt on 3-fold out-of-fold scores (BR, CC, one-vs-rest).
  bool softmax = false;       ///< MCC as one softmax fit instead of four one-vs-rest fits.
};

struct TrainedAttacker {
  Strategy strategy = Strategy::kBR;
  std::vector<BinaryClassifier> classifiers;  ///< 2 (BR, CC) or 4 (MCC)
  bool softmax = false;                       ///< MCC classifiers are softmax scorers.
  int feature_dim = 0;

  /// Probabilities that bit 0 and bit 1 equal 1 (BR, CC).
  std::array<double, 2> bit_proba(const Eigen::Ref<const RVector>& row) const;
  /// Most probable symbol index (MCC).
  int predict_class(const Eigen::Ref<const RVector>& row) const;
};

TrainedAttacker fit_attacker(const TrainingSet& D, Strategy strategy,
                             const AttackerOptions& opts = {});

/// ln((1 - q1) / q1) after clipping; positive favours bit 0.
double llr_from_proba(double q1);

struct AttackOutput {
  Bits payload;          ///< Decoded payload bits, frames concatenated.
  Bits coded_decisions;  ///< Pre-decoding hard decision for every coded bit.
};

/// Per slot and bit: probability, LLR, then soft Viterbi per frame.
AttackOutput attack_soft(const TrainedAttacker& att, const CMatrix& Ye,
                         const ConvCode& code);

/// Per slot: argmax class, Gray bits, then hard Viterbi per frame.
AttackOutput attack_hard(const TrainedAttacker& att, const CMatrix& Ye,
                         const ConvCode& code);

/// One line per classifier: "index,bias,A,B,prior0,prior1,w_0,...".
void save_attacker_csv(const TrainedAttacker& att, std::ostream& os);

}  // namespace plsec
