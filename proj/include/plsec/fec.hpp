#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace plsec {

using Bits = std::vector<std::uint8_t>;

/// Zero-terminated feed-forward convolutional code.
///
/// Generators are tap masks of constraint_length bits; the most significant
/// bit taps the current input (the usual octal convention, e.g. 0133).
struct ConvCode {
  int constraint_length = 7;
  std::vector<std::uint32_t> generators;
  int frame_symbols = 150;  ///< QPSK symbols per coded frame.

  int outputs_per_bit() const { return static_cast<int>(generators.size()); }
  int tail_bits() const { return constraint_length - 1; }
  int coded_bits() const { return 2 * frame_symbols; }
  int trellis_steps() const { return coded_bits() / outputs_per_bit(); }
  int payload_bits() const { return trellis_steps() - tail_bits(); }
  int num_states() const { return 1 << (constraint_length - 1); }

  /// Throws ConfigError if the invariants do not hold.
  void validate() const;

  /// Space separated octal generators, e.g. "133 171 165".
  std::string generators_octal() const;

  /// Rate 1/3: (133, 171, 165). Rate 1/4: (133, 171, 165, 117).
  static ConvCode rate_1_3();
  static ConvCode rate_1_4();
  /// inverse_rate 3 or 4.
  static ConvCode for_rate(int inverse_rate);
};

/// Encodes exactly payload_bits() bits, appends the zero tail and returns
/// coded_bits() bits, output-major within each trellis step.
Bits conv_encode(const ConvCode& code, std::span<const std::uint8_t> payload);

struct ViterbiOptions {
  /// 0 selects full-frame traceback from the terminating zero state. A
  /// positive value emits each decision after that many trellis steps.
  int traceback_depth = 0;
};

/// Minimum Hamming distance decoding; returns the payload (tail stripped).
Bits viterbi_hard(const ConvCode& code, std::span<const std::uint8_t> coded,
                  ViterbiOptions opts = {});

/// Maximises sum_i (1 - 2 c_i) * llr_i; positive LLR favours bit 0.
Bits viterbi_soft(const ConvCode& code, std::span<const double> llrs,
                  ViterbiOptions opts = {});

/// Correlation metric sum_i (1 - 2 c_i) * llr_i of the codeword of payload.
double soft_path_metric(const ConvCode& code,
                        std::span<const std::uint8_t> payload,
                        std::span<const double> llrs);

}  // namespace plsec
