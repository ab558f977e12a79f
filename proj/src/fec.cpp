#include "plsec/fec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "plsec/errors.hpp"

namespace plsec {

void ConvCode::validate() const {
  if (constraint_length < 2 || constraint_length > 16) {
    throw ConfigError("ConvCode: constraint length out of range");
  }
  if (generators.size() < 2) throw ConfigError("ConvCode: need >= 2 generators");
  for (auto g : generators) {
    if (g == 0 || g >= (1u << constraint_length)) {
      throw ConfigError("ConvCode: generator does not fit constraint length");
    }
  }
  if (frame_symbols <= 0 || coded_bits() % outputs_per_bit() != 0 ||
      payload_bits() <= 0) {
    throw ConfigError("ConvCode: frame size incompatible with rate");
  }
}

std::string ConvCode::generators_octal() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (i) os << ' ';
    os << std::oct << generators[i];
  }
  return os.str();
}

ConvCode ConvCode::rate_1_3() { return ConvCode{7, {0133, 0171, 0165}, 150}; }
ConvCode ConvCode::rate_1_4() {
  return ConvCode{7, {0133, 0171, 0165, 0117}, 150};
}
ConvCode ConvCode::for_rate(int inverse_rate) {
  if (inverse_rate == 3) return rate_1_3();
  if (inverse_rate == 4) return rate_1_4();
  throw ConfigError("ConvCode: unsupported rate 1/" + std::to_string(inverse_rate));
}

namespace {

// Output bits of every (input, state) window, packed LSB = first generator.
std::vector<std::uint32_t> output_table(const ConvCode& code) {
  const std::uint32_t windows = 1u << code.constraint_length;
  std::vector<std::uint32_t> table(windows);
  for (std::uint32_t w = 0; w < windows; ++w) {
    std::uint32_t out = 0;
    for (int g = 0; g < code.outputs_per_bit(); ++g) {
      out |= static_cast<std::uint32_t>(std::popcount(w & code.generators[g]) & 1)
             << g;
    }
    table[w] = out;
  }
  return table;
}

// Core add-compare-select over per-coded-bit soft values v (positive favours
// 0). Starts and terminates in the zero state.
Bits viterbi_core(const ConvCode& code, std::span<const double> v,
                  const ViterbiOptions& opts) {
  const int n_out = code.outputs_per_bit();
  const int steps = code.trellis_steps();
  const int states = code.num_states();
  const int shift = code.constraint_length - 1;
  const auto table = output_table(code);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<double> metric(states, kNegInf), next(states);
  metric[0] = 0.0;
  // decisions[t * states + s'] = low bit of the surviving predecessor.
  std::vector<std::uint8_t> decisions(static_cast<std::size_t>(steps) * states);
  std::vector<double> branch(std::size_t{1} << n_out);

  Bits decoded(steps, 0);
  const int depth = opts.traceback_depth;
  auto trace = [&](int from_step, int state, int emit_step) {
    // Walks survivors back from from_step (inclusive) and stores the input
    // bit of emit_step.
    for (int t = from_step; t >= emit_step; --t) {
      const int u = state >> (shift - 1);
      if (t == emit_step) {
        decoded[t] = static_cast<std::uint8_t>(u);
        return;
      }
      const int b = decisions[static_cast<std::size_t>(t) * states + state];
      state = ((state << 1) & (states - 1)) | b;
    }
  };

  for (int t = 0; t < steps; ++t) {
    const double* vt = v.data() + static_cast<std::size_t>(t) * n_out;
    for (std::size_t pattern = 0; pattern < branch.size(); ++pattern) {
      double acc = 0.0;
      for (int g = 0; g < n_out; ++g) acc += (pattern >> g & 1) ? -vt[g] : vt[g];
      branch[pattern] = acc;
    }
    for (int s2 = 0; s2 < states; ++s2) {
      const int u = s2 >> (shift - 1);
      const int base = (s2 << 1) & (states - 1);
      double best = kNegInf;
      int best_b = 0;
      for (int b = 0; b < 2; ++b) {
        const int s = base | b;
        if (metric[s] == kNegInf) continue;
        const std::uint32_t w = (static_cast<std::uint32_t>(u) << shift) | s;
        const double m = metric[s] + branch[table[w]];
        if (m > best) {
          best = m;
          best_b = b;
        }
      }
      next[s2] = best;
      decisions[static_cast<std::size_t>(t) * states + s2] =
          static_cast<std::uint8_t>(best_b);
    }
    metric.swap(next);
    if (depth > 0 && t >= depth) {
      const auto best_state = static_cast<int>(
          std::max_element(metric.begin(), metric.end()) - metric.begin());
      trace(t, best_state, t - depth);
    }
  }

  // Flush: everything not yet emitted comes from the zero-state survivor.
  const int first_unemitted = depth > 0 ? std::max(0, steps - 1 - depth + 1) : 0;
  int state = 0;
  for (int t = steps - 1; t >= first_unemitted; --t) {
    decoded[t] = static_cast<std::uint8_t>(state >> (shift - 1));
    const int b = decisions[static_cast<std::size_t>(t) * states + state];
    state = ((state << 1) & (states - 1)) | b;
  }
  decoded.resize(code.payload_bits());
  return decoded;
}

}  // namespace

Bits conv_encode(const ConvCode& code, std::span<const std::uint8_t> payload) {
  code.validate();
  if (static_cast<int>(payload.size()) != code.payload_bits()) {
    throw FramingError("conv_encode: payload has " +
                       std::to_string(payload.size()) + " bits, expected " +
                       std::to_string(code.payload_bits()));
  }
  const int shift = code.constraint_length - 1;
  const auto table = output_table(code);
  Bits out;
  out.reserve(code.coded_bits());
  std::uint32_t state = 0;
  for (int t = 0; t < code.trellis_steps(); ++t) {
    const std::uint32_t u = t < code.payload_bits() ? (payload[t] & 1u) : 0u;
    const std::uint32_t w = (u << shift) | state;
    const std::uint32_t bits = table[w];
    for (int g = 0; g < code.outputs_per_bit(); ++g) {
      out.push_back(static_cast<std::uint8_t>(bits >> g & 1));
    }
    state = w >> 1;
  }
  return out;
}

Bits viterbi_hard(const ConvCode& code, std::span<const std::uint8_t> coded,
                  ViterbiOptions opts) {
  code.validate();
  if (static_cast<int>(coded.size()) != code.coded_bits()) {
    throw FramingError("viterbi_hard: got " + std::to_string(coded.size()) +
                       " coded bits, expected " +
                       std::to_string(code.coded_bits()));
  }
  std::vector<double> v(coded.size());
  std::transform(coded.begin(), coded.end(), v.begin(),
                 [](std::uint8_t b) { return b ? -1.0 : 1.0; });
  return viterbi_core(code, v, opts);
}

Bits viterbi_soft(const ConvCode& code, std::span<const double> llrs,
                  ViterbiOptions opts) {
  code.validate();
  if (static_cast<int>(llrs.size()) != code.coded_bits()) {
    throw FramingError("viterbi_soft: got " + std::to_string(llrs.size()) +
                       " LLRs, expected " + std::to_string(code.coded_bits()));
  }
  for (double l : llrs) {
    if (!std::isfinite(l)) throw InputError("viterbi_soft: non-finite LLR");
  }
  return viterbi_core(code, llrs, opts);
}

double soft_path_metric(const ConvCode& code,
                        std::span<const std::uint8_t> payload,
                        std::span<const double> llrs) {
  const Bits cw = conv_encode(code, payload);
  if (llrs.size() != cw.size()) throw FramingError("soft_path_metric: length");
  double m = 0.0;
  for (std::size_t i = 0; i < cw.size(); ++i) m += cw[i] ? -llrs[i] : llrs[i];
  return m;
}

}  // namespace plsec
