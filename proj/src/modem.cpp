#include "plsec/modem.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "plsec/errors.hpp"

namespace plsec {

namespace {
constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
}

cplx Qpsk::point(int index) {
  const auto b = bits(index);
  return cplx((1.0 - 2.0 * b[0]) * kInvSqrt2, (1.0 - 2.0 * b[1]) * kInvSqrt2);
}

std::array<std::uint8_t, 2> Qpsk::bits(int index) {
  if (index < 0 || index >= kOrder) throw DomainError("Qpsk: index out of range");
  return {static_cast<std::uint8_t>(index >> 1), static_cast<std::uint8_t>(index & 1)};
}

int Qpsk::index_of(cplx d) {
  for (int i = 0; i < kOrder; ++i) {
    if (std::abs(d - point(i)) < 1e-12) return i;
  }
  throw DomainError("Qpsk: value is not a constellation point");
}

CVector modulate(std::span<const std::uint8_t> bits) {
  if (bits.size() % 2 != 0) {
    throw FramingError("modulate: odd number of bits (" +
                       std::to_string(bits.size()) + ")");
  }
  CVector out(static_cast<Eigen::Index>(bits.size() / 2));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = Qpsk::point(Qpsk::index(bits[2 * i], bits[2 * i + 1]));
  }
  return out;
}

std::array<std::uint8_t, 2> hard_detect(cplx v) {
  return {static_cast<std::uint8_t>(v.real() < 0.0),
          static_cast<std::uint8_t>(v.imag() < 0.0)};
}

Bits hard_demap(const CVector& v) {
  Bits out;
  out.reserve(2 * v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto b = hard_detect(v[i]);
    out.push_back(b[0]);
    out.push_back(b[1]);
  }
  return out;
}

std::pair<double, double> ci_margins(cplx d, cplx v, double tau) {
  if (!(tau >= 0.0)) throw DomainError("ci_margins: tau must be >= 0");
  Qpsk::index_of(d);
  const double sr = d.real() > 0 ? 1.0 : -1.0;
  const double si = d.imag() > 0 ? 1.0 : -1.0;
  return {sr * v.real() - tau * std::abs(d.real()),
          si * v.imag() - tau * std::abs(d.imag())};
}

Frame make_frame(SeededRng& rng, const ConvCode& code, int user, FrameRole role) {
  Frame f;
  f.role = role;
  f.user = user;
  f.info_bits.resize(code.payload_bits());
  for (auto& b : f.info_bits) b = static_cast<std::uint8_t>(rng.bit());
  f.coded_bits = conv_encode(code, f.info_bits);
  f.symbols = modulate(f.coded_bits);
  return f;
}

std::vector<std::vector<Frame>> generate_pilot_block(std::uint64_t seed, int K,
                                                     int N, const ConvCode& code) {
  if (K < 1) throw ConfigError("generate_pilot_block: K must be >= 1");
  if (N <= 0 || N % code.frame_symbols != 0) {
    throw FramingError("generate_pilot_block: N=" + std::to_string(N) +
                       " is not a multiple of the frame size " +
                       std::to_string(code.frame_symbols));
  }
  const int frames = N / code.frame_symbols;
  std::vector<std::vector<Frame>> out(K);
  for (int k = 0; k < K; ++k) {
    SeededRng rng(seed, derive_stream(0x70696c6f74ULL, static_cast<std::uint64_t>(k)));
    for (int f = 0; f < frames; ++f) {
      out[k].push_back(make_frame(rng, code, k, FrameRole::kPilot));
    }
  }
  return out;
}

CMatrix stack_symbols(const std::vector<std::vector<Frame>>& frames_by_user) {
  const auto K = static_cast<Eigen::Index>(frames_by_user.size());
  if (K == 0) return {};
  Eigen::Index slots = 0;
  for (const auto& f : frames_by_user[0]) slots += f.symbols.size();
  CMatrix out(slots, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    Eigen::Index n = 0;
    for (const auto& f : frames_by_user[k]) {
      if (n + f.symbols.size() > slots) {
        throw FramingError("stack_symbols: users carry different slot counts");
      }
      out.col(k).segment(n, f.symbols.size()) = f.symbols;
      n += f.symbols.size();
    }
    if (n != slots) throw FramingError("stack_symbols: users carry different slot counts");
  }
  return out;
}

}  // namespace plsec
