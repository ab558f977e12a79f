#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "plsec/fec.hpp"
#include "plsec/numerics.hpp"

namespace plsec {

/// Gray-labelled unit-energy QPSK.
///
/// Label (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2); b0 rides on the
/// real part, b1 on the imaginary part. Symbol index = 2 b0 + b1.
struct Qpsk {
  static constexpr int kOrder = 4;
  static constexpr int kBitsPerSymbol = 2;

  static cplx point(int index);
  static std::array<std::uint8_t, 2> bits(int index);
  static int index(std::uint8_t b0, std::uint8_t b1) { return 2 * (b0 & 1) + (b1 & 1); }
  /// Index of an exact alphabet point; throws DomainError otherwise.
  static int index_of(cplx d);
};

enum class FrameRole { kPilot, kData };

/// One coded frame for a single user.
struct Frame {
  Bits info_bits;
  Bits coded_bits;
  CVector symbols;
  FrameRole role = FrameRole::kData;
  int user = 0;
};

/// Pairs of bits to QPSK points; throws FramingError on odd length.
CVector modulate(std::span<const std::uint8_t> bits);

/// Quadrant decision; a zero component decides bit 0.
std::array<std::uint8_t, 2> hard_detect(cplx v);

/// Hard demap of a whole symbol vector.
Bits hard_demap(const CVector& v);

/// Signed distances of v beyond the constructive-interference threshold of d:
/// m_re = sgn(Re d) Re v - tau |Re d|, m_im likewise. Both are >= 0 iff v lies
/// in d's detection region at least tau |.| deep along each axis.
std::pair<double, double> ci_margins(cplx d, cplx v, double tau);

/// Encodes random info bits for one frame of user `user`.
Frame make_frame(SeededRng& rng, const ConvCode& code, int user, FrameRole role);

/// Pseudo-random coded pilot frames, N symbols per user, drawn from streams
/// derived from (seed, user) so that any party holding the seed regenerates
/// them bit-for-bit. Returns frames grouped by user, in time order.
std::vector<std::vector<Frame>> generate_pilot_block(std::uint64_t seed, int K,
                                                     int N, const ConvCode& code);

/// Slot-major view of per-user frames: row n holds every user's symbol in
/// slot n. All users must carry the same number of symbols.
CMatrix stack_symbols(const std::vector<std::vector<Frame>>& frames_by_user);

}  // namespace plsec
