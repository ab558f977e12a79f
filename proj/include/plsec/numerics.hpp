#pragma once

// Dense complex linear algebra, real embedding and seeded randomness shared by
// every other module. Everything here is double precision.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace plsec {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Right pseudo-inverse H^H (H H^H)^{-1} of a full-row-rank matrix.
/// Throws SingularChannelError when the Gram matrix condition estimate
/// exceeds 1e12.
CMatrix pseudo_inverse(const CMatrix& H);

/// [Re v0, Im v0, Re v1, Im v1, ...]
RVector real_embed(const CVector& v);

/// Inverse of real_embed. Throws DimensionError on odd length.
CVector complex_from_embed(const RVector& r);

/// Real 2m x 2n matrix R such that real_embed(A v) == R * real_embed(v).
RMatrix real_embed_matrix(const CMatrix& A);

/// Deterministic random stream keyed by (seed, stream id).
///
/// Built on mt19937_64 seeded through std::seed_seq, both of which are fully
/// specified by the standard, and on in-house uniform/normal transforms, so a
/// given key yields the same draws on every host and under any thread
/// schedule. Instances are cheap enough to create one per frame.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller, paired draws cached).
  double normal();
  /// Fair bit.
  int bit() { return static_cast<int>(engine_() >> 63); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Mixes several integers into one stream id (splitmix64 finaliser chain).
std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b = 0,
                            std::uint64_t c = 0, std::uint64_t d = 0);

/// n i.i.d. CN(0, variance) draws; real and imaginary parts have variance/2.
CVector sample_cn(SeededRng& rng, int n, double variance);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace plsec
