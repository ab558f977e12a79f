#pragma once

#include <iosfwd>

#include "plsec/numerics.hpp"

namespace plsec {

/// Block-fading downlink: K single-antenna users and an M-antenna
/// eavesdropper, both fed by an N_t-antenna transmitter.
struct ChannelRealization {
  CMatrix H;   ///< K x N_t user channels.
  CMatrix He;  ///< M x N_t eavesdropper channels.
  double sigma_z2 = 1.0;
  double sigma_e2 = 1.0;

  int num_users() const { return static_cast<int>(H.rows()); }
  int num_tx() const { return static_cast<int>(H.cols()); }
  int num_eve_antennas() const { return static_cast<int>(He.rows()); }

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;
};

/// i.i.d. unit-variance Rayleigh entries for H and He.
ChannelRealization sample_channel(SeededRng& rng, int K, int Nt, int M,
                                  double sigma_z2 = 1.0, double sigma_e2 = 1.0);

/// Noise mode for the receive equations.
enum class Noise { kOn, kOff };

/// y = H x + z, z ~ CN(0, sigma_z2 I). With Noise::kOff the rng is untouched.
CVector receive_users(const ChannelRealization& ch, const CVector& x,
                      SeededRng& rng, Noise noise = Noise::kOn);

/// y_e = He x + z_e, z_e ~ CN(0, sigma_e2 I).
CVector receive_eve(const ChannelRealization& ch, const CVector& x,
                    SeededRng& rng, Noise noise = Noise::kOn);

/// CSV dump: a header line "K,Nt,M,sigma_z2,sigma_e2", then one line per row
/// of H followed by He, entries written as re,im pairs with 17 significant
/// digits so that load_channel_csv round-trips exactly.
void save_channel_csv(const ChannelRealization& ch, std::ostream& os);
ChannelRealization load_channel_csv(std::istream& is);

}  // namespace plsec
