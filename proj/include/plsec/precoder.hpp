#pragma once

// Per-slot transmit vector design. All SLP schemes work on the real
// embedding r = [Re x_0, Im x_0, ...] of the N_t-dimensional transmit vector;
// every complex CI or strip condition becomes one or two linear rows.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "plsec/channel.hpp"
#include "plsec/solver.hpp"

namespace plsec {

enum class PrecoderKind { kZF, kCISPM, kPLSRandom, kPLSEveMin };

std::string_view to_string(PrecoderKind k);
/// Accepts "zf", "cispm", "pls_random", "pls_evemin" (case-insensitive).
PrecoderKind parse_precoder_kind(std::string_view s);

struct PrecoderSpec {
  PrecoderKind kind = PrecoderKind::kZF;
  double eta = 1.0;            ///< ZF mean power, linear.
  std::vector<double> gamma;   ///< Per-user target SINR, linear; one entry broadcasts.
  double delta = 0.1;          ///< Strip half-width for kPLSRandom.
  bool zf_block_normalization = false;  ///< Normalise ZF power per block, not per slot.
  bool evemin_squared = false;          ///< ||x||^2 + ||He x||^2 surrogate (QP).
  /// kPLSRandom variant: |Re| <= delta and |Im| <= delta at every Eve antenna,
  /// so the selector has no effect. Not the per-antenna strip design.
  bool pls_box = false;

  /// Throws ConfigError on violated invariants for a K-user system.
  void validate(int K) const;
  double gamma_for(int k) const;
};

struct SolveResult {
  CVector x;
  double objective = 0.0;
  double power = 0.0;  ///< ||x||^2
  SolveStatus status = SolveStatus::kOptimal;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool fell_back = false;  ///< PLS random slot solved as CISPM instead.
};

/// One bit per Eve antenna; 1 pins Re{h_e^i x}, 0 pins Im{h_e^i x}.
struct BoundarySelector {
  std::vector<std::uint8_t> b;
};

BoundarySelector sample_boundary(SeededRng& rng, int M);

/// x = beta H^+ d with ||x||^2 = eta.
SolveResult zf_precode(const ChannelRealization& ch, const CVector& d, double eta);

/// min ||x||^2 s.t. every user's received point clears the CI threshold
/// sigma_z sqrt(gamma_k) along both axes.
SolveResult cispm_precode(const ChannelRealization& ch, const CVector& d,
                          const std::vector<double>& gamma,
                          const SolverOptions& opts = {});

/// CISPM plus |Re{h_e^i x}| <= delta (b_i = 1) or |Im{h_e^i x}| <= delta
/// (b_i = 0) for every Eve antenna. Infeasibility is reported, not repaired.
SolveResult pls_random_precode(const ChannelRealization& ch, const CVector& d,
                               const std::vector<double>& gamma, double delta,
                               const BoundarySelector& b,
                               const SolverOptions& opts = {});

/// min ||x|| + ||He x|| under the CISPM constraints.
SolveResult pls_evemin_precode(const ChannelRealization& ch, const CVector& d,
                               const std::vector<double>& gamma,
                               const SolverOptions& opts = {});

/// Real rows (G, h) of the CI constraints G r <= h.
void ci_constraints(const RMatrix& Hr, const CVector& d, const RVector& tau,
                    RMatrix& G, RVector& h);

struct PrecodeTelemetry {
  long optimal = 0;
  long max_iter = 0;
  long infeasible = 0;  ///< PLS random slots that fell back to CISPM.
  long iterations = 0;
  long slots = 0;

  PrecodeTelemetry& operator+=(const PrecodeTelemetry& o);
};

/// Channel-bound precoder: caches the pseudo-inverse, the real embeddings
/// and the Eve-min factorisation for one realization. Keeps a reference to
/// the channel, which must outlive it.
class Precoder {
 public:
  Precoder(const ChannelRealization& ch, PrecoderSpec spec, SolverOptions opts = {});

  /// Precodes one slot. `boundary_rng` supplies the PLS random selector and
  /// is ignored by the other schemes.
  SolveResult precode(const CVector& d, SeededRng& boundary_rng) const;

  /// Precodes every row of D (slots x K). ZF block normalisation applies here.
  std::vector<SolveResult> precode_block(const CMatrix& D, SeededRng& boundary_rng,
                                         PrecodeTelemetry* telemetry = nullptr) const;

  const PrecoderSpec& spec() const { return spec_; }

 private:
  const ChannelRealization& ch_;
  PrecoderSpec spec_;
  SolverOptions opts_;
  RVector tau_;
  RMatrix Hr_;
  RMatrix Her_;
  CMatrix pinv_;
  std::vector<TwoNormSolver> evemin_;  // empty or one element
};

}  // namespace plsec
