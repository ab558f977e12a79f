#include "plsec/precoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "plsec/errors.hpp"
#include "plsec/modem.hpp"

namespace plsec {

std::string_view to_string(PrecoderKind k) {
  switch (k) {
    case PrecoderKind::kZF: return "zf";
    case PrecoderKind::kCISPM: return "cispm";
    case PrecoderKind::kPLSRandom: return "pls_random";
    case PrecoderKind::kPLSEveMin: return "pls_evemin";
  }
  return "unknown";
}

PrecoderKind parse_precoder_kind(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto k : {PrecoderKind::kZF, PrecoderKind::kCISPM, PrecoderKind::kPLSRandom,
                 PrecoderKind::kPLSEveMin}) {
    if (lower == to_string(k)) return k;
  }
  throw ConfigError("unknown precoder '" + std::string(s) + "'");
}

void PrecoderSpec::validate(int K) const {
  if (gamma.empty() || (gamma.size() != 1 && static_cast<int>(gamma.size()) != K)) {
    throw ConfigError("PrecoderSpec: gamma needs 1 or K entries");
  }
  for (double g : gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("PrecoderSpec: gamma must be > 0");
  }
  if (kind == PrecoderKind::kZF && !(eta > 0.0)) {
    throw ConfigError("PrecoderSpec: ZF needs eta > 0");
  }
  if (kind == PrecoderKind::kPLSRandom && !(delta > 0.0)) {
    throw ConfigError("PrecoderSpec: PLS random needs delta > 0");
  }
}

double PrecoderSpec::gamma_for(int k) const {
  return gamma.size() == 1 ? gamma[0] : gamma.at(static_cast<std::size_t>(k));
}

BoundarySelector sample_boundary(SeededRng& rng, int M) {
  if (M < 0) throw ConfigError("sample_boundary: M must be >= 0");
  BoundarySelector s;
  s.b.resize(static_cast<std::size_t>(M));
  for (auto& bit : s.b) bit = static_cast<std::uint8_t>(rng.bit());
  return s;
}

void ci_constraints(const RMatrix& Hr, const CVector& d, const RVector& tau,
                    RMatrix& G, RVector& h) {
  const auto K = d.size();
  if (Hr.rows() != 2 * K || tau.size() != K) {
    throw DimensionError("ci_constraints: symbol vector does not match channel");
  }
  G.resize(2 * K, Hr.cols());
  h.resize(2 * K);
  for (Eigen::Index k = 0; k < K; ++k) {
    Qpsk::index_of(d[k]);
    const double sr = d[k].real() > 0.0 ? 1.0 : -1.0;
    const double si = d[k].imag() > 0.0 ? 1.0 : -1.0;
    G.row(2 * k) = -sr * Hr.row(2 * k);
    G.row(2 * k + 1) = -si * Hr.row(2 * k + 1);
    h[2 * k] = -tau[k] * std::abs(d[k].real());
    h[2 * k + 1] = -tau[k] * std::abs(d[k].imag());
  }
}

namespace {

RVector thresholds(const ChannelRealization& ch, const std::vector<double>& gamma) {
  const int K = ch.num_users();
  if (gamma.size() != 1 && static_cast<int>(gamma.size()) != K) {
    throw ConfigError("precoder: gamma needs 1 or K entries");
  }
  RVector tau(K);
  for (int k = 0; k < K; ++k) {
    const double g = gamma.size() == 1 ? gamma[0] : gamma[static_cast<std::size_t>(k)];
    if (!(g > 0.0)) throw ConfigError("precoder: gamma must be > 0");
    tau[k] = std::sqrt(ch.sigma_z2 * g);
  }
  return tau;
}

SolveResult from_cqp(const CqpResult& r) {
  SolveResult s;
  s.x = complex_from_embed(r.x);
  s.power = r.x.squaredNorm();
  s.objective = s.power;
  s.status = r.status;
  s.primal_residual = r.primal_residual;
  s.dual_residual = std::max(r.dual_residual, r.complementarity);
  s.iterations = r.iterations;
  return s;
}

void check_symbols(const ChannelRealization& ch, const CVector& d) {
  if (d.size() != ch.num_users()) {
    throw DimensionError("precoder: need one symbol per user");
  }
}

SolveResult solve_cispm(const RMatrix& Hr, const CVector& d, const RVector& tau,
                        const SolverOptions& opts) {
  RMatrix G;
  RVector h;
  ci_constraints(Hr, d, tau, G, h);
  return from_cqp(solve_ldp(G, h, opts));
}

SolveResult solve_pls_random(const RMatrix& Hr, const RMatrix& Her, const CVector& d,
                             const RVector& tau, double delta, const BoundarySelector& sel,
                             bool box, const SolverOptions& opts) {
  if (!(delta > 0.0)) throw ConfigError("pls_random_precode: delta must be > 0");
  const auto M = Her.rows() / 2;
  if (static_cast<Eigen::Index>(sel.b.size()) != M) {
    throw DimensionError("pls_random_precode: one selector bit per Eve antenna");
  }
  RMatrix Gci;
  RVector hci;
  ci_constraints(Hr, d, tau, Gci, hci);
  // With box set, both components of every antenna are pinned.
  const Eigen::Index rows = box ? 2 * M : M;
  RMatrix G(Gci.rows() + 2 * rows, Gci.cols());
  RVector h(G.rows());
  G.topRows(Gci.rows()) = Gci;
  h.head(hci.size()) = hci;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = box ? Her.row(i) : Her.row(2 * i + (sel.b[i] ? 0 : 1));
    G.row(Gci.rows() + 2 * i) = row;
    G.row(Gci.rows() + 2 * i + 1) = -row;
    h[hci.size() + 2 * i] = delta;
    h[hci.size() + 2 * i + 1] = delta;
  }
  return from_cqp(solve_ldp(G, h, opts));
}

SolveResult solve_evemin(const TwoNormSolver& solver, const RMatrix& Hr,
                         const CVector& d, const RVector& tau, bool squared,
                         const SolverOptions& opts) {
  RMatrix G;
  RVector h;
  ci_constraints(Hr, d, tau, G, h);
  const CqpResult r = squared ? solver.solve_weighted(G, h, 1.0, opts)
                              : solver.solve(G, h, opts);
  SolveResult s = from_cqp(r);
  const double eve = (solver.A() * r.x).norm();
  s.objective = squared ? s.power + eve * eve : std::sqrt(s.power) + eve;
  return s;
}

}  // namespace

SolveResult zf_precode(const ChannelRealization& ch, const CVector& d, double eta) {
  check_symbols(ch, d);
  if (!(eta > 0.0)) throw ConfigError("zf_precode: eta must be > 0");
  const CVector u = pseudo_inverse(ch.H) * d;
  SolveResult s;
  s.x = std::sqrt(eta / u.squaredNorm()) * u;
  s.power = s.x.squaredNorm();
  s.objective = s.power;
  return s;
}

SolveResult cispm_precode(const ChannelRealization& ch, const CVector& d,
                          const std::vector<double>& gamma, const SolverOptions& opts) {
  check_symbols(ch, d);
  return solve_cispm(real_embed_matrix(ch.H), d, thresholds(ch, gamma), opts);
}

SolveResult pls_random_precode(const ChannelRealization& ch, const CVector& d,
                               const std::vector<double>& gamma, double delta,
                               const BoundarySelector& b, const SolverOptions& opts) {
  check_symbols(ch, d);
  return solve_pls_random(real_embed_matrix(ch.H), real_embed_matrix(ch.He), d,
                          thresholds(ch, gamma), delta, b, false, opts);
}

SolveResult pls_evemin_precode(const ChannelRealization& ch, const CVector& d,
                               const std::vector<double>& gamma,
                               const SolverOptions& opts) {
  check_symbols(ch, d);
  const TwoNormSolver solver(real_embed_matrix(ch.He));
  return solve_evemin(solver, real_embed_matrix(ch.H), d, thresholds(ch, gamma), false,
                      opts);
}

PrecodeTelemetry& PrecodeTelemetry::operator+=(const PrecodeTelemetry& o) {
  optimal += o.optimal;
  max_iter += o.max_iter;
  infeasible += o.infeasible;
  iterations += o.iterations;
  slots += o.slots;
  return *this;
}

Precoder::Precoder(const ChannelRealization& ch, PrecoderSpec spec, SolverOptions opts)
    : ch_(ch), spec_(std::move(spec)), opts_(opts) {
  ch_.validate();
  spec_.validate(ch_.num_users());
  tau_ = thresholds(ch_, spec_.gamma);
  Hr_ = real_embed_matrix(ch_.H);
  Her_ = real_embed_matrix(ch_.He);
  if (spec_.kind == PrecoderKind::kZF) pinv_ = pseudo_inverse(ch_.H);
  if (spec_.kind == PrecoderKind::kPLSEveMin) evemin_.emplace_back(Her_);
}

SolveResult Precoder::precode(const CVector& d, SeededRng& boundary_rng) const {
  check_symbols(ch_, d);
  switch (spec_.kind) {
    case PrecoderKind::kZF: {
      const CVector u = pinv_ * d;
      SolveResult s;
      s.x = std::sqrt(spec_.eta / u.squaredNorm()) * u;
      s.power = s.x.squaredNorm();
      s.objective = s.power;
      return s;
    }
    case PrecoderKind::kCISPM:
      return solve_cispm(Hr_, d, tau_, opts_);
    case PrecoderKind::kPLSRandom: {
      const auto sel = sample_boundary(boundary_rng, ch_.num_eve_antennas());
      SolveResult s = solve_pls_random(Hr_, Her_, d, tau_, spec_.delta, sel, spec_.pls_box, opts_);
      if (s.status == SolveStatus::kInfeasible) {
        const int spent = s.iterations;
        s = solve_cispm(Hr_, d, tau_, opts_);
        s.iterations += spent;
        s.fell_back = true;
      }
      return s;
    }
    case PrecoderKind::kPLSEveMin:
      return solve_evemin(evemin_.front(), Hr_, d, tau_, spec_.evemin_squared, opts_);
  }
  throw ConfigError("precoder: unknown kind");
}

std::vector<SolveResult> Precoder::precode_block(const CMatrix& D, SeededRng& boundary_rng,
                                                 PrecodeTelemetry* telemetry) const {
  if (D.cols() != ch_.num_users()) {
    throw DimensionError("precode_block: need one column per user");
  }
  std::vector<SolveResult> out;
  out.reserve(static_cast<std::size_t>(D.rows()));
  for (Eigen::Index n = 0; n < D.rows(); ++n) {
    out.push_back(precode(D.row(n).transpose(), boundary_rng));
  }
  if (spec_.kind == PrecoderKind::kZF && spec_.zf_block_normalization && !out.empty()) {
    // Undo the per-slot scale and apply one common factor for the block.
    double total = 0.0;
    std::vector<CVector> raw;
    raw.reserve(out.size());
    for (Eigen::Index n = 0; n < D.rows(); ++n) {
      raw.push_back(pinv_ * D.row(n).transpose());
      total += raw.back().squaredNorm();
    }
    const double beta = std::sqrt(spec_.eta * static_cast<double>(out.size()) / total);
    for (std::size_t n = 0; n < out.size(); ++n) {
      out[n].x = beta * raw[n];
      out[n].power = out[n].x.squaredNorm();
      out[n].objective = out[n].power;
    }
  }
  if (telemetry) {
    for (const auto& s : out) {
      ++telemetry->slots;
      telemetry->iterations += s.iterations;
      if (s.fell_back) ++telemetry->infeasible;
      if (s.status == SolveStatus::kOptimal) ++telemetry->optimal;
      if (s.status == SolveStatus::kMaxIter) ++telemetry->max_iter;
    }
  }
  return out;
}

}  // namespace plsec
