#include "plsec/channel.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "plsec/errors.hpp"

namespace plsec {

void ChannelRealization::validate() const {
  if (H.rows() < 1 || H.rows() > H.cols()) {
    throw ConfigError("channel: need 1 <= K <= N_t");
  }
  if (He.rows() > 0 && He.cols() != H.cols()) {
    throw ConfigError("channel: eavesdropper channel has wrong column count");
  }
  if (!(sigma_z2 > 0.0) || !(sigma_e2 > 0.0)) {
    throw ConfigError("channel: noise variances must be positive");
  }
  if (!H.allFinite() || !He.allFinite()) {
    throw ConfigError("channel: non-finite channel entries");
  }
}

ChannelRealization sample_channel(SeededRng& rng, int K, int Nt, int M,
                                  double sigma_z2, double sigma_e2) {
  if (K < 1 || K > Nt) {
    throw ConfigError("sample_channel: need 1 <= K <= N_t (K=" +
                      std::to_string(K) + ", N_t=" + std::to_string(Nt) + ")");
  }
  if (M < 0) throw ConfigError("sample_channel: M must be >= 0");
  ChannelRealization ch;
  ch.sigma_z2 = sigma_z2;
  ch.sigma_e2 = sigma_e2;
  ch.H.resize(K, Nt);
  ch.He.resize(M, Nt);
  // Row-major draw order keeps the layout independent of Eigen's storage.
  for (int i = 0; i < K; ++i) ch.H.row(i) = sample_cn(rng, Nt, 1.0).transpose();
  for (int i = 0; i < M; ++i) ch.He.row(i) = sample_cn(rng, Nt, 1.0).transpose();
  ch.validate();
  return ch;
}

namespace {

CVector receive(const CMatrix& G, double variance, const CVector& x,
                SeededRng& rng, Noise noise) {
  if (x.size() != G.cols()) {
    throw DimensionError("receive: transmit vector has length " +
                         std::to_string(x.size()) + ", expected " +
                         std::to_string(G.cols()));
  }
  CVector y = G * x;
  if (noise == Noise::kOn) y += sample_cn(rng, static_cast<int>(G.rows()), variance);
  return y;
}

void write_row(std::ostream& os, const CMatrix& A, Eigen::Index r) {
  for (Eigen::Index c = 0; c < A.cols(); ++c) {
    if (c) os << ',';
    os << A(r, c).real() << ',' << A(r, c).imag();
  }
  os << '\n';
}

std::vector<double> parse_numbers(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

}  // namespace

CVector receive_users(const ChannelRealization& ch, const CVector& x,
                      SeededRng& rng, Noise noise) {
  return receive(ch.H, ch.sigma_z2, x, rng, noise);
}

CVector receive_eve(const ChannelRealization& ch, const CVector& x,
                    SeededRng& rng, Noise noise) {
  return receive(ch.He, ch.sigma_e2, x, rng, noise);
}

void save_channel_csv(const ChannelRealization& ch, std::ostream& os) {
  const auto old_precision = os.precision(17);
  os << ch.num_users() << ',' << ch.num_tx() << ',' << ch.num_eve_antennas()
     << ',' << ch.sigma_z2 << ',' << ch.sigma_e2 << '\n';
  for (Eigen::Index r = 0; r < ch.H.rows(); ++r) write_row(os, ch.H, r);
  for (Eigen::Index r = 0; r < ch.He.rows(); ++r) write_row(os, ch.He, r);
  os.precision(old_precision);
}

ChannelRealization load_channel_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("channel csv: empty input");
  const auto head = parse_numbers(line);
  if (head.size() != 5) throw InputError("channel csv: bad header");
  const int K = static_cast<int>(head[0]);
  const int Nt = static_cast<int>(head[1]);
  const int M = static_cast<int>(head[2]);
  ChannelRealization ch;
  ch.sigma_z2 = head[3];
  ch.sigma_e2 = head[4];
  ch.H.resize(K, Nt);
  ch.He.resize(M, Nt);
  for (int r = 0; r < K + M; ++r) {
    if (!std::getline(is, line)) throw InputError("channel csv: truncated");
    const auto vals = parse_numbers(line);
    if (vals.size() != static_cast<std::size_t>(2 * Nt)) {
      throw InputError("channel csv: row " + std::to_string(r) + " has " +
                       std::to_string(vals.size()) + " values");
    }
    CMatrix& dst = r < K ? ch.H : ch.He;
    const int row = r < K ? r : r - K;
    for (int c = 0; c < Nt; ++c) dst(row, c) = cplx(vals[2 * c], vals[2 * c + 1]);
  }
  ch.validate();
  return ch;
}

}  // namespace plsec
