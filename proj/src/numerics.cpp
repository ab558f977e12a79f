#include "plsec/numerics.hpp"

#include <cmath>
#include <numbers>

#include "plsec/errors.hpp"

namespace plsec {

namespace {

constexpr double kMaxGramCondition = 1e12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

CMatrix pseudo_inverse(const CMatrix& H) {
  if (H.rows() == 0 || H.rows() > H.cols()) {
    throw SingularChannelError("pseudo_inverse: need 1 <= rows <= cols, got " +
                               std::to_string(H.rows()) + "x" +
                               std::to_string(H.cols()));
  }
  if (!H.allFinite()) throw InputError("pseudo_inverse: non-finite entries");
  const CMatrix gram = H * H.adjoint();
  Eigen::LLT<CMatrix> llt(gram);
  if (llt.info() != Eigen::Success || llt.rcond() * kMaxGramCondition < 1.0) {
    throw SingularChannelError("pseudo_inverse: Gram matrix is singular");
  }
  const CMatrix id = CMatrix::Identity(H.rows(), H.rows());
  return H.adjoint() * llt.solve(id);
}

RVector real_embed(const CVector& v) {
  RVector out(2 * v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[2 * i] = v[i].real();
    out[2 * i + 1] = v[i].imag();
  }
  return out;
}

CVector complex_from_embed(const RVector& r) {
  if (r.size() % 2 != 0) {
    throw DimensionError("complex_from_embed: odd length " +
                         std::to_string(r.size()));
  }
  CVector out(r.size() / 2);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = cplx(r[2 * i], r[2 * i + 1]);
  }
  return out;
}

RMatrix real_embed_matrix(const CMatrix& A) {
  RMatrix R(2 * A.rows(), 2 * A.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      const double a = A(i, j).real();
      const double b = A(i, j).imag();
      // (a + jb)(x + jy) = (ax - by) + j(bx + ay)
      R(2 * i, 2 * j) = a;
      R(2 * i, 2 * j + 1) = -b;
      R(2 * i + 1, 2 * j) = b;
      R(2 * i + 1, 2 * j + 1) = a;
    }
  }
  return R;
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), engine_(make_engine(seed, stream_id)) {}

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                            std::uint64_t d) {
  std::uint64_t h = splitmix64(a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return splitmix64(h ^ d);
}

CVector sample_cn(SeededRng& rng, int n, double variance) {
  if (!(variance >= 0.0)) {
    throw DomainError("sample_cn: variance must be >= 0");
  }
  if (n < 0) throw DomainError("sample_cn: negative count");
  CVector out(n);
  if (variance == 0.0) {
    out.setZero();
    return out;
  }
  const double scale = std::sqrt(variance / 2.0);
  for (int i = 0; i < n; ++i) {
    const double re = rng.normal();
    const double im = rng.normal();
    out[i] = cplx(scale * re, scale * im);
  }
  return out;
}

}  // namespace plsec
