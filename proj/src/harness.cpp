#include "plsec/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <omp.h>

#include "plsec/errors.hpp"

namespace plsec {

std::string_view to_string(Decoder d) {
  switch (d) {
    case Decoder::kSoftBR: return "soft_br";
    case Decoder::kSoftCC: return "soft_cc";
    case Decoder::kHard: return "hard";
  }
  return "unknown";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("config: bad value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  // from_chars for double is not in every libstdc++ we target.
  std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError("config: bad value '" + s + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  const auto s = lower(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("config: bad boolean '" + std::string(v) + "' for " + std::string(key));
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace

Decoder parse_decoder(std::string_view s) {
  const auto l = lower(s);
  for (auto d : {Decoder::kSoftBR, Decoder::kSoftCC, Decoder::kHard}) {
    if (l == to_string(d)) return d;
  }
  throw ConfigError("unknown decoder '" + std::string(s) + "'");
}

double ExperimentConfig::eta_db_resolved() const {
  return std::isnan(eta_db) ? gamma_db : eta_db;
}

PrecoderSpec ExperimentConfig::precoder_spec() const {
  PrecoderSpec s;
  s.kind = precoder;
  s.eta = db_to_linear(eta_db_resolved());
  s.gamma = {db_to_linear(gamma_db)};
  s.delta = delta;
  s.zf_block_normalization = zf_block_normalization;
  s.evemin_squared = evemin_squared;
  s.pls_box = pls_box;
  return s;
}

ConvCode ExperimentConfig::code() const { return ConvCode::for_rate(inverse_rate); }

Strategy ExperimentConfig::strategy() const {
  switch (decoder) {
    case Decoder::kSoftBR: return Strategy::kBR;
    case Decoder::kSoftCC: return Strategy::kCC;
    case Decoder::kHard: return Strategy::kMCC;
  }
  return Strategy::kCC;
}

void ExperimentConfig::validate() const {
  if (Nt < 1 || K < 1 || M < 1) throw ConfigError("config: N_t, K and M must be positive");
  if (K > Nt) throw ConfigError("config: K must not exceed N_t");
  if (frames < 1 || realizations < 1) {
    throw ConfigError("config: frames and realizations must be positive");
  }
  if (target_user < 0 || target_user >= K) throw ConfigError("config: target_user out of range");
  if (!(sigma_z2 > 0.0) || !(sigma_e2 > 0.0)) {
    throw ConfigError("config: noise variances must be positive");
  }
  if (!std::isfinite(gamma_db)) throw ConfigError("config: gamma_db must be finite");
  if (parallelism < 0) throw ConfigError("config: parallelism must be >= 0");
  if (traceback_depth < 0) throw ConfigError("config: traceback_depth must be >= 0");
  const auto c = code();
  c.validate();
  if (pilot_symbols < c.frame_symbols || pilot_symbols % c.frame_symbols != 0) {
    throw ConfigError("config: pilot_symbols must be a positive multiple of " +
                      std::to_string(c.frame_symbols));
  }
  if (!sweep_axis.empty() && sweep_axis != "M" && sweep_axis != "gamma_db") {
    throw ConfigError("config: sweep_axis must be M or gamma_db");
  }
  precoder_spec().validate(K);
}

void apply_setting(ExperimentConfig& cfg, std::string_view key_in, std::string_view value_in) {
  const std::string key(trim(key_in));
  const std::string_view v = trim(value_in);
  if (key == "scenario") cfg.scenario = std::string(v);
  else if (key == "Nt" || key == "N_t") cfg.Nt = parse_number<int>(key, v);
  else if (key == "K") cfg.K = parse_number<int>(key, v);
  else if (key == "M") cfg.M = parse_number<int>(key, v);
  else if (key == "precoder") cfg.precoder = parse_precoder_kind(v);
  else if (key == "decoder") cfg.decoder = parse_decoder(v);
  else if (key == "rate") {
    if (v == "1/3" || v == "3") cfg.inverse_rate = 3;
    else if (v == "1/4" || v == "4") cfg.inverse_rate = 4;
    else throw ConfigError("config: rate must be 1/3 or 1/4");
  } else if (key == "gamma_db") cfg.gamma_db = parse_double(key, v);
  else if (key == "eta_db") cfg.eta_db = parse_double(key, v);
  else if (key == "delta") cfg.delta = parse_double(key, v);
  else if (key == "sigma_z2") cfg.sigma_z2 = parse_double(key, v);
  else if (key == "sigma_e2") cfg.sigma_e2 = parse_double(key, v);
  else if (key == "frames") cfg.frames = parse_number<int>(key, v);
  else if (key == "realizations") cfg.realizations = parse_number<int>(key, v);
  else if (key == "pilot_symbols") cfg.pilot_symbols = parse_number<int>(key, v);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "target_user") cfg.target_user = parse_number<int>(key, v);
  else if (key == "user_receiver") {
    const auto l = lower(v);
    if (l == "soft") cfg.user_receiver = UserReceiver::kSoft;
    else if (l == "hard") cfg.user_receiver = UserReceiver::kHard;
    else throw ConfigError("config: user_receiver must be soft or hard");
  } else if (key == "zf_block_normalization") cfg.zf_block_normalization = parse_bool(key, v);
  else if (key == "evemin_squared") cfg.evemin_squared = parse_bool(key, v);
  else if (key == "attack") cfg.attack = parse_bool(key, v);
  else if (key == "generators_octal") {
    // Echoed in manifests; accepted only when it matches the selected rate.
    if (v != cfg.code().generators_octal()) {
      throw ConfigError("config: generators_octal does not match rate 1/" +
                        std::to_string(cfg.inverse_rate));
    }
  } else if (key == "pls_box") cfg.pls_box = parse_bool(key, v);
  else if (key == "calibrate") cfg.calibrate = parse_bool(key, v);
  else if (key == "l2") cfg.l2 = parse_double(key, v);
  else if (key == "traceback_depth") cfg.traceback_depth = parse_number<int>(key, v);
  else if (key == "parallelism") cfg.parallelism = parse_number<int>(key, v);
  else if (key == "sweep_axis") cfg.sweep_axis = std::string(v);
  else if (key == "sweep_values") {
    cfg.sweep_values.clear();
    std::string_view rest = v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      if (!item.empty()) cfg.sweep_values.push_back(parse_double(key, item));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& is, ExperimentConfig cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(cfg, body.substr(0, eq), body.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return parse_config(in, std::move(base));
}

std::string config_to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&](std::string_view k, const std::string& v) { os << k << " = " << v << '\n'; };
  kv("scenario", c.scenario);
  kv("Nt", std::to_string(c.Nt));
  kv("K", std::to_string(c.K));
  kv("M", std::to_string(c.M));
  kv("precoder", std::string(to_string(c.precoder)));
  kv("decoder", std::string(to_string(c.decoder)));
  kv("rate", "1/" + std::to_string(c.inverse_rate));
  kv("generators_octal", c.code().generators_octal());
  kv("gamma_db", fmt(c.gamma_db));
  kv("eta_db", fmt(c.eta_db_resolved()));
  kv("delta", fmt(c.delta));
  kv("sigma_z2", fmt(c.sigma_z2));
  kv("sigma_e2", fmt(c.sigma_e2));
  kv("frames", std::to_string(c.frames));
  kv("realizations", std::to_string(c.realizations));
  kv("pilot_symbols", std::to_string(c.pilot_symbols));
  kv("seed", std::to_string(c.seed));
  kv("target_user", std::to_string(c.target_user));
  kv("user_receiver", c.user_receiver == UserReceiver::kSoft ? "soft" : "hard");
  kv("zf_block_normalization", c.zf_block_normalization ? "true" : "false");
  kv("evemin_squared", c.evemin_squared ? "true" : "false");
  kv("attack", c.attack ? "true" : "false");
  kv("pls_box", c.pls_box ? "true" : "false");
  kv("calibrate", c.calibrate ? "true" : "false");
  kv("l2", fmt(c.l2));
  kv("traceback_depth", std::to_string(c.traceback_depth));
  kv("parallelism", std::to_string(c.parallelism));
  kv("sweep_axis", c.sweep_axis);
  std::string vals;
  for (std::size_t i = 0; i < c.sweep_values.size(); ++i) {
    if (i) vals += ",";
    vals += fmt(c.sweep_values[i]);
  }
  kv("sweep_values", vals);
  return os.str();
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg) {
  if (cfg.sweep_axis.empty()) return {cfg};
  if (cfg.sweep_values.empty()) throw ConfigError("sweep: no sweep values given");
  std::vector<ExperimentConfig> out;
  for (double v : cfg.sweep_values) {
    ExperimentConfig c = cfg;
    if (cfg.sweep_axis == "M") {
      if (v != std::floor(v) || v < 1) throw ConfigError("sweep: M values must be positive integers");
      c.M = static_cast<int>(v);
    } else if (cfg.sweep_axis == "gamma_db") {
      c.gamma_db = v;
      c.eta_db = v;
    } else {
      throw ConfigError("sweep: unknown axis '" + cfg.sweep_axis + "'");
    }
    out.push_back(std::move(c));
  }
  return out;
}

RealizationTally& RealizationTally::operator+=(const RealizationTally& o) {
  eve_bit_errors += o.eve_bit_errors;
  eve_frame_errors += o.eve_frame_errors;
  user_bit_errors += o.user_bit_errors;
  user_frame_errors += o.user_frame_errors;
  payload_bits += o.payload_bits;
  frames += o.frames;
  coded_correct += o.coded_correct;
  coded_bits += o.coded_bits;
  power_sum += o.power_sum;
  max_zf_power_error = std::max(max_zf_power_error, o.max_zf_power_error);
  telemetry += o.telemetry;
  return *this;
}

namespace {

double stderr_of(const std::vector<RealizationTally>& v, double (RealizationTally::*f)() const) {
  const auto n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (const auto& t : v) mean += (t.*f)();
  mean /= n;
  double ss = 0.0;
  for (const auto& t : v) ss += std::pow((t.*f)() - mean, 2);
  return std::sqrt(ss / (n - 1.0) / n);
}

int count_diff(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

// Purpose tags for derived random streams.
enum Stream : std::uint64_t {
  kChannel = 1,
  kPilots,
  kPilotBoundary,
  kPilotEveNoise,
  kDataBits,
  kDataBoundary,
  kDataEveNoise,
  kUserNoise,
};

SeededRng stream(const ExperimentConfig& cfg, int index, Stream purpose) {
  return SeededRng(cfg.seed, derive_stream(static_cast<std::uint64_t>(index), purpose));
}

}  // namespace

double MetricsRecord::ber_eve_stderr() const {
  return stderr_of(per_realization, &RealizationTally::ber_eve);
}

double MetricsRecord::accuracy_stderr() const {
  return stderr_of(per_realization, &RealizationTally::accuracy);
}

double compute_ber(std::span<const std::uint8_t> ref, std::span<const std::uint8_t> est) {
  if (ref.size() != est.size()) throw DimensionError("compute_ber: length mismatch");
  if (ref.empty()) throw DimensionError("compute_ber: empty input");
  return static_cast<double>(count_diff(ref, est)) / static_cast<double>(ref.size());
}

double compute_fer(const std::vector<Bits>& ref, const std::vector<Bits>& est) {
  if (ref.size() != est.size() || ref.empty()) {
    throw DimensionError("compute_fer: frame count mismatch");
  }
  int bad = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].size() != est[i].size()) throw DimensionError("compute_fer: frame size mismatch");
    bad += count_diff(ref[i], est[i]) > 0;
  }
  return static_cast<double>(bad) / static_cast<double>(ref.size());
}

RealizationTally run_realization(const ExperimentConfig& cfg, int index) {
  const ConvCode code = cfg.code();
  const PrecoderSpec spec = cfg.precoder_spec();
  const int k = cfg.target_user;
  const int S = code.frame_symbols;
  ViterbiOptions vopts;
  vopts.traceback_depth = cfg.traceback_depth;

  auto ch_rng = stream(cfg, index, kChannel);
  const auto ch = sample_channel(ch_rng, cfg.K, cfg.Nt, cfg.M, cfg.sigma_z2, cfg.sigma_e2);
  const Precoder pre(ch, spec);

  // Pilots and Eve's training.
  std::optional<TrainedAttacker> attacker;
  if (cfg.attack) {
    const auto pilots = generate_pilot_block(
        derive_stream(cfg.seed, static_cast<std::uint64_t>(index), kPilots), cfg.K,
        cfg.pilot_symbols, code);
    auto pilot_boundary = stream(cfg, index, kPilotBoundary);
    const auto xp = pre.precode_block(stack_symbols(pilots), pilot_boundary);
    auto pilot_noise = stream(cfg, index, kPilotEveNoise);
    CMatrix Yp(cfg.pilot_symbols, cfg.M);
    for (int n = 0; n < cfg.pilot_symbols; ++n) {
      Yp.row(n) = receive_eve(ch, xp[n].x, pilot_noise).transpose();
    }
    AttackerOptions aopts;
    aopts.logreg.l2 = cfg.l2;
    aopts.calibrate = cfg.calibrate;
    attacker = fit_attacker(build_training_set(Yp, pilots[k]), cfg.strategy(), aopts);
  }

  // Data frames.
  auto data_rng = stream(cfg, index, kDataBits);
  auto data_boundary = stream(cfg, index, kDataBoundary);
  auto eve_noise = stream(cfg, index, kDataEveNoise);
  auto user_noise = stream(cfg, index, kUserNoise);
  const double sigma = std::sqrt(ch.sigma_z2);
  const double llr_scale = 2.0 * std::sqrt(spec.gamma_for(k)) / sigma;

  RealizationTally t;
  std::vector<std::vector<Frame>> frames(cfg.K);
  CMatrix Ye(S, cfg.M);
  std::vector<double> llr(static_cast<std::size_t>(code.coded_bits()));
  CVector yk(S);
  for (int f = 0; f < cfg.frames; ++f) {
    for (int u = 0; u < cfg.K; ++u) {
      frames[u].assign(1, make_frame(data_rng, code, u, FrameRole::kData));
    }
    const auto xd = pre.precode_block(stack_symbols(frames), data_boundary, &t.telemetry);
    for (int n = 0; n < S; ++n) {
      t.power_sum += xd[n].power;
      if (spec.kind == PrecoderKind::kZF && !spec.zf_block_normalization) {
        t.max_zf_power_error = std::max(t.max_zf_power_error, std::abs(xd[n].power - spec.eta));
      }
      if (attacker) Ye.row(n) = receive_eve(ch, xd[n].x, eve_noise).transpose();
      yk[n] = receive_users(ch, xd[n].x, user_noise)[k];
    }
    const Frame& truth = frames[k][0];

    if (attacker) {
      const AttackOutput att = cfg.decoder == Decoder::kHard
                                   ? attack_hard(*attacker, Ye, code)
                                   : attack_soft(*attacker, Ye, code);
      const int eve_err = count_diff(truth.info_bits, att.payload);
      t.eve_bit_errors += eve_err;
      t.eve_frame_errors += eve_err > 0;
      t.coded_bits += static_cast<long>(truth.coded_bits.size());
      t.coded_correct += static_cast<long>(truth.coded_bits.size()) -
                         count_diff(truth.coded_bits, att.coded_decisions);
    }

    // Intended user: conventional demapping, no learning.
    Bits decoded;
    if (cfg.user_receiver == UserReceiver::kSoft) {
      for (int n = 0; n < S; ++n) {
        llr[2 * n] = llr_scale * yk[n].real();
        llr[2 * n + 1] = llr_scale * yk[n].imag();
      }
      decoded = viterbi_soft(code, llr, vopts);
    } else {
      decoded = viterbi_hard(code, hard_demap(yk), vopts);
    }
    const int user_err = count_diff(truth.info_bits, decoded);
    t.user_bit_errors += user_err;
    t.user_frame_errors += user_err > 0;
    t.payload_bits += code.payload_bits();
    ++t.frames;
  }
  return t;
}

namespace {

MetricsRecord aggregate(const ExperimentConfig& cfg, std::vector<RealizationTally> tallies) {
  MetricsRecord r;
  r.config = cfg;
  r.realizations = static_cast<int>(tallies.size());
  for (const auto& t : tallies) r.total += t;
  const auto& T = r.total;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const bool attacked = T.coded_bits > 0;
  r.ber_eve =
      attacked ? static_cast<double>(T.eve_bit_errors) / static_cast<double>(T.payload_bits) : nan;
  r.fer_eve = attacked ? static_cast<double>(T.eve_frame_errors) / static_cast<double>(T.frames) : nan;
  r.ber_user = static_cast<double>(T.user_bit_errors) / static_cast<double>(T.payload_bits);
  r.fer_user = static_cast<double>(T.user_frame_errors) / static_cast<double>(T.frames);
  r.accuracy =
      attacked ? static_cast<double>(T.coded_correct) / static_cast<double>(T.coded_bits) : nan;
  r.p_tot = T.power_sum / static_cast<double>(T.telemetry.slots);
  r.p_tot_db = linear_to_db(r.p_tot);
  r.infeasible_slots = T.telemetry.infeasible;
  r.per_realization = std::move(tallies);
  return r;
}

}  // namespace

MetricsRecord run_point_serial(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RealizationTally> tallies;
  tallies.reserve(static_cast<std::size_t>(cfg.realizations));
  for (int r = 0; r < cfg.realizations; ++r) tallies.push_back(run_realization(cfg, r));
  return aggregate(cfg, std::move(tallies));
}

MetricsRecord run_point(const ExperimentConfig& cfg) {
  cfg.validate();
  const int R = cfg.realizations;
  std::vector<RealizationTally> tallies(static_cast<std::size_t>(R));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(R));
  const int threads = cfg.parallelism > 0 ? cfg.parallelism : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int r = 0; r < R; ++r) {
    try {
      tallies[static_cast<std::size_t>(r)] = run_realization(cfg, r);
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return aggregate(cfg, std::move(tallies));
}

std::vector<MetricsRecord> sweep(const std::vector<ExperimentConfig>& cfgs) {
  if (cfgs.empty()) throw ConfigError("sweep: empty configuration list");
  std::vector<MetricsRecord> out;
  out.reserve(cfgs.size());
  for (const auto& c : cfgs) {
    try {
      out.push_back(run_point(c));
    } catch (const std::exception& e) {
      MetricsRecord r;
      r.config = c;
      r.accuracy = r.ber_eve = r.fer_eve = r.ber_user = r.fer_user = r.p_tot = r.p_tot_db =
          std::numeric_limits<double>::quiet_NaN();
      r.status = std::string("error: ") + e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::string csv_header() {
  return "scenario,precoder,decoder,N_t,K,M,rate,gamma_db,delta,n_realizations,frames,seed,"
         "accuracy,ber_eve,fer_eve,ber_user,fer_user,p_tot_db,infeasible_slots,generators_octal,"
         "solver_optimal,solver_max_iter,mean_solver_iterations,status";
}

std::string csv_row(const MetricsRecord& r) {
  const auto& c = r.config;
  const auto& tel = r.total.telemetry;
  std::ostringstream os;
  os << sanitize(c.scenario) << ',' << to_string(c.precoder) << ',' << to_string(c.decoder) << ','
     << c.Nt << ',' << c.K << ',' << c.M << ",1/" << c.inverse_rate << ',' << fmt(c.gamma_db)
     << ',' << fmt(c.delta) << ',' << c.realizations << ',' << c.frames << ',' << c.seed << ','
     << fmt(r.accuracy) << ',' << fmt(r.ber_eve) << ',' << fmt(r.fer_eve) << ','
     << fmt(r.ber_user) << ',' << fmt(r.fer_user) << ',' << fmt(r.p_tot_db) << ','
     << r.infeasible_slots << ',' << c.code().generators_octal() << ',' << tel.optimal << ','
     << tel.max_iter << ','
     << fmt(tel.slots ? static_cast<double>(tel.iterations) / static_cast<double>(tel.slots) : 0.0)
     << ',' << sanitize(r.status);
  return os.str();
}

void write_csv(const std::vector<MetricsRecord>& records, std::ostream& os) {
  os << csv_header() << '\n';
  for (const auto& r : records) os << csv_row(r) << '\n';
}

// ---------------------------------------------------------------------------
// SVG output.

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double field(const MetricsRecord& r, std::string_view name) {
  if (name == "ber_eve") return r.ber_eve;
  if (name == "fer_eve") return r.fer_eve;
  if (name == "ber_user") return r.ber_user;
  if (name == "fer_user") return r.fer_user;
  if (name == "accuracy") return r.accuracy;
  if (name == "p_tot_db") return r.p_tot_db;
  if (name == "M") return r.config.M;
  if (name == "gamma_db") return r.config.gamma_db;
  throw ConfigError("render_plot: unknown field '" + std::string(name) + "'");
}

}  // namespace

std::string render_plot(const std::vector<MetricsRecord>& records, const PlotSpec& spec) {
  if (records.empty()) throw ConfigError("render_plot: no records");
  const bool log_y = spec.y_field.rfind("ber", 0) == 0 || spec.y_field.rfind("fer", 0) == 0;
  constexpr double W = 640, H = 420, L = 70, R = 170, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;

  struct Pt {
    double x, y;
    bool floored;
  };
  std::vector<std::string> names;
  std::vector<std::vector<Pt>> series;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& r : records) {
    const std::string name =
        std::string(to_string(r.config.precoder)) + " / " + std::string(to_string(r.config.decoder));
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      names.push_back(name);
      series.emplace_back();
      it = names.end() - 1;
    }
    const double x = field(r, spec.x_field);
    double y = field(r, spec.y_field);
    bool floored = false;
    if (log_y && !(y >= kPlotFloor)) {
      y = kPlotFloor;
      floored = true;
    }
    series[static_cast<std::size_t>(it - names.begin())].push_back({x, y, floored});
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (xmax == xmin) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  double y0, y1;
  if (log_y) {
    y0 = std::floor(std::log10(ymin));
    y1 = std::max(y0 + 1.0, std::ceil(std::log10(ymax)));
  } else {
    const double pad = ymax == ymin ? 1.0 : 0.05 * (ymax - ymin);
    y0 = ymin - pad;
    y1 = ymax + pad;
  }
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) {
    const double v = log_y ? std::log10(y) : y;
    return T + (1.0 - (v - y0) / (y1 - y0)) * ph;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(L + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << xml_escape(spec.title.empty() ? spec.y_field + " vs " + spec.x_field : spec.title)
     << "</text>\n";
  os << "<rect x=\"" << num(L) << "\" y=\"" << num(T) << "\" width=\"" << num(pw) << "\" height=\""
     << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Y ticks.
  if (log_y) {
    for (double e = y0; e <= y1 + 1e-9; e += 1.0) {
      const double yy = py(std::pow(10.0, e));
      os << "<line x1=\"" << num(L) << "\" y1=\"" << num(yy) << "\" x2=\"" << num(L + pw)
         << "\" y2=\"" << num(yy) << "\" stroke=\"#dddddd\"/>\n";
      os << "<text x=\"" << num(L - 6) << "\" y=\"" << num(yy + 4)
         << "\" text-anchor=\"end\">1e" << static_cast<int>(e) << "</text>\n";
    }
  } else {
    for (int i = 0; i <= 5; ++i) {
      const double v = y0 + (y1 - y0) * i / 5.0;
      const double yy = py(v);
      os << "<line x1=\"" << num(L) << "\" y1=\"" << num(yy) << "\" x2=\"" << num(L + pw)
         << "\" y2=\"" << num(yy) << "\" stroke=\"#dddddd\"/>\n";
      os << "<text x=\"" << num(L - 6) << "\" y=\"" << num(yy + 4) << "\" text-anchor=\"end\">"
         << num(v) << "</text>\n";
    }
  }
  // X ticks at the distinct x values.
  std::vector<double> xs;
  for (const auto& s : series)
    for (const auto& p : s) xs.push_back(p.x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (double x : xs) {
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(T + ph + 18)
       << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  }
  os << "<text x=\"" << num(L + pw / 2) << "\" y=\"" << num(H - 10)
     << "\" text-anchor=\"middle\">" << xml_escape(spec.x_field) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(T + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num(T + ph / 2) << ")\">" << xml_escape(spec.y_field) << "</text>\n";

  bool any_floored = false;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    auto pts = series[i];
    std::stable_sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x; });
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j) os << ' ';
      os << num(px(pts[j].x)) << ',' << num(py(pts[j].y));
    }
    os << "\"/>\n";
    for (const auto& p : pts) {
      any_floored |= p.floored;
      os << "<circle cx=\"" << num(px(p.x)) << "\" cy=\"" << num(py(p.y)) << "\" r=\"3.5\" ";
      if (p.floored) {
        os << "fill=\"white\" stroke=\"" << color << "\"><title>0 (drawn at floor)</title></circle>\n";
      } else {
        os << "fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = T + 14 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << num(L + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(L + pw + 32)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(L + pw + 38) << "\" y=\"" << num(ly + 4) << "\">"
       << xml_escape(names[i]) << "</text>\n";
  }
  if (any_floored) {
    os << "<text x=\"" << num(L + pw + 12) << "\" y=\"" << num(T + ph)
       << "\" font-size=\"10\">hollow: value 0, drawn at 1e-5</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Constellation demo.

namespace {

std::string render_scatter(const std::vector<DemoPoint>& pts) {
  constexpr double panel = 300, gap = 20, top = 30;
  const char* const precs[] = {"zf", "cispm"};
  const char* const rxs[] = {"user", "eve"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(2 * panel + 3 * gap)
     << "\" height=\"" << num(2 * panel + 2 * gap + top) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int row = 0; row < 2; ++row) {
    for (int col = 0; col < 2; ++col) {
      const double ox = gap + col * (panel + gap);
      const double oy = top + row * (panel + gap);
      double lim = 1e-9;
      for (const auto& p : pts) {
        if (p.precoder == precs[row] && p.receiver == rxs[col]) {
          lim = std::max({lim, std::abs(p.value.real()), std::abs(p.value.imag())});
        }
      }
      lim *= 1.1;
      os << "<rect x=\"" << num(ox) << "\" y=\"" << num(oy) << "\" width=\"" << num(panel)
         << "\" height=\"" << num(panel) << "\" fill=\"none\" stroke=\"black\"/>\n";
      os << "<line x1=\"" << num(ox) << "\" y1=\"" << num(oy + panel / 2) << "\" x2=\"" << num(ox + panel)
         << "\" y2=\"" << num(oy + panel / 2) << "\" stroke=\"#bbbbbb\"/>\n";
      os << "<line x1=\"" << num(ox + panel / 2) << "\" y1=\"" << num(oy) << "\" x2=\"" << num(ox + panel / 2)
         << "\" y2=\"" << num(oy + panel) << "\" stroke=\"#bbbbbb\"/>\n";
      os << "<text x=\"" << num(ox + 6) << "\" y=\"" << num(oy - 8) << "\">" << precs[row] << ", "
         << rxs[col] << " (noiseless)</text>\n";
      for (const auto& p : pts) {
        if (p.precoder != precs[row] || p.receiver != rxs[col]) continue;
        const double x = ox + panel / 2 + p.value.real() / lim * panel / 2;
        const double y = oy + panel / 2 - p.value.imag() / lim * panel / 2;
        if (p.signal == 0) {
          os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
        } else {
          os << "<rect x=\"" << num(x - 2.5) << "\" y=\"" << num(y - 2.5)
             << "\" width=\"5\" height=\"5\" fill=\"#d62728\"/>\n";
        }
      }
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

DemoResult demo_constellation(const ExperimentConfig& cfg) {
  if (cfg.Nt < 1 || cfg.K < 1 || cfg.K > cfg.Nt) throw ConfigError("demo: need 1 <= K <= N_t");
  if (cfg.pilot_symbols < 1) throw ConfigError("demo: pilot_symbols must be positive");
  if (cfg.target_user < 0 || cfg.target_user >= cfg.K) throw ConfigError("demo: bad target_user");
  const int N = cfg.pilot_symbols;
  const int k = cfg.target_user;
  SeededRng ch_rng(cfg.seed, derive_stream(0xde, kChannel));
  const auto ch = sample_channel(ch_rng, cfg.K, cfg.Nt, 1, cfg.sigma_z2, cfg.sigma_e2);

  // Two pilot signals; user k sees one fixed symbol per signal.
  const int fixed[2] = {Qpsk::index(0, 0), Qpsk::index(1, 1)};
  SeededRng sym_rng(cfg.seed, derive_stream(0xde, kPilots));
  CMatrix D(2 * N, cfg.K);
  for (int s = 0; s < 2; ++s) {
    for (int n = 0; n < N; ++n) {
      for (int u = 0; u < cfg.K; ++u) {
        D(s * N + n, u) = u == k ? Qpsk::point(fixed[s])
                                 : Qpsk::point(static_cast<int>(sym_rng.next_u64() >> 62));
      }
    }
  }

  DemoResult out;
  const double level = db_to_linear(cfg.eta_db_resolved());
  for (auto kind : {PrecoderKind::kZF, PrecoderKind::kCISPM}) {
    PrecoderSpec spec;
    spec.kind = kind;
    spec.eta = level;
    spec.gamma = {level};
    spec.zf_block_normalization = true;
    const Precoder pre(ch, spec);
    SeededRng unused(cfg.seed, 0);
    const auto xs = pre.precode_block(D, unused);
    for (int s = 0; s < 2; ++s) {
      for (int n = 0; n < N; ++n) {
        const CVector& x = xs[static_cast<std::size_t>(s * N + n)].x;
        const std::string name(to_string(kind));
        out.points.push_back({name, "user", s, n, (ch.H * x)[k]});
        out.points.push_back({name, "eve", s, n, (ch.He * x)[0]});
      }
    }
  }
  std::ostringstream csv;
  csv << "precoder,receiver,signal,slot,re,im\n";
  csv.precision(17);
  for (const auto& p : out.points) {
    csv << p.precoder << ',' << p.receiver << ',' << p.signal << ',' << p.slot << ','
        << p.value.real() << ',' << p.value.imag() << '\n';
  }
  out.csv = csv.str();
  out.svg = render_scatter(out.points);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Table2Row> table2(const ExperimentConfig& base) {
  struct Entry {
    PrecoderKind p;
    Decoder d;
    double ref;
  };
  const Entry entries[] = {
      {PrecoderKind::kZF, Decoder::kSoftCC, 0.9375},
      {PrecoderKind::kZF, Decoder::kHard, 0.9374},
      {PrecoderKind::kCISPM, Decoder::kSoftCC, 0.8935},
      {PrecoderKind::kCISPM, Decoder::kHard, 0.8929},
      {PrecoderKind::kPLSRandom, Decoder::kSoftCC, 0.5427},
      {PrecoderKind::kPLSRandom, Decoder::kHard, 0.5433},
      {PrecoderKind::kPLSEveMin, Decoder::kSoftCC, 0.5732},
      {PrecoderKind::kPLSEveMin, Decoder::kHard, 0.5732},
  };
  std::vector<Table2Row> rows;
  for (const auto& e : entries) {
    ExperimentConfig c = base;
    c.precoder = e.p;
    c.decoder = e.d;
    const auto rec = run_point(c);
    rows.push_back({e.p, e.d, rec.accuracy, rec.accuracy_stderr(), e.ref});
  }
  return rows;
}

std::string table2_csv(const std::vector<Table2Row>& rows) {
  std::ostringstream os;
  os << "precoder,decoder,accuracy,accuracy_stderr,reference\n";
  for (const auto& r : rows) {
    os << to_string(r.precoder) << ',' << to_string(r.decoder) << ',' << fmt(r.accuracy) << ','
       << fmt(r.accuracy_stderr) << ',' << fmt(r.reference) << '\n';
  }
  return os.str();
}

}  // namespace plsec
