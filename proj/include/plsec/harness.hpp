#pragma once

// Experiment orchestration: one sweep point = many channel realizations, each
// running pilots -> Eve training -> data frames -> Eve attack and user
// decoding. Realizations are independent and fan out over OpenMP threads; the
// per-realization tallies are summed in index order, so results do not depend
// on the thread count.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <span>
#include <string_view>
#include <vector>

#include "plsec/eavesdropper.hpp"
#include "plsec/fec.hpp"
#include "plsec/precoder.hpp"

namespace plsec {

enum class Decoder { kSoftBR, kSoftCC, kHard };
std::string_view to_string(Decoder d);
Decoder parse_decoder(std::string_view s);  ///< soft_br, soft_cc, hard

enum class UserReceiver { kSoft, kHard };

struct ExperimentConfig {
  std::string scenario = "point";
  int Nt = 15;
  int K = 6;
  int M = 9;
  PrecoderKind precoder = PrecoderKind::kZF;
  Decoder decoder = Decoder::kSoftCC;
  int inverse_rate = 3;
  double gamma_db = 6.0;
  /// ZF mean power; NaN means "same as gamma_db".
  double eta_db = std::numeric_limits<double>::quiet_NaN();
  double delta = 0.1;
  double sigma_z2 = 1.0;
  double sigma_e2 = 1.0;
  int frames = 100;        ///< Data frames per realization.
  int realizations = 20;
  int pilot_symbols = 150;
  std::uint64_t seed = 1;
  int target_user = 0;
  UserReceiver user_receiver = UserReceiver::kSoft;
  bool zf_block_normalization = false;
  bool evemin_squared = false;
  bool pls_box = false;
  bool attack = true;  ///< false skips pilots and Eve entirely; Eve metrics become NaN.
  bool calibrate = false;
  double l2 = 1e-4;
  int traceback_depth = 0;
  int parallelism = 0;  ///< OpenMP threads; 0 keeps the runtime default.
  std::string sweep_axis;  ///< "", "M" or "gamma_db" (moves eta with gamma)
  std::vector<double> sweep_values;

  double eta_db_resolved() const;
  PrecoderSpec precoder_spec() const;
  ConvCode code() const;
  Strategy strategy() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Applies one key=value setting; throws ConfigError for unknown keys or
/// malformed values.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Parses "key = value" lines; '#' starts a comment.
ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Every resolved field as "key = value" lines, in a fixed order.
std::string config_to_text(const ExperimentConfig& cfg);

/// One config per sweep value (or just cfg when no axis is set).
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg);

/// Raw tallies of one realization.
struct RealizationTally {
  long eve_bit_errors = 0;
  long eve_frame_errors = 0;
  long user_bit_errors = 0;
  long user_frame_errors = 0;
  long payload_bits = 0;
  long frames = 0;
  long coded_correct = 0;
  long coded_bits = 0;
  double power_sum = 0.0;
  double max_zf_power_error = 0.0;
  PrecodeTelemetry telemetry;

  double ber_eve() const { return payload_bits ? double(eve_bit_errors) / payload_bits : 0.0; }
  double accuracy() const { return coded_bits ? double(coded_correct) / coded_bits : 0.0; }
  RealizationTally& operator+=(const RealizationTally& o);
};

struct MetricsRecord {
  ExperimentConfig config;
  double accuracy = 0.0;
  double ber_eve = 0.0;
  double fer_eve = 0.0;
  double ber_user = 0.0;
  double fer_user = 0.0;
  double p_tot = 0.0;  ///< linear, mean over data slots
  double p_tot_db = 0.0;
  long infeasible_slots = 0;
  int realizations = 0;
  RealizationTally total;
  std::vector<RealizationTally> per_realization;
  std::string status = "ok";

  /// Standard error of the per-realization Eve BER.
  double ber_eve_stderr() const;
  double accuracy_stderr() const;
};

double compute_ber(std::span<const std::uint8_t> ref, std::span<const std::uint8_t> est);
double compute_fer(const std::vector<Bits>& ref, const std::vector<Bits>& est);

/// One realization, fully determined by (cfg, index).
RealizationTally run_realization(const ExperimentConfig& cfg, int index);

/// OpenMP fan-out over realizations.
MetricsRecord run_point(const ExperimentConfig& cfg);
/// Same result computed one realization after another on the calling thread.
MetricsRecord run_point_serial(const ExperimentConfig& cfg);

/// Runs every config; a failing point yields a row whose status holds the
/// error. Throws ConfigError on an empty list.
std::vector<MetricsRecord> sweep(const std::vector<ExperimentConfig>& cfgs);

std::string csv_header();
std::string csv_row(const MetricsRecord& r);
void write_csv(const std::vector<MetricsRecord>& records, std::ostream& os);

struct PlotSpec {
  std::string x_field = "M";       ///< "M" or "gamma_db"
  std::string y_field = "ber_eve";  ///< ber_eve, fer_eve, ber_user, fer_user, accuracy, p_tot_db
  std::string title;
};

inline constexpr double kPlotFloor = 1e-5;

/// Self-contained SVG; error-rate axes are logarithmic with zeros drawn at
/// kPlotFloor as hollow markers. Series = precoder x decoder. Throws
/// ConfigError on empty input.
std::string render_plot(const std::vector<MetricsRecord>& records, const PlotSpec& spec);

/// Noiseless received points for the constellation demo.
struct DemoPoint {
  std::string precoder;  ///< zf or cispm
  std::string receiver;  ///< user or eve
  int signal = 0;        ///< pilot signal 0 or 1
  int slot = 0;
  cplx value;
};

struct DemoResult {
  std::vector<DemoPoint> points;
  std::string csv;
  std::string svg;
};

/// Two pilot signals of N symbols; the target user gets one fixed symbol per
/// signal, the others pseudo-random ones. ZF uses block power normalisation
/// at eta, CISPM uses gamma = eta; Eve has a single antenna.
DemoResult demo_constellation(const ExperimentConfig& cfg);

/// Log_Reg accuracy table: soft-CC and hard for each precoder.
struct Table2Row {
  PrecoderKind precoder;
  Decoder decoder;
  double accuracy;
  double accuracy_stderr;
  double reference;
};
std::vector<Table2Row> table2(const ExperimentConfig& base);
std::string table2_csv(const std::vector<Table2Row>& rows);

}  // namespace plsec
