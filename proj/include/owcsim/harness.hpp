#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "owcsim/config.hpp"
#include "owcsim/detect.hpp"
#include "owcsim/dnn.hpp"

namespace owcsim {

// One Monte Carlo measurement: (scheme, detector, spectral efficiency, SNR)
// with error counts, the seed that produced it, and a reliability flag set
// when the trial budget ran out before min_bit_errors was reached.
struct BerRecord {
    std::string scheme;
    std::string detector;
    double spectral_efficiency = 0.0;
    double snr_db = 0.0;
    std::optional<double> training_snr_db;
    long long bit_errors = 0;
    long long bits_simulated = 0;
    double ber = 0.0;
    uint64_t seed = 0;
    double wall_time = 0.0;
    bool unreliable = false;
};

struct PointSpec {
    SmScheme scheme = SmScheme::kGoqsm;
    double spectral_efficiency = 3.0;
    DetectorKind detector = DetectorKind::kMlMrc;
    double snr_db = 0.0;
    std::optional<double> training_snr_db;
};

struct MseHistory {
    std::string scheme;
    double spectral_efficiency = 0.0;
    double training_snr_db = 0.0;
    uint64_t seed = 0;
    std::vector<EpochStats> epochs;
};

struct SweepOutput {
    std::vector<BerRecord> records;
    std::vector<MseHistory> histories;
};

// Amplitude scale applied to the unit-energy symbol vector c so that the
// average total transmitted electrical power satisfies
// 10 log10(P_tx / P_n) = snr_db.
double transmitted_snr_scale(const SmConfig& config, const MimoChannel& channel,
                             double snr_db);

// Training-data stream through the map -> channel -> ZF chain at a fixed
// SNR. Chunk contents depend only on (seed, stream tag, chunk index).
class ChainSampleSource : public SampleSource {
public:
    ChainSampleSource(const SmConfig& config, const MimoChannel& channel,
                      double snr_db, uint64_t seed, uint64_t stream_tag);

    int input_dim() const override;
    int target_dim() const override;
    void fill_chunk(long chunk_index, int count, Eigen::MatrixXd& X,
                    Eigen::MatrixXd& T) override;

private:
    SmMapper mapper_;
    ZfEqualizer equalizer_;
    Eigen::MatrixXd h_scaled_;     // H * scale
    Eigen::MatrixXd pinv_scaled_;  // pinv(H) / scale
    double noise_std_axis_ = 0.0;  // per real dimension at the receiver
    uint64_t seed_ = 0;
    uint64_t stream_tag_ = 0;
    SmFrame frame_;
    std::vector<uint8_t> bit_buf_;
};

// Trains one detector network for (scheme, spectral efficiency) at the given
// training SNR, deterministically from config.seed.
MlpNetwork train_detector_network(const SimConfig& config, const MimoChannel& channel,
                                  SmScheme scheme, double spectral_eff,
                                  double training_snr_db,
                                  std::vector<EpochStats>* history = nullptr);

// Simulates the full chain until min_bit_errors or the trial budget is hit.
// Identical results for any worker count: trials are split into fixed-size
// blocks with per-block counter-based seeding, committed in block order.
BerRecord run_ber_point(const SimConfig& config, const MimoChannel& channel,
                        const PointSpec& point, const MlpNetwork* net = nullptr);

// Cartesian product of schemes x detectors x SNR grid (x training SNR grid
// for the dnn detector). Networks are trained up front, one per
// (scheme, spectral efficiency, training SNR).
SweepOutput run_sweep(const SimConfig& config);

// Same, but skips points whose rows already exist in the CSV at out_path and
// appends only the missing ones (byte-identical rows for completed points).
SweepOutput run_sweep_resumable(const SimConfig& config, const std::string& out_path);

// Log-linear interpolation of log10(BER) against SNR between the two grid
// points bracketing the target. Throws when the target is not bracketed.
double find_snr_at_ber(const std::vector<BerRecord>& curve, double target_ber = 1e-3);

// records for one (scheme, detector, efficiency, training SNR) curve,
// sorted by SNR
std::vector<BerRecord> filter_curve(const std::vector<BerRecord>& records,
                                    SmScheme scheme, DetectorKind detector,
                                    double spectral_eff,
                                    std::optional<double> training_snr_db = {});

void write_ber_csv(std::ostream& os, const std::vector<BerRecord>& records);
std::string ber_csv_header();
std::string ber_csv_row(const BerRecord& record);
std::vector<BerRecord> read_ber_csv(std::istream& is);
std::vector<BerRecord> read_ber_csv_file(const std::string& path);
void write_ber_json(std::ostream& os, const std::vector<BerRecord>& records);

void write_mse_csv(std::ostream& os, const std::vector<MseHistory>& histories);

}  // namespace owcsim
