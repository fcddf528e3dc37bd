#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "owcsim/channel.hpp"
#include "owcsim/dnn.hpp"
#include "owcsim/ofdm.hpp"
#include "owcsim/sm_codec.hpp"

namespace owcsim {

enum class DetectorKind { kMlMrc, kDnn };

const char* detector_name(DetectorKind kind);
DetectorKind detector_from_name(const std::string& name);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// INI-style key/value file: [section] headers, key = value lines,
// '#' or ';' comments. Values keep embedded spaces and commas.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Full experiment description: channel, modulation, detectors, training and
// sweep settings. Assembled from defaults, an optional preset, and an
// optional config file.
struct SimConfig {
    ChannelParams optics;
    RoomGeometry geometry;
    OfdmConfig ofdm;

    int n_tx = 4;
    int n_active = 2;
    std::vector<SmScheme> schemes{SmScheme::kGoqsm};
    std::vector<double> spectral_efficiencies{3.0};
    int qam_order = 0;  // 0 -> derived from the spectral efficiency target

    std::vector<DetectorKind> detectors{DetectorKind::kMlMrc};
    std::string model_path;  // optional pretrained network for the dnn detector

    TrainConfig train;  // training_snr_db field unused; the grid below rules
    std::vector<double> training_snr_grid_db{132.0};

    std::vector<double> snr_grid_db;
    std::vector<double> dnn_snr_grid_db;  // empty -> snr_grid_db
    long long min_bit_errors = 200;
    long long max_trials = 0;  // 0 -> capped at max_bits
    long long max_bits = 100000000;
    uint64_t seed = 1;
    int workers = 1;
    bool fast_path = true;
    bool disable_noise = false;

    SmConfig sm_config_for(SmScheme scheme, double spectral_eff) const;
    void validate() const;  // throws ConfigError listing every offending key
};

SimConfig default_sim_config();

// Bundled experiment presets: "fig3" (training-loss histories),
// "fig4a"/"fig4b"/"fig4c" (BER sweeps at 3/4/5 bits/s/Hz).
SimConfig preset_sim_config(const std::string& name);
std::vector<std::string> preset_names();

// Calibrated training SNR for each (scheme, efficiency) pair, close to the
// optimum of the bundled channel layout.
double default_training_snr_db(SmScheme scheme, double bits_s_hz);

// defaults (or preset) overlaid with the file's keys; collects all errors
void apply_config(SimConfig& config, const KeyValueFile& file);
SimConfig load_sim_config(const std::string& path);

// "a,b,c" and "start:step:stop" forms
std::vector<double> parse_double_list(const std::string& text);

}  // namespace owcsim
