#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace owcsim {

enum class SmScheme { kGoqsm, kGosm };

const char* scheme_name(SmScheme scheme);
SmScheme scheme_from_name(const std::string& name);  // throws on unknown name

using BitBlock = std::vector<uint8_t>;

inline uint32_t gray_encode(uint32_t v) { return v ^ (v >> 1); }

inline uint32_t gray_decode(uint32_t g) {
    uint32_t v = g;
    while (g >>= 1) v ^= g;
    return v;
}

// Gray-mapped square QAM, normalized to unit average symbol energy.
// pam_levels holds the per-axis amplitude set shared by the real and
// imaginary axes, indexed by binary level index k (descending values,
// level(k) = (L-1-2k) * step). points is indexed by the Gray bit label,
// I bits (MSB first) then Q bits.
struct Constellation {
    int order = 0;             // M
    int levels_per_axis = 0;   // sqrt(M)
    int bits_per_axis = 0;     // log2(M)/2
    std::vector<double> pam_levels;
    std::vector<std::complex<double>> points;

    // nearest level by Euclidean distance; lowest index wins ties
    int nearest_level(double v) const;
    std::complex<double> point_for_levels(int k_re, int k_im) const {
        return {pam_levels[k_re], pam_levels[k_im]};
    }
};

Constellation make_constellation(int qam_order);  // throws unless M is a square >= 4

// Lexicographically first 2^floor(log2 C(n_tx, n_active)) subsets of
// {0..n_tx-1}, each as a bitmask with bit t set when LED t is active.
std::vector<uint32_t> default_pattern_table(int n_tx, int n_active);

struct SmConfig {
    SmScheme scheme = SmScheme::kGoqsm;
    int n_tx = 4;
    int n_active = 2;
    int qam_order = 4;
    std::vector<uint32_t> pattern_table;

    int qam_bits() const;            // log2 M
    int spatial_bits() const;        // floor(log2 C(n_tx, n_active))
    void validate() const;
};

SmConfig make_sm_config(SmScheme scheme, int n_tx, int n_active, int qam_order);

// Inverts the rate expression to find the QAM order that reaches the target
// spectral efficiency. Throws when no square-QAM order fits exactly.
int qam_order_for_efficiency(SmScheme scheme, int n_tx, int n_active,
                             double bits_s_hz);

double spectral_efficiency(const SmConfig& config);  // bits/s/Hz

// bits carried by one complex subcarrier use (= 2 x spectral efficiency)
int bits_per_use(const SmConfig& config);

// One mapped subcarrier symbol: constellation value b, in-phase/quadrature
// pattern indices, and the length-N_t transmit vector c.
struct SmFrame {
    std::complex<double> b;
    int z_re = 0;
    int z_im = 0;
    std::vector<std::complex<double>> c;
};

// Bit layout per block: Gray QAM bits (I bits then Q bits), then the
// in-phase spatial index bits, then (GOQSM only) the quadrature spatial
// index bits, all MSB first. GOSM reuses the single index for both axes.
class SmMapper {
public:
    explicit SmMapper(SmConfig config);

    // bits must hold bits_per_use() values in {0,1}; frame.c is resized once
    void map(const uint8_t* bits, SmFrame& frame) const;
    void demap(const SmFrame& frame, uint8_t* bits) const;

    int bits_per_use() const { return bits_; }
    const SmConfig& config() const { return config_; }
    const Constellation& constellation() const { return constellation_; }

private:
    SmConfig config_;
    Constellation constellation_;
    int bits_ = 0;
};

SmFrame map_bits(const SmConfig& config, const BitBlock& bits);
BitBlock demap_frame(const SmConfig& config, const SmFrame& frame);

}  // namespace owcsim
