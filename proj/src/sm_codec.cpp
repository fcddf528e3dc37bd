#include "owcsim/sm_codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace owcsim {

const char* scheme_name(SmScheme scheme) {
    return scheme == SmScheme::kGoqsm ? "goqsm" : "gosm";
}

SmScheme scheme_from_name(const std::string& name) {
    if (name == "goqsm") return SmScheme::kGoqsm;
    if (name == "gosm") return SmScheme::kGosm;
    throw std::invalid_argument("unknown scheme: " + name);
}

namespace {

int int_log2(int v) {
    int bits = 0;
    while ((1 << (bits + 1)) <= v) ++bits;
    return bits;
}

long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

bool is_square_qam(int m) {
    if (m < 4) return false;
    int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    return root * root == m && (1 << int_log2(m)) == m;
}

}  // namespace

int Constellation::nearest_level(double v) const {
    int best = 0;
    double best_d = std::abs(v - pam_levels[0]);
    for (int k = 1; k < levels_per_axis; ++k) {
        double d = std::abs(v - pam_levels[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

Constellation make_constellation(int qam_order) {
    if (!is_square_qam(qam_order))
        throw std::invalid_argument("QAM order must be a square power of two >= 4");

    Constellation c;
    c.order = qam_order;
    c.levels_per_axis = static_cast<int>(std::lround(std::sqrt(qam_order)));
    c.bits_per_axis = int_log2(c.levels_per_axis);

    // unit average symbol energy: E|b|^2 = 2 (L^2 - 1) / 3 before scaling
    const int L = c.levels_per_axis;
    const double step = std::sqrt(3.0 / (2.0 * (qam_order - 1)));
    c.pam_levels.resize(L);
    for (int k = 0; k < L; ++k) c.pam_levels[k] = (L - 1 - 2 * k) * step;

    c.points.resize(qam_order);
    for (int ki = 0; ki < L; ++ki) {
        for (int kq = 0; kq < L; ++kq) {
            uint32_t label = (gray_encode(ki) << c.bits_per_axis) | gray_encode(kq);
            c.points[label] = {c.pam_levels[ki], c.pam_levels[kq]};
        }
    }
    return c;
}

std::vector<uint32_t> default_pattern_table(int n_tx, int n_active) {
    long long combos = binomial(n_tx, n_active);
    int index_bits = 0;
    while ((1LL << (index_bits + 1)) <= combos) ++index_bits;
    int table_size = 1 << index_bits;

    // lexicographic prefix of the subset enumeration
    std::vector<uint32_t> table;
    std::vector<int> pick(n_active);
    for (int i = 0; i < n_active; ++i) pick[i] = i;
    while (static_cast<int>(table.size()) < table_size) {
        uint32_t mask = 0;
        for (int i : pick) mask |= 1u << i;
        table.push_back(mask);
        // next combination
        int i = n_active - 1;
        while (i >= 0 && pick[i] == n_tx - n_active + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < n_active; ++j) pick[j] = pick[j - 1] + 1;
    }
    return table;
}

int SmConfig::qam_bits() const { return int_log2(qam_order); }

int SmConfig::spatial_bits() const {
    int bits = 0;
    while ((1u << (bits + 1)) <= pattern_table.size()) ++bits;
    return bits;
}

void SmConfig::validate() const {
    if (n_tx < 1) throw std::invalid_argument("n_tx must be >= 1");
    if (n_active < 1 || n_active > n_tx)
        throw std::invalid_argument("n_active must be in [1, n_tx]");
    if (!is_square_qam(qam_order))
        throw std::invalid_argument("qam_order must be a square power of two >= 4");
    long long combos = binomial(n_tx, n_active);
    int index_bits = 0;
    while ((1LL << (index_bits + 1)) <= combos) ++index_bits;
    if (pattern_table.size() != (1u << index_bits))
        throw std::invalid_argument("pattern table size must be 2^floor(log2 C(n_tx, n_active))");
    for (uint32_t mask : pattern_table) {
        if (std::popcount(mask) != n_active || mask >= (1u << n_tx))
            throw std::invalid_argument("pattern table entry is not an n_active-subset");
    }
    for (size_t i = 0; i < pattern_table.size(); ++i)
        for (size_t j = i + 1; j < pattern_table.size(); ++j)
            if (pattern_table[i] == pattern_table[j])
                throw std::invalid_argument("pattern table entries must be distinct");
}

SmConfig make_sm_config(SmScheme scheme, int n_tx, int n_active, int qam_order) {
    SmConfig cfg;
    cfg.scheme = scheme;
    cfg.n_tx = n_tx;
    cfg.n_active = n_active;
    cfg.qam_order = qam_order;
    cfg.pattern_table = default_pattern_table(n_tx, n_active);
    cfg.validate();
    return cfg;
}

int qam_order_for_efficiency(SmScheme scheme, int n_tx, int n_active, double bits_s_hz) {
    long long combos = binomial(n_tx, n_active);
    int index_bits = 0;
    while ((1LL << (index_bits + 1)) <= combos) ++index_bits;

    double constellation_part =
        scheme == SmScheme::kGoqsm ? bits_s_hz - index_bits : bits_s_hz - 0.5 * index_bits;
    double log2m = 2.0 * constellation_part;
    int m = static_cast<int>(std::lround(std::pow(2.0, log2m)));
    if (std::abs(log2m - std::round(log2m)) > 1e-9 || !is_square_qam(m))
        throw std::invalid_argument("no square QAM order reaches the requested efficiency");
    return m;
}

double spectral_efficiency(const SmConfig& config) {
    double constellation_part = 0.5 * config.qam_bits();
    if (config.scheme == SmScheme::kGoqsm) return constellation_part + config.spatial_bits();
    return constellation_part + 0.5 * config.spatial_bits();
}

int bits_per_use(const SmConfig& config) {
    int spatial = config.scheme == SmScheme::kGoqsm ? 2 * config.spatial_bits()
                                                    : config.spatial_bits();
    return config.qam_bits() + spatial;
}

SmMapper::SmMapper(SmConfig config)
    : config_(std::move(config)),
      constellation_(make_constellation(config_.qam_order)),
      bits_(owcsim::bits_per_use(config_)) {
    config_.validate();
}

namespace {

uint32_t read_bits_msb_first(const uint8_t* bits, int count) {
    uint32_t v = 0;
    for (int i = 0; i < count; ++i) v = (v << 1) | (bits[i] & 1u);
    return v;
}

void write_bits_msb_first(uint32_t v, uint8_t* bits, int count) {
    for (int i = count - 1; i >= 0; --i) {
        bits[i] = static_cast<uint8_t>(v & 1u);
        v >>= 1;
    }
}

}  // namespace

void SmMapper::map(const uint8_t* bits, SmFrame& frame) const {
    const int axis_bits = constellation_.bits_per_axis;
    const int spatial = config_.spatial_bits();

    uint32_t gray_i = read_bits_msb_first(bits, axis_bits);
    uint32_t gray_q = read_bits_msb_first(bits + axis_bits, axis_bits);
    int k_re = static_cast<int>(gray_decode(gray_i));
    int k_im = static_cast<int>(gray_decode(gray_q));
    frame.b = constellation_.point_for_levels(k_re, k_im);

    const uint8_t* p = bits + 2 * axis_bits;
    frame.z_re = static_cast<int>(read_bits_msb_first(p, spatial));
    frame.z_im = config_.scheme == SmScheme::kGoqsm
                     ? static_cast<int>(read_bits_msb_first(p + spatial, spatial))
                     : frame.z_re;

    if (frame.c.size() != static_cast<size_t>(config_.n_tx))
        frame.c.resize(config_.n_tx);
    uint32_t mask_re = config_.pattern_table[frame.z_re];
    uint32_t mask_im = config_.pattern_table[frame.z_im];
    for (int t = 0; t < config_.n_tx; ++t) {
        double re = (mask_re >> t) & 1u ? frame.b.real() : 0.0;
        double im = (mask_im >> t) & 1u ? frame.b.imag() : 0.0;
        frame.c[t] = {re, im};
    }
}

void SmMapper::demap(const SmFrame& frame, uint8_t* bits) const {
    if (frame.z_re < 0 || frame.z_re >= static_cast<int>(config_.pattern_table.size()) ||
        frame.z_im < 0 || frame.z_im >= static_cast<int>(config_.pattern_table.size()))
        throw std::out_of_range("pattern index outside pattern table");

    const int axis_bits = constellation_.bits_per_axis;
    const int spatial = config_.spatial_bits();

    int k_re = constellation_.nearest_level(frame.b.real());
    int k_im = constellation_.nearest_level(frame.b.imag());
    write_bits_msb_first(gray_encode(k_re), bits, axis_bits);
    write_bits_msb_first(gray_encode(k_im), bits + axis_bits, axis_bits);

    uint8_t* p = bits + 2 * axis_bits;
    write_bits_msb_first(static_cast<uint32_t>(frame.z_re), p, spatial);
    if (config_.scheme == SmScheme::kGoqsm)
        write_bits_msb_first(static_cast<uint32_t>(frame.z_im), p + spatial, spatial);
}

SmFrame map_bits(const SmConfig& config, const BitBlock& bits) {
    SmMapper mapper(config);
    if (static_cast<int>(bits.size()) != mapper.bits_per_use())
        throw std::invalid_argument("bit block length does not match the configuration");
    SmFrame frame;
    mapper.map(bits.data(), frame);
    return frame;
}

BitBlock demap_frame(const SmConfig& config, const SmFrame& frame) {
    SmMapper mapper(config);
    BitBlock bits(mapper.bits_per_use());
    mapper.demap(frame, bits.data());
    return bits;
}

}  // namespace owcsim
