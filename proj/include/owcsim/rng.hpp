#pragma once

#include <cstdint>
#include <random>

namespace owcsim {

// splitmix64 finalizer; good enough to decorrelate seeds derived from
// (master seed, stream id) counters.
inline uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline uint64_t combine_seed(uint64_t a, uint64_t b) {
    return mix64(a ^ (mix64(b) + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
}

// One independent random stream, addressed by (master seed, stream id).
// Workers never share a stream, so parallel scheduling cannot change
// any drawn sequence.
class RngStream {
public:
    RngStream(uint64_t master_seed, uint64_t stream_id)
        : gen_(combine_seed(master_seed, stream_id)) {}

    double gaussian() { return normal_(gen_); }

    double uniform() { return uniform_(gen_); }

    // one fair bit
    uint8_t bit() {
        if (bits_left_ == 0) {
            bit_buf_ = gen_();
            bits_left_ = 64;
        }
        uint8_t b = static_cast<uint8_t>(bit_buf_ & 1u);
        bit_buf_ >>= 1;
        --bits_left_;
        return b;
    }

    void fill_bits(uint8_t* dst, int count) {
        for (int i = 0; i < count; ++i) dst[i] = bit();
    }

    // uniform integer in [0, bound)
    uint64_t integer(uint64_t bound) {
        return std::uniform_int_distribution<uint64_t>(0, bound - 1)(gen_);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    uint64_t bit_buf_ = 0;
    int bits_left_ = 0;
};

}  // namespace owcsim
