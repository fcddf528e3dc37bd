#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace owcsim {

// Real-valued OFDM with Hermitian-symmetric subcarrier loading. DC and
// Nyquist bins always carry zero; data lives on bins 1 .. fft_size/2 - 1.
struct OfdmConfig {
    int fft_size = 256;
    int cyclic_prefix_len = 0;
    std::vector<int> data_subcarriers;  // empty -> 1 .. fft_size/2 - 1

    int n_data() const;
    int symbol_len() const { return fft_size + cyclic_prefix_len; }
    std::vector<int> effective_subcarriers() const;
    void validate() const;
};

// Per-thread modulator/demodulator. Owns FFT plans and scratch buffers,
// so instances are not shareable across threads; construction is cheap.
// Transforms are unitary (1/sqrt(N) both directions).
class OfdmEngine {
public:
    explicit OfdmEngine(OfdmConfig config);
    ~OfdmEngine();
    OfdmEngine(const OfdmEngine&) = delete;
    OfdmEngine& operator=(const OfdmEngine&) = delete;

    // freq: one row per branch, column i modulates data subcarrier i.
    // Returns n_branches x (fft_size + cp) real samples.
    Eigen::MatrixXd modulate(const Eigen::MatrixXcd& freq);

    // Inverse of modulate: CP removal, forward transform, data-bin extraction.
    Eigen::MatrixXcd demodulate(const Eigen::MatrixXd& time);

    const OfdmConfig& config() const { return config_; }
    const std::vector<int>& subcarriers() const { return subcarriers_; }

private:
    OfdmConfig config_;
    std::vector<int> subcarriers_;
    void* plan_fwd_ = nullptr;
    void* plan_inv_ = nullptr;
    std::vector<std::complex<double>> buf_in_;
    std::vector<std::complex<double>> buf_out_;
};

}  // namespace owcsim
