#include "owcsim/ofdm.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace owcsim {

namespace {
// FFTW plan creation is not thread safe; execution with distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex mu;
    return mu;
}
}  // namespace

int OfdmConfig::n_data() const { return static_cast<int>(effective_subcarriers().size()); }

std::vector<int> OfdmConfig::effective_subcarriers() const {
    if (!data_subcarriers.empty()) return data_subcarriers;
    std::vector<int> sc;
    for (int k = 1; k < fft_size / 2; ++k) sc.push_back(k);
    return sc;
}

void OfdmConfig::validate() const {
    if (fft_size < 4 || (fft_size & (fft_size - 1)) != 0)
        throw std::invalid_argument("fft_size must be a power of two >= 4");
    if (cyclic_prefix_len < 0) throw std::invalid_argument("cyclic prefix must be >= 0");
    for (int k : effective_subcarriers())
        if (k < 1 || k >= fft_size / 2)
            throw std::invalid_argument("data subcarrier outside 1 .. fft_size/2 - 1");
}

OfdmEngine::OfdmEngine(OfdmConfig config) : config_(std::move(config)) {
    config_.validate();
    subcarriers_ = config_.effective_subcarriers();
    buf_in_.resize(config_.fft_size);
    buf_out_.resize(config_.fft_size);

    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_fwd_ = fftw_plan_dft_1d(config_.fft_size,
                                 reinterpret_cast<fftw_complex*>(buf_in_.data()),
                                 reinterpret_cast<fftw_complex*>(buf_out_.data()),
                                 FFTW_FORWARD, FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_dft_1d(config_.fft_size,
                                 reinterpret_cast<fftw_complex*>(buf_in_.data()),
                                 reinterpret_cast<fftw_complex*>(buf_out_.data()),
                                 FFTW_BACKWARD, FFTW_ESTIMATE);
    if (plan_fwd_ == nullptr || plan_inv_ == nullptr)
        throw std::runtime_error("FFTW plan creation failed");
}

OfdmEngine::~OfdmEngine() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_inv_) fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
}

Eigen::MatrixXd OfdmEngine::modulate(const Eigen::MatrixXcd& freq) {
    const int n = config_.fft_size;
    const int cp = config_.cyclic_prefix_len;
    const int n_data = static_cast<int>(subcarriers_.size());
    if (freq.cols() != n_data)
        throw std::invalid_argument("frequency frame width does not match data subcarriers");

    const double inv_norm = 1.0 / std::sqrt(static_cast<double>(n));
    Eigen::MatrixXd time(freq.rows(), n + cp);
    for (int b = 0; b < freq.rows(); ++b) {
        std::fill(buf_in_.begin(), buf_in_.end(), std::complex<double>(0.0, 0.0));
        // Hermitian loading: DC and Nyquist stay zero, X[n-k] = conj(X[k])
        for (int i = 0; i < n_data; ++i) {
            const int k = subcarriers_[i];
            buf_in_[k] = freq(b, i);
            buf_in_[n - k] = std::conj(freq(b, i));
        }
        fftw_execute(static_cast<fftw_plan>(plan_inv_));

        double max_abs = 0.0, max_imag = 0.0;
        for (int t = 0; t < n; ++t) {
            max_abs = std::max(max_abs, std::abs(buf_out_[t].real()));
            max_imag = std::max(max_imag, std::abs(buf_out_[t].imag()));
        }
        if (max_imag > 1e-10 * std::max(1.0, max_abs))
            throw std::logic_error("imaginary residue after Hermitian inverse transform");

        for (int t = 0; t < n; ++t) time(b, cp + t) = buf_out_[t].real() * inv_norm;
        for (int t = 0; t < cp; ++t) time(b, t) = time(b, n + t);  // copy of the tail
    }
    return time;
}

Eigen::MatrixXcd OfdmEngine::demodulate(const Eigen::MatrixXd& time) {
    const int n = config_.fft_size;
    const int cp = config_.cyclic_prefix_len;
    const int n_data = static_cast<int>(subcarriers_.size());
    if (time.cols() != n + cp)
        throw std::invalid_argument("time frame length does not match fft_size + cp");

    const double inv_norm = 1.0 / std::sqrt(static_cast<double>(n));
    Eigen::MatrixXcd freq(time.rows(), n_data);
    for (int b = 0; b < time.rows(); ++b) {
        for (int t = 0; t < n; ++t) buf_in_[t] = {time(b, cp + t), 0.0};
        fftw_execute(static_cast<fftw_plan>(plan_fwd_));
        for (int i = 0; i < n_data; ++i) freq(b, i) = buf_out_[subcarriers_[i]] * inv_norm;
    }
    return freq;
}

}  // namespace owcsim
