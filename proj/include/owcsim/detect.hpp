#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "owcsim/channel.hpp"
#include "owcsim/sm_codec.hpp"

namespace owcsim {

// Post-ZF symbol estimate plus the per-branch noise variances seen on each
// real axis, i.e. the diagonal of sigma^2 (H^T H)^-1.
struct EqualizedSymbol {
    Eigen::VectorXcd c_hat;
    Eigen::VectorXd branch_noise_var;
};

// Zero-forcing equalizer. Precomputes the pseudo-inverse and (H^T H)^-1
// once; the instance is immutable and shareable across worker threads.
class ZfEqualizer {
public:
    explicit ZfEqualizer(const MimoChannel& channel);  // throws on rank-deficient H

    // sigma2_axis: noise variance per real dimension at the receiver input.
    EqualizedSymbol equalize(const Eigen::VectorXcd& y, double sigma2_axis) const;

    const Eigen::MatrixXd& pinv() const { return pinv_; }
    const Eigen::MatrixXd& gram_inv() const { return gram_inv_; }
    const Eigen::VectorXd& gram_inv_diag() const { return gram_inv_diag_; }

private:
    Eigen::MatrixXd pinv_;
    Eigen::MatrixXd gram_inv_;
    Eigen::VectorXd gram_inv_diag_;
};

struct AxisDetection {
    int pattern_index = 0;
    int level_index = 0;
    std::vector<double> estimates;  // raw values on the active branches
};

// Joint (pattern, PAM level) least-squares search over one real axis:
// argmin over p, m of sum_t (values_t - m * 1{t in p})^2. Ties break to
// the lowest pattern index, then the lowest level index.
AxisDetection ml_detect_axis(const SmConfig& config, const Eigen::VectorXd& values,
                             const std::vector<double>& pam_levels);

// Variance-weighted average with weights proportional to 1/variance,
// normalized to sum to one. Throws on empty input or non-positive variance.
double mrc_combine(const double* estimates, const double* variances, int count);

struct DetectionResult {
    int z_re = 0;
    int z_im = 0;
    std::complex<double> b;
    BitBlock bits;
};

// Two-step detector: per-axis ML pattern+amplitude search, MRC combining of
// the active-branch estimates, nearest-point constellation decision, demap.
// GOSM uses a joint complex (pattern, QAM point) search with the shared
// index. Instances keep scratch buffers; use one per thread.
class MlMrcDetector {
public:
    explicit MlMrcDetector(SmConfig config);

    DetectionResult detect(const EqualizedSymbol& eq);
    // hot path: writes bits_per_use() bits without allocating
    void detect_bits(const EqualizedSymbol& eq, uint8_t* bits);

    const SmMapper& mapper() const { return mapper_; }

private:
    void detect_goqsm(const EqualizedSymbol& eq, DetectionResult& out);
    void detect_gosm(const EqualizedSymbol& eq, DetectionResult& out);

    SmMapper mapper_;
    std::vector<int> pattern_members_;  // flattened active-branch indices
    DetectionResult scratch_;
    SmFrame frame_;
};

}  // namespace owcsim
