#include "owcsim/detect.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace owcsim {

ZfEqualizer::ZfEqualizer(const MimoChannel& channel) {
    const Eigen::MatrixXd& h = channel.h;
    if (h.rows() < h.cols())
        throw std::invalid_argument("ZF needs at least as many PDs as LEDs");

    Eigen::MatrixXd gram = h.transpose() * h;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible())
        throw std::invalid_argument("channel matrix is rank deficient; ZF unavailable");
    gram_inv_ = lu.inverse();
    pinv_ = gram_inv_ * h.transpose();
    gram_inv_diag_ = gram_inv_.diagonal();
}

EqualizedSymbol ZfEqualizer::equalize(const Eigen::VectorXcd& y, double sigma2_axis) const {
    if (y.size() != pinv_.cols())
        throw std::invalid_argument("received vector length does not match N_r");
    EqualizedSymbol eq;
    eq.c_hat = pinv_ * y;
    eq.branch_noise_var = sigma2_axis * gram_inv_diag_;
    return eq;
}

AxisDetection ml_detect_axis(const SmConfig& config, const Eigen::VectorXd& values,
                             const std::vector<double>& pam_levels) {
    if (pam_levels.empty()) throw std::invalid_argument("empty PAM level set");
    const int n_tx = config.n_tx;

    AxisDetection best;
    double best_metric = std::numeric_limits<double>::infinity();
    for (size_t p = 0; p < config.pattern_table.size(); ++p) {
        const uint32_t mask = config.pattern_table[p];
        for (size_t m = 0; m < pam_levels.size(); ++m) {
            double metric = 0.0;
            for (int t = 0; t < n_tx; ++t) {
                double target = (mask >> t) & 1u ? pam_levels[m] : 0.0;
                double d = values[t] - target;
                metric += d * d;
            }
            if (metric < best_metric) {
                best_metric = metric;
                best.pattern_index = static_cast<int>(p);
                best.level_index = static_cast<int>(m);
            }
        }
    }
    best.estimates.clear();
    const uint32_t mask = config.pattern_table[best.pattern_index];
    for (int t = 0; t < n_tx; ++t)
        if ((mask >> t) & 1u) best.estimates.push_back(values[t]);
    return best;
}

double mrc_combine(const double* estimates, const double* variances, int count) {
    if (count < 1) throw std::invalid_argument("mrc_combine needs at least one branch");
    double wsum = 0.0, acc = 0.0;
    for (int i = 0; i < count; ++i) {
        if (!(variances[i] > 0.0))
            throw std::invalid_argument("mrc_combine variance must be > 0");
        double w = 1.0 / variances[i];
        wsum += w;
        acc += w * estimates[i];
    }
    return acc / wsum;
}

MlMrcDetector::MlMrcDetector(SmConfig config) : mapper_(std::move(config)) {
    const SmConfig& cfg = mapper_.config();
    pattern_members_.reserve(cfg.pattern_table.size() * cfg.n_active);
    for (uint32_t mask : cfg.pattern_table)
        for (int t = 0; t < cfg.n_tx; ++t)
            if ((mask >> t) & 1u) pattern_members_.push_back(t);
    scratch_.bits.resize(mapper_.bits_per_use());
    frame_.c.resize(cfg.n_tx);
}

void MlMrcDetector::detect_goqsm(const EqualizedSymbol& eq, DetectionResult& out) {
    const SmConfig& cfg = mapper_.config();
    const Constellation& con = mapper_.constellation();
    const int n_tx = cfg.n_tx;
    const int n_act = cfg.n_active;
    const int n_pat = static_cast<int>(cfg.pattern_table.size());

    double b_axis[2];  // combined estimate per axis (0 = Re, 1 = Im)
    int z_axis[2];
    for (int axis = 0; axis < 2; ++axis) {
        double best_metric = std::numeric_limits<double>::infinity();
        int best_p = 0;
        for (int p = 0; p < n_pat; ++p) {
            const uint32_t mask = cfg.pattern_table[p];
            for (int m = 0; m < con.levels_per_axis; ++m) {
                const double level = con.pam_levels[m];
                double metric = 0.0;
                for (int t = 0; t < n_tx; ++t) {
                    double v = axis == 0 ? eq.c_hat[t].real() : eq.c_hat[t].imag();
                    double d = v - ((mask >> t) & 1u ? level : 0.0);
                    metric += d * d;
                }
                if (metric < best_metric) {
                    best_metric = metric;
                    best_p = p;
                }
            }
        }
        // MRC over the branches the detected pattern marks active
        double wsum = 0.0, acc = 0.0;
        const int* members = pattern_members_.data() + best_p * n_act;
        for (int i = 0; i < n_act; ++i) {
            const int t = members[i];
            double w = 1.0 / eq.branch_noise_var[t];
            double v = axis == 0 ? eq.c_hat[t].real() : eq.c_hat[t].imag();
            wsum += w;
            acc += w * v;
        }
        b_axis[axis] = acc / wsum;
        z_axis[axis] = best_p;
    }

    out.z_re = z_axis[0];
    out.z_im = z_axis[1];
    int k_re = con.nearest_level(b_axis[0]);
    int k_im = con.nearest_level(b_axis[1]);
    out.b = con.point_for_levels(k_re, k_im);
}

void MlMrcDetector::detect_gosm(const EqualizedSymbol& eq, DetectionResult& out) {
    const SmConfig& cfg = mapper_.config();
    const Constellation& con = mapper_.constellation();
    const int n_tx = cfg.n_tx;
    const int n_act = cfg.n_active;
    const int n_pat = static_cast<int>(cfg.pattern_table.size());

    // Joint (pattern, QAM point) search. The metric separates per axis for
    // square QAM, so the best point given a pattern is the per-axis best.
    double inactive_energy_total = 0.0;
    for (int t = 0; t < n_tx; ++t) inactive_energy_total += std::norm(eq.c_hat[t]);

    double best_metric = std::numeric_limits<double>::infinity();
    int best_p = 0;
    for (int p = 0; p < n_pat; ++p) {
        const int* members = pattern_members_.data() + p * n_act;
        double active_energy = 0.0;
        for (int i = 0; i < n_act; ++i) active_energy += std::norm(eq.c_hat[members[i]]);

        double metric = inactive_energy_total - active_energy;
        for (int axis = 0; axis < 2; ++axis) {
            double best_axis = std::numeric_limits<double>::infinity();
            for (int m = 0; m < con.levels_per_axis; ++m) {
                const double level = con.pam_levels[m];
                double acc = 0.0;
                for (int i = 0; i < n_act; ++i) {
                    const int t = members[i];
                    double v = axis == 0 ? eq.c_hat[t].real() : eq.c_hat[t].imag();
                    double d = v - level;
                    acc += d * d;
                }
                if (acc < best_axis) best_axis = acc;
            }
            metric += best_axis;
        }
        if (metric < best_metric) {
            best_metric = metric;
            best_p = p;
        }
    }

    // MRC of the active complex estimates, then nearest-point decision
    const int* members = pattern_members_.data() + best_p * n_act;
    double wsum = 0.0;
    std::complex<double> acc{0.0, 0.0};
    for (int i = 0; i < n_act; ++i) {
        const int t = members[i];
        double w = 1.0 / eq.branch_noise_var[t];
        wsum += w;
        acc += w * eq.c_hat[t];
    }
    std::complex<double> bhat = acc / wsum;

    out.z_re = best_p;
    out.z_im = best_p;
    int k_re = con.nearest_level(bhat.real());
    int k_im = con.nearest_level(bhat.imag());
    out.b = con.point_for_levels(k_re, k_im);
}

void MlMrcDetector::detect_bits(const EqualizedSymbol& eq, uint8_t* bits) {
    if (mapper_.config().scheme == SmScheme::kGoqsm)
        detect_goqsm(eq, scratch_);
    else
        detect_gosm(eq, scratch_);
    frame_.b = scratch_.b;
    frame_.z_re = scratch_.z_re;
    frame_.z_im = scratch_.z_im;
    mapper_.demap(frame_, bits);
}

DetectionResult MlMrcDetector::detect(const EqualizedSymbol& eq) {
    DetectionResult out;
    out.bits.resize(mapper_.bits_per_use());
    detect_bits(eq, out.bits.data());
    out.b = scratch_.b;
    out.z_re = scratch_.z_re;
    out.z_im = scratch_.z_im;
    return out;
}

}  // namespace owcsim
