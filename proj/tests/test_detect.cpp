#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "owcsim/channel.hpp"
#include "owcsim/detect.hpp"

using namespace owcsim;

namespace {

MimoChannel bundled_channel() {
    return build_channel(ChannelParams{}, default_room_geometry());
}

BitBlock block_from_value(uint32_t v, int bits) {
    BitBlock b(bits);
    for (int i = 0; i < bits; ++i) b[i] = (v >> (bits - 1 - i)) & 1u;
    return b;
}

}  // namespace

TEST_CASE("identity channel passes through") {
    MimoChannel ch;
    ch.h = Eigen::MatrixXd::Identity(4, 4);
    ch.noise_power = 1.0;
    ZfEqualizer eq(ch);
    Eigen::VectorXcd y(4);
    y << std::complex<double>(1, 2), std::complex<double>(-3, 0.5),
        std::complex<double>(0, -1), std::complex<double>(2, 2);
    auto out = eq.equalize(y, 0.25);
    CHECK((out.c_hat - y).cwiseAbs().maxCoeff() < 1e-14);
    for (int t = 0; t < 4; ++t) CHECK(out.branch_noise_var[t] == doctest::Approx(0.25));
}

TEST_CASE("noiseless equalization inverts the channel") {
    MimoChannel ch = bundled_channel();
    ZfEqualizer eq(ch);
    std::mt19937 gen(3);
    std::normal_distribution<double> g;
    Eigen::VectorXcd c(4);
    for (int t = 0; t < 4; ++t) c[t] = {g(gen), g(gen)};
    Eigen::VectorXcd y = ch.h * c;
    auto out = eq.equalize(y, 1.0);
    CHECK((out.c_hat - c).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank-deficient channels are rejected") {
    MimoChannel ch;
    ch.h = Eigen::MatrixXd::Ones(4, 4);
    ch.noise_power = 1.0;
    CHECK_THROWS(ZfEqualizer(ch));
}

TEST_CASE("post-ZF noise covariance follows sigma^2 (H^T H)^-1") {
    MimoChannel ch = bundled_channel();
    ZfEqualizer eq(ch);
    const double sigma2 = ch.noise_power;
    Eigen::MatrixXd expected = sigma2 * eq.gram_inv();

    RngStream rng(77, 0);
    const int n = 100000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(4, 4);
    Eigen::VectorXcd y(4);
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < 4; ++r) y[r] = {std::sqrt(sigma2) * rng.gaussian(), 0.0};
        auto out = eq.equalize(y, sigma2);
        Eigen::VectorXd v = out.c_hat.real();
        acc.noalias() += v * v.transpose();
    }
    acc /= static_cast<double>(n);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            CHECK(acc(a, b) == doctest::Approx(expected(a, b)).epsilon(0.03));
}

TEST_CASE("axis detection on exact noiseless input") {
    auto cfg = make_sm_config(SmScheme::kGoqsm, 4, 2, 4);
    auto con = make_constellation(4);
    const double a = con.pam_levels[0];
    Eigen::VectorXd values(4);
    values << a, a, 0.0, 0.0;
    auto det = ml_detect_axis(cfg, values, con.pam_levels);
    CHECK(det.pattern_index == 0);
    CHECK(con.pam_levels[det.level_index] == a);
    REQUIRE(det.estimates.size() == 2);
    CHECK(det.estimates[0] == a);
    CHECK(det.estimates[1] == a);
}

TEST_CASE("axis detection tie-break is deterministic") {
    auto cfg = make_sm_config(SmScheme::kGoqsm, 4, 2, 16);
    auto con = make_constellation(16);
    Eigen::VectorXd values = Eigen::VectorXd::Zero(4);
    auto det = ml_detect_axis(cfg, values, con.pam_levels);
    CHECK(det.pattern_index == 0);
    // levels are (3,1,-1,-3)/sqrt(10); +1 and -1 tie on distance to zero and
    // the lower index wins
    CHECK(det.level_index == 1);
}

TEST_CASE("axis detection equals the exhaustive brute force") {
    auto cfg = make_sm_config(SmScheme::kGoqsm, 4, 2, 16);
    auto con = make_constellation(16);
    std::mt19937 gen(17);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10000; ++trial) {
        Eigen::VectorXd values(4);
        for (int t = 0; t < 4; ++t) values[t] = g(gen);

        // independent brute force straight from the metric definition
        double best = std::numeric_limits<double>::infinity();
        int bp = -1, bm = -1;
        for (size_t p = 0; p < cfg.pattern_table.size(); ++p) {
            for (size_t m = 0; m < con.pam_levels.size(); ++m) {
                double metric = 0.0;
                for (int t = 0; t < 4; ++t) {
                    bool active = (cfg.pattern_table[p] >> t) & 1u;
                    double d = values[t] - (active ? con.pam_levels[m] : 0.0);
                    metric += d * d;
                }
                if (metric < best) {
                    best = metric;
                    bp = static_cast<int>(p);
                    bm = static_cast<int>(m);
                }
            }
        }
        auto det = ml_detect_axis(cfg, values, con.pam_levels);
        CHECK(det.pattern_index == bp);
        CHECK(det.level_index == bm);
    }
}

TEST_CASE("MRC combining") {
    double est[2] = {1.0, 3.0};
    double var_eq[2] = {2.0, 2.0};
    CHECK(mrc_combine(est, var_eq, 2) == doctest::Approx(2.0));

    double var_skew[2] = {1.0, 1e12};
    CHECK(mrc_combine(est, var_skew, 2) == doctest::Approx(1.0).epsilon(1e-9));

    double bad_var[2] = {1.0, 0.0};
    CHECK_THROWS(mrc_combine(est, bad_var, 2));
    CHECK_THROWS(mrc_combine(est, var_eq, 0));

    // inverse-variance weights minimize the combined variance: compare with a
    // grid search over convex weightings on random two-branch instances
    std::mt19937 gen(23);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        double v1 = u(gen), v2 = u(gen);
        double w_mrc = (1.0 / v1) / (1.0 / v1 + 1.0 / v2);
        double var_mrc = w_mrc * w_mrc * v1 + (1.0 - w_mrc) * (1.0 - w_mrc) * v2;
        for (int i = 0; i <= 100; ++i) {
            double w = i / 100.0;
            double var_w = w * w * v1 + (1.0 - w) * (1.0 - w) * v2;
            CHECK(var_mrc <= var_w + 1e-12);
        }
    }
}

TEST_CASE("noiseless ML-MRC detection is exact for every block") {
    for (SmScheme scheme : {SmScheme::kGoqsm, SmScheme::kGosm}) {
        int m = scheme == SmScheme::kGoqsm ? 4 : 16;  // both at 3 bits/s/Hz
        auto cfg = make_sm_config(scheme, 4, 2, m);
        SmMapper mapper(cfg);
        MlMrcDetector detector(cfg);
        int bits = mapper.bits_per_use();
        SmFrame frame;
        EqualizedSymbol eq;
        eq.branch_noise_var = Eigen::VectorXd::Ones(4);
        BitBlock in(bits), out(bits);
        for (uint32_t v = 0; v < (1u << bits); ++v) {
            in = block_from_value(v, bits);
            mapper.map(in.data(), frame);
            eq.c_hat = Eigen::Map<const Eigen::VectorXcd>(frame.c.data(), 4);
            detector.detect_bits(eq, out.data());
            CHECK(in == out);
        }
    }
}

TEST_CASE("detection result carries consistent fields") {
    auto cfg = make_sm_config(SmScheme::kGoqsm, 4, 2, 4);
    SmMapper mapper(cfg);
    MlMrcDetector detector(cfg);
    SmFrame frame;
    BitBlock in = block_from_value(0b001011, 6);
    mapper.map(in.data(), frame);
    EqualizedSymbol eq;
    eq.c_hat = Eigen::Map<const Eigen::VectorXcd>(frame.c.data(), 4);
    eq.branch_noise_var = Eigen::VectorXd::Ones(4);
    DetectionResult res = detector.detect(eq);
    CHECK(res.bits == in);
    CHECK(res.z_re == frame.z_re);
    CHECK(res.z_im == frame.z_im);
    CHECK(std::abs(res.b - frame.b) < 1e-12);
}

TEST_CASE("first-step pattern errors propagate into the combining step") {
    // with i.i.d. per-branch noise, constellation-bit errors conditioned on a
    // wrong pattern decision are far more likely than with the right pattern
    auto cfg = make_sm_config(SmScheme::kGoqsm, 4, 2, 4);
    SmMapper mapper(cfg);
    MlMrcDetector detector(cfg);
    std::mt19937 gen(5);
    std::normal_distribution<double> g;
    const double sigma = 0.45;

    long pat_wrong = 0, pat_wrong_biterr = 0;
    long pat_right = 0, pat_right_biterr = 0;
    SmFrame frame;
    BitBlock in(6), out(6);
    EqualizedSymbol eq;
    eq.c_hat.resize(4);
    eq.branch_noise_var = Eigen::VectorXd::Constant(4, sigma * sigma);
    for (int trial = 0; trial < 60000; ++trial) {
        uint32_t v = gen() & 63u;
        in = block_from_value(v, 6);
        mapper.map(in.data(), frame);
        for (int t = 0; t < 4; ++t)
            eq.c_hat[t] = frame.c[t] + std::complex<double>(sigma * g(gen), sigma * g(gen));
        DetectionResult res = detector.detect(eq);
        int qam_errors = (res.bits[0] != in[0]) + (res.bits[1] != in[1]);
        if (res.z_re != frame.z_re || res.z_im != frame.z_im) {
            ++pat_wrong;
            pat_wrong_biterr += qam_errors;
        } else {
            ++pat_right;
            pat_right_biterr += qam_errors;
        }
    }
    REQUIRE(pat_wrong > 100);
    double ber_wrong = static_cast<double>(pat_wrong_biterr) / (2.0 * pat_wrong);
    double ber_right = static_cast<double>(pat_right_biterr) / (2.0 * pat_right);
    CHECK(ber_wrong > 3.0 * ber_right);
}
