#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "owcsim/channel.hpp"

using namespace owcsim;

namespace {
ChannelParams bundled_params() { return ChannelParams{}; }  // defaults are the bundled setup
}

TEST_CASE("Lambertian order is 1 at a 60 degree semi-angle") {
    CHECK(bundled_params().lambertian_order() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("single-gain value matches the high-precision oracle") {
    // oracle value evaluated independently at 40-digit precision before the
    // implementation existed
    double h = lambertian_gain(bundled_params(), {0.0, 0.0, 3.0}, {0.0, 0.0, 0.85});
    CHECK(h == doctest::Approx(1.5416492782616307e-5).epsilon(1e-12));
}

TEST_CASE("field-of-view cutoff zeroes the gain") {
    // incidence at 80 degrees, beyond the 72 degree lens half angle
    double lateral = 2.15 * std::tan(80.0 * M_PI / 180.0);
    double h = lambertian_gain(bundled_params(), {0.0, 0.0, 3.0}, {lateral, 0.0, 0.85});
    CHECK(h == 0.0);
}

TEST_CASE("degenerate geometries are rejected") {
    CHECK_THROWS(lambertian_gain(bundled_params(), {1.0, 1.0, 2.0}, {1.0, 1.0, 2.0}));
    CHECK_THROWS(lambertian_gain(bundled_params(), {0.0, 0.0, 1.0}, {0.0, 0.0, 2.0}));
}

TEST_CASE("parameter validation") {
    ChannelParams p = bundled_params();
    p.semi_angle_deg = 95.0;
    CHECK_THROWS(p.validate());
    p = bundled_params();
    p.noise_psd = 0.0;
    CHECK_THROWS(p.validate());
    p = bundled_params();
    p.lens_refractive_index = 0.5;
    CHECK_THROWS(p.validate());
}

TEST_CASE("gain is monotone non-increasing in lateral offset") {
    ChannelParams p = bundled_params();
    double prev = lambertian_gain(p, {0.0, 0.0, 3.0}, {0.0, 0.0, 0.85});
    for (double r = 0.1; r < 2.0; r += 0.1) {
        double h = lambertian_gain(p, {0.0, 0.0, 3.0}, {r, 0.0, 0.85});
        CHECK(h <= prev + 1e-18);
        prev = h;
    }
}

TEST_CASE("gain is linear in the PD area") {
    ChannelParams p = bundled_params();
    double h1 = lambertian_gain(p, {1.0, 2.0, 3.0}, {2.0, 2.5, 0.85});
    p.pd_area *= 3.5;
    double h2 = lambertian_gain(p, {1.0, 2.0, 3.0}, {2.0, 2.5, 0.85});
    CHECK(h2 == doctest::Approx(3.5 * h1).epsilon(1e-14));
}

TEST_CASE("single LED above single PD builds a 1x1 channel") {
    RoomGeometry geom;
    geom.led_positions = {{2.0, 2.0, 3.0}};
    geom.pd_positions = {{2.0, 2.0, 0.85}};
    MimoChannel ch = build_channel(bundled_params(), geom);
    CHECK(ch.h.rows() == 1);
    CHECK(ch.h(0, 0) ==
          lambertian_gain(bundled_params(), geom.led_positions[0], geom.pd_positions[0]));
}

TEST_CASE("bundled geometry gives a full-rank 4x4 matrix with mirror symmetry") {
    MimoChannel ch = build_channel(bundled_params(), default_room_geometry());
    REQUIRE(ch.h.rows() == 4);
    REQUIRE(ch.h.cols() == 4);
    CHECK(ch.full_column_rank);
    for (int r = 0; r < 4; ++r)
        for (int t = 0; t < 4; ++t) {
            CHECK(ch.h(r, t) > 0.0);
            CHECK(ch.h(r, t) < 1e-4);
        }

    // frozen oracle entries (40-digit evaluation of the gain formula)
    CHECK(ch.h(0, 0) == doctest::Approx(1.04948368897e-5).epsilon(1e-10));
    CHECK(ch.h(3, 3) == doctest::Approx(3.04413546427e-6).epsilon(1e-10));

    // the layout is symmetric under swapping x and y: LED order (1<->2) and
    // PD order (1<->2) permute together, giving exact equalities
    int led_perm[4] = {0, 2, 1, 3};
    int pd_perm[4] = {0, 2, 1, 3};
    for (int r = 0; r < 4; ++r)
        for (int t = 0; t < 4; ++t) CHECK(ch.h(r, t) == ch.h(pd_perm[r], led_perm[t]));

    CHECK(ch.noise_power == doctest::Approx(2e-15).epsilon(1e-14));
}

TEST_CASE("noise sampling statistics and determinism") {
    MimoChannel ch;
    ch.h = Eigen::MatrixXd::Identity(2, 2);
    ch.noise_power = 2e-15;

    RngStream rng(42, 7);
    const int n = 1000000;
    Eigen::MatrixXd s = sample_noise(ch, n, rng);
    double mean = s.row(0).mean();
    double var = (s.row(0).array() - mean).square().sum() / (n - 1);
    double sigma = std::sqrt(ch.noise_power);
    CHECK(std::abs(mean) < 4.0 * sigma / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(ch.noise_power).epsilon(0.01));

    // same seed, same stream: identical scalar
    RngStream a(123, 5), b(123, 5);
    CHECK(sample_noise(ch, 1, a)(0, 0) == sample_noise(ch, 1, b)(0, 0));

    // distinct stream ids: uncorrelated sequences
    RngStream s1(123, 1), s2(123, 2);
    const int m = 100000;
    Eigen::MatrixXd x1 = sample_noise(ch, m, s1), x2 = sample_noise(ch, m, s2);
    double c01 = (x1.row(0).array() * x2.row(0).array()).mean() / ch.noise_power;
    CHECK(std::abs(c01) < 0.01);

    CHECK_THROWS(sample_noise(ch, 0, rng));
}

TEST_CASE("empirical noise covariance is P_n I") {
    MimoChannel ch;
    ch.h = Eigen::MatrixXd::Identity(4, 4);
    ch.noise_power = 2e-15;
    RngStream rng(9, 0);
    const int n = 100000;
    Eigen::MatrixXd s = sample_noise(ch, n, rng);
    Eigen::MatrixXd cov = s * s.transpose() / static_cast<double>(n);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double expect = r == c ? ch.noise_power : 0.0;
            CHECK(std::abs(cov(r, c) - expect) < 0.02 * ch.noise_power);
        }
}
