#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "owcsim/harness.hpp"
#include "owcsim/ofdm.hpp"

#include <nlohmann/json.hpp>

using namespace owcsim;

namespace {

SimConfig small_config() {
    SimConfig cfg = default_sim_config();
    cfg.schemes = {SmScheme::kGoqsm};
    cfg.spectral_efficiencies = {3.0};
    cfg.detectors = {DetectorKind::kMlMrc};
    cfg.snr_grid_db = {158.0, 162.0};
    cfg.min_bit_errors = 100;
    cfg.max_trials = 60000;
    cfg.seed = 11;
    return cfg;
}

std::string strip_wall_time(const std::string& csv) {
    std::stringstream in(csv), out;
    std::string line;
    while (std::getline(in, line)) {
        // wall_time is the second-to-last column
        size_t last = line.rfind(',');
        size_t second = line.rfind(',', last - 1);
        out << line.substr(0, second) << line.substr(last) << "\n";
    }
    return out.str();
}

std::string records_to_string(const std::vector<BerRecord>& records) {
    std::stringstream ss;
    write_ber_csv(ss, records);
    return ss.str();
}

}  // namespace

TEST_CASE("transmitted SNR scaling definition") {
    MimoChannel ch = build_channel(ChannelParams{}, default_room_geometry());
    auto sm = make_sm_config(SmScheme::kGoqsm, 4, 2, 4);

    // 0 dB: total transmit power equals the noise power
    double s0 = transmitted_snr_scale(sm, ch, 0.0);
    CHECK(s0 * s0 * 2.0 == doctest::Approx(2e-15).epsilon(1e-12));

    // +20 dB is exactly a x10 amplitude scale
    double s20 = transmitted_snr_scale(sm, ch, 20.0);
    CHECK(s20 / s0 == doctest::Approx(10.0).epsilon(1e-12));

    // around 160 dB the worst post-ZF branch sits at usable SNR, consistent
    // with the waterfall region
    ZfEqualizer eq(ch);
    double s160 = transmitted_snr_scale(sm, ch, 160.0);
    double worst_var =
        (ch.noise_power / 2.0) * eq.gram_inv_diag().maxCoeff() / (s160 * s160);
    double axis_energy = 0.5;  // per-axis energy of a unit-energy constellation
    double post_zf_snr_db = 10.0 * std::log10(axis_energy / worst_var);
    CHECK(post_zf_snr_db > 0.0);
    CHECK(post_zf_snr_db < 40.0);
}

TEST_CASE("noiseless Monte Carlo points measure zero errors") {
    SimConfig cfg = small_config();
    cfg.disable_noise = true;
    cfg.max_trials = 20000;
    MimoChannel ch = build_channel(cfg.optics, cfg.geometry);
    for (bool fast : {true, false}) {
        cfg.fast_path = fast;
        BerRecord rec = run_ber_point(cfg, ch, {SmScheme::kGoqsm, 3.0,
                                                DetectorKind::kMlMrc, 150.0, {}});
        CHECK(rec.bit_errors == 0);
        CHECK(rec.ber == 0.0);
        CHECK(rec.unreliable);  // zero errors can never reach the floor
        CHECK(rec.bits_simulated >= 6 * 20000);
    }
}

TEST_CASE("fast path and full OFDM path detect identical bits under matched noise") {
    SimConfig cfg = default_sim_config();
    MimoChannel ch = build_channel(cfg.optics, cfg.geometry);
    auto sm = cfg.sm_config_for(SmScheme::kGoqsm, 3.0);
    SmMapper mapper(sm);
    MlMrcDetector det_full(sm), det_fast(sm);
    ZfEqualizer zf(ch);
    OfdmEngine engine(cfg.ofdm);
    const int n_data = cfg.ofdm.n_data();
    const int bits = mapper.bits_per_use();

    const double snr_db = 160.0;
    const double scale = transmitted_snr_scale(sm, ch, snr_db);
    Eigen::MatrixXd pinv_scaled = zf.pinv() / scale;
    Eigen::VectorXd branch_var =
        (ch.noise_power / 2.0 / (scale * scale)) * zf.gram_inv_diag();

    RngStream rng(2024, 1);
    SmFrame frame;
    std::vector<uint8_t> tx(bits);
    Eigen::MatrixXcd freq(4, n_data);
    std::vector<std::vector<uint8_t>> frame_bits(n_data, std::vector<uint8_t>(bits));
    for (int k = 0; k < n_data; ++k) {
        rng.fill_bits(frame_bits[k].data(), bits);
        mapper.map(frame_bits[k].data(), frame);
        for (int t = 0; t < 4; ++t) freq(t, k) = scale * frame.c[t];
    }

    // the full path sees time-domain noise; the fast path sees its transform
    Eigen::MatrixXd time = engine.modulate(freq);
    Eigen::MatrixXd noise_time(4, time.cols());
    double sigma_t = std::sqrt(ch.noise_power);
    for (int t = 0; t < noise_time.cols(); ++t)
        for (int r = 0; r < 4; ++r) noise_time(r, t) = sigma_t * rng.gaussian();
    Eigen::MatrixXd y_time = ch.h * time + noise_time;
    Eigen::MatrixXcd y_freq = engine.demodulate(y_time);
    Eigen::MatrixXcd noise_freq = engine.demodulate(noise_time);

    EqualizedSymbol eq_full, eq_fast;
    eq_full.branch_noise_var = branch_var;
    eq_fast.branch_noise_var = branch_var;
    std::vector<uint8_t> bits_full(bits), bits_fast(bits);
    int mismatches = 0;
    for (int k = 0; k < n_data; ++k) {
        eq_full.c_hat = pinv_scaled * y_freq.col(k);

        mapper.map(frame_bits[k].data(), frame);
        Eigen::VectorXcd y_fast(4);
        for (int r = 0; r < 4; ++r) {
            std::complex<double> acc = noise_freq(r, k);
            for (int t = 0; t < 4; ++t) acc += ch.h(r, t) * scale * frame.c[t];
            y_fast[r] = acc;
        }
        eq_fast.c_hat = pinv_scaled * y_fast;

        det_full.detect_bits(eq_full, bits_full.data());
        det_fast.detect_bits(eq_fast, bits_fast.data());
        if (bits_full != bits_fast) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("BER decreases with SNR") {
    SimConfig cfg = small_config();
    cfg.min_bit_errors = 200;
    cfg.max_trials = 200000;
    MimoChannel ch = build_channel(cfg.optics, cfg.geometry);
    BerRecord low = run_ber_point(cfg, ch, {SmScheme::kGoqsm, 3.0,
                                            DetectorKind::kMlMrc, 150.0, {}});
    BerRecord high = run_ber_point(cfg, ch, {SmScheme::kGoqsm, 3.0,
                                             DetectorKind::kMlMrc, 162.0, {}});
    CHECK(low.ber > high.ber);
}

TEST_CASE("identical config and seed reproduce identical records") {
    SimConfig cfg = small_config();
    auto r1 = run_sweep(cfg).records;
    auto r2 = run_sweep(cfg).records;
    CHECK(strip_wall_time(records_to_string(r1)) == strip_wall_time(records_to_string(r2)));
}

TEST_CASE("worker count does not change the results") {
    SimConfig cfg = small_config();
    cfg.workers = 1;
    auto r1 = run_sweep(cfg).records;
    cfg.workers = 4;
    auto r4 = run_sweep(cfg).records;
    CHECK(strip_wall_time(records_to_string(r1)) == strip_wall_time(records_to_string(r4)));
}

TEST_CASE("sweep resumes from completed records") {
    std::string path = "test_resume.csv";
    std::remove(path.c_str());

    SimConfig cfg = small_config();
    auto first = run_sweep_resumable(cfg, path);
    std::ifstream is1(path);
    std::string csv1((std::istreambuf_iterator<char>(is1)), std::istreambuf_iterator<char>());
    is1.close();

    // extend the grid: the completed rows must be byte-identical
    cfg.snr_grid_db = {158.0, 162.0, 166.0};
    auto second = run_sweep_resumable(cfg, path);
    std::ifstream is2(path);
    std::string csv2((std::istreambuf_iterator<char>(is2)), std::istreambuf_iterator<char>());
    is2.close();

    CHECK(second.records.size() == 3);
    CHECK(csv2.substr(0, csv1.size()) == csv1);

    // rerunning the extended sweep is a no-op
    auto third = run_sweep_resumable(cfg, path);
    std::ifstream is3(path);
    std::string csv3((std::istreambuf_iterator<char>(is3)), std::istreambuf_iterator<char>());
    CHECK(csv3 == csv2);
    std::remove(path.c_str());
}

TEST_CASE("snr interpolation at a target BER") {
    auto rec = [](double snr, double ber) {
        BerRecord r;
        r.scheme = "goqsm";
        r.detector = "ml-mrc";
        r.spectral_efficiency = 3.0;
        r.snr_db = snr;
        r.ber = ber;
        r.bit_errors = 500;
        r.bits_simulated = static_cast<long long>(500 / ber);
        return r;
    };
    std::vector<BerRecord> curve{rec(160.0, 1e-2), rec(164.0, 1e-4)};
    CHECK(find_snr_at_ber(curve, 1e-3) == doctest::Approx(162.0).epsilon(1e-12));

    std::vector<BerRecord> exact{rec(160.0, 1e-2), rec(162.0, 1e-3), rec(164.0, 1e-4)};
    CHECK(find_snr_at_ber(exact, 1e-3) == 162.0);

    std::vector<BerRecord> unbracketed{rec(160.0, 1e-2), rec(164.0, 5e-3)};
    CHECK_THROWS(find_snr_at_ber(unbracketed, 1e-3));
}

TEST_CASE("CSV round trip and JSON mirror") {
    BerRecord r;
    r.scheme = "gosm";
    r.detector = "dnn";
    r.spectral_efficiency = 4.0;
    r.snr_db = 140.0;
    r.training_snr_db = 138.0;
    r.bit_errors = 321;
    r.bits_simulated = 800000;
    r.ber = 321.0 / 800000.0;
    r.seed = 9;
    r.wall_time = 1.25;
    r.unreliable = false;

    std::stringstream ss;
    write_ber_csv(ss, {r});
    auto back = read_ber_csv(ss);
    REQUIRE(back.size() == 1);
    CHECK(back[0].scheme == r.scheme);
    CHECK(back[0].detector == r.detector);
    CHECK(back[0].training_snr_db.has_value());
    CHECK(*back[0].training_snr_db == 138.0);
    CHECK(back[0].bit_errors == r.bit_errors);
    CHECK(back[0].ber == doctest::Approx(r.ber).epsilon(1e-12));

    std::stringstream js;
    write_ber_json(js, {r});
    auto parsed = nlohmann::json::parse(js.str());
    REQUIRE(parsed.is_array());
    CHECK(parsed[0]["scheme"] == "gosm");
    CHECK(parsed[0]["bit_errors"] == 321);

    // ml-mrc rows leave the training SNR column empty
    BerRecord m = r;
    m.detector = "ml-mrc";
    m.training_snr_db.reset();
    std::stringstream ss2;
    write_ber_csv(ss2, {m});
    auto back2 = read_ber_csv(ss2);
    REQUIRE(back2.size() == 1);
    CHECK(!back2[0].training_snr_db.has_value());
}

TEST_CASE("config file parsing") {
    const char* text = R"(
# experiment description
[scheme]
schemes = goqsm, gosm
spectral_efficiencies = 3
[detector]
detectors = ml-mrc
[sweep]
snr_grid_db = 150:5:165
min_bit_errors = 150
seed = 77
workers = 2
fast_path = false
[optics]
noise_psd = 2e-22
)";
    SimConfig cfg = default_sim_config();
    apply_config(cfg, KeyValueFile::parse_string(text));
    CHECK(cfg.schemes.size() == 2);
    CHECK(cfg.snr_grid_db == std::vector<double>{150, 155, 160, 165});
    CHECK(cfg.min_bit_errors == 150);
    CHECK(cfg.seed == 77);
    CHECK(cfg.workers == 2);
    CHECK(cfg.fast_path == false);
    CHECK(cfg.optics.noise_psd == 2e-22);
    cfg.validate();
}

TEST_CASE("config validation lists every offending key") {
    SimConfig cfg = default_sim_config();
    cfg.snr_grid_db = {};
    cfg.min_bit_errors = 5;
    cfg.workers = 0;
    try {
        cfg.validate();
        FAIL("expected a validation error");
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        CHECK(msg.find("snr_grid_db") != std::string::npos);
        CHECK(msg.find("min_bit_errors") != std::string::npos);
        CHECK(msg.find("workers") != std::string::npos);
    }

    SimConfig bad = default_sim_config();
    CHECK_THROWS_AS(
        apply_config(bad, KeyValueFile::parse_string("[sweep]\nfast_path = maybe\n")),
        ConfigError);
}

TEST_CASE("presets are valid configurations") {
    for (const auto& name : preset_names()) CHECK_NOTHROW(preset_sim_config(name).validate());
    CHECK_THROWS(preset_sim_config("fig9"));
}
