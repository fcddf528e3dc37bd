#include "owcsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "owcsim/ofdm.hpp"

#include <nlohmann/json.hpp>

namespace owcsim {

double transmitted_snr_scale(const SmConfig& config, const MimoChannel& channel,
                             double snr_db) {
    Constellation con = make_constellation(config.qam_order);
    double mean_energy = 0.0;
    for (const auto& p : con.points) mean_energy += std::norm(p);
    mean_energy /= static_cast<double>(con.order);

    // average total electrical power of c: n_active branches carry the
    // constellation energy in both schemes
    const double e_c = config.n_active * mean_energy;
    const double p_tx = channel.noise_power * std::pow(10.0, snr_db / 10.0);
    return std::sqrt(p_tx / e_c);
}

namespace {

uint64_t stream_tag(const char* what, SmScheme scheme, double se, double tsnr) {
    uint64_t h = 0xC0FFEEull;
    for (const char* p = what; *p; ++p) h = combine_seed(h, static_cast<uint64_t>(*p));
    h = combine_seed(h, scheme == SmScheme::kGoqsm ? 1 : 2);
    h = combine_seed(h, static_cast<uint64_t>(std::llround(se * 1000.0)));
    h = combine_seed(h, static_cast<uint64_t>(std::llround(tsnr * 1000.0)));
    return h;
}

uint64_t point_stream_id(const PointSpec& point) {
    uint64_t h = 0xBE57ull;
    h = combine_seed(h, point.scheme == SmScheme::kGoqsm ? 1 : 2);
    h = combine_seed(h, point.detector == DetectorKind::kMlMrc ? 1 : 2);
    h = combine_seed(h, static_cast<uint64_t>(std::llround(point.spectral_efficiency * 1000.0)));
    h = combine_seed(h, static_cast<uint64_t>(std::llround(point.snr_db * 1000.0)));
    h = combine_seed(h, point.training_snr_db
                            ? static_cast<uint64_t>(std::llround(*point.training_snr_db * 1000.0))
                            : 0xFFFFFFFFull);
    return h;
}

}  // namespace

ChainSampleSource::ChainSampleSource(const SmConfig& config, const MimoChannel& channel,
                                     double snr_db, uint64_t seed, uint64_t tag)
    : mapper_(config), equalizer_(channel), seed_(seed), stream_tag_(tag) {
    const double scale = transmitted_snr_scale(config, channel, snr_db);
    // the network input is pinv(H) y / scale = c + pinv(H) n / scale
    pinv_scaled_ = equalizer_.pinv() / scale;
    h_scaled_ = channel.h * scale;
    noise_std_axis_ = std::sqrt(channel.noise_power / 2.0);
    bit_buf_.resize(mapper_.bits_per_use());
}

int ChainSampleSource::input_dim() const { return 2 * mapper_.config().n_tx; }
int ChainSampleSource::target_dim() const { return mapper_.bits_per_use(); }

void ChainSampleSource::fill_chunk(long chunk_index, int count, Eigen::MatrixXd& X,
                                   Eigen::MatrixXd& T) {
    const int n_tx = mapper_.config().n_tx;
    const int n_rx = static_cast<int>(h_scaled_.rows());
    const int bits = mapper_.bits_per_use();
    X.resize(2 * n_tx, count);
    T.resize(bits, count);

    RngStream rng(seed_, combine_seed(stream_tag_, static_cast<uint64_t>(chunk_index)));
    Eigen::VectorXd c_re(n_tx), c_im(n_tx), y_re(n_rx), y_im(n_rx);
    for (int s = 0; s < count; ++s) {
        rng.fill_bits(bit_buf_.data(), bits);
        mapper_.map(bit_buf_.data(), frame_);
        for (int t = 0; t < n_tx; ++t) {
            c_re[t] = frame_.c[t].real();
            c_im[t] = frame_.c[t].imag();
        }
        y_re.noalias() = h_scaled_ * c_re;
        y_im.noalias() = h_scaled_ * c_im;
        for (int r = 0; r < n_rx; ++r) y_re[r] += noise_std_axis_ * rng.gaussian();
        for (int r = 0; r < n_rx; ++r) y_im[r] += noise_std_axis_ * rng.gaussian();
        X.col(s).head(n_tx).noalias() = pinv_scaled_ * y_re;
        X.col(s).tail(n_tx).noalias() = pinv_scaled_ * y_im;
        for (int j = 0; j < bits; ++j) T(j, s) = static_cast<double>(bit_buf_[j]);
    }
}

MlpNetwork train_detector_network(const SimConfig& config, const MimoChannel& channel,
                                  SmScheme scheme, double spectral_eff,
                                  double training_snr_db, std::vector<EpochStats>* history) {
    SmConfig sm = config.sm_config_for(scheme, spectral_eff);
    ChainSampleSource train_src(sm, channel, training_snr_db, config.seed,
                                stream_tag("train", scheme, spectral_eff, training_snr_db));
    ChainSampleSource val_src(sm, channel, training_snr_db, config.seed,
                              stream_tag("validate", scheme, spectral_eff, training_snr_db));

    auto hidden = hidden_sizes_for_efficiency(spectral_eff);
    std::array<int, 5> sizes{2 * sm.n_tx, hidden[0], hidden[1], hidden[2], bits_per_use(sm)};
    uint64_t init_seed =
        combine_seed(config.seed, stream_tag("init", scheme, spectral_eff, training_snr_db));
    MlpNetwork net = make_mlp(sizes, init_seed);

    TrainConfig tc = config.train;
    tc.training_snr_db = training_snr_db;
    tc.rng_seed = config.seed;
    auto stats = train(net, train_src, val_src, tc);
    if (history) *history = stats;
    return net;
}

namespace {

struct BlockOutcome {
    long long trials = 0;
    long long bit_errors = 0;
};

struct PointContext {
    const SimConfig* sim = nullptr;
    const MimoChannel* channel = nullptr;
    SmConfig sm;
    DetectorKind detector = DetectorKind::kMlMrc;
    const MlpNetwork* net = nullptr;
    const ZfEqualizer* equalizer = nullptr;
    double scale = 1.0;
    Eigen::MatrixXd h;             // plain channel matrix
    Eigen::MatrixXd h_scaled;      // H * scale
    Eigen::MatrixXd pinv_scaled;   // pinv(H) / scale
    Eigen::VectorXd branch_var;    // per-axis post-ZF noise variance, constellation units
    double noise_std_axis = 0.0;   // per-dimension frequency-domain noise std
    double noise_std_time = 0.0;   // time-domain noise std (full OFDM path)
    int bits_per_use = 0;
    uint64_t point_stream = 0;
};

// Fast path: one complex subcarrier use per trial, y = H (scale c) + n.
BlockOutcome run_block_fast(const PointContext& ctx, uint64_t block_index,
                            long long n_trials) {
    RngStream rng(ctx.sim->seed, combine_seed(ctx.point_stream, block_index));
    SmMapper mapper(ctx.sm);
    const int n_tx = ctx.sm.n_tx;
    const int n_rx = static_cast<int>(ctx.h_scaled.rows());
    const int bits = ctx.bits_per_use;

    SmFrame frame;
    Eigen::VectorXd c_re(n_tx), c_im(n_tx), y_re(n_rx), y_im(n_rx);
    EqualizedSymbol eq;
    eq.c_hat.resize(n_tx);
    eq.branch_noise_var = ctx.branch_var;

    BlockOutcome out;
    out.trials = n_trials;

    if (ctx.detector == DetectorKind::kMlMrc) {
        MlMrcDetector detector(ctx.sm);
        std::vector<uint8_t> tx_bits(bits), rx_bits(bits);
        Eigen::VectorXd ce(n_tx), ci(n_tx);
        for (long long i = 0; i < n_trials; ++i) {
            rng.fill_bits(tx_bits.data(), bits);
            mapper.map(tx_bits.data(), frame);
            for (int t = 0; t < n_tx; ++t) {
                c_re[t] = frame.c[t].real();
                c_im[t] = frame.c[t].imag();
            }
            y_re.noalias() = ctx.h_scaled * c_re;
            y_im.noalias() = ctx.h_scaled * c_im;
            for (int r = 0; r < n_rx; ++r) y_re[r] += ctx.noise_std_axis * rng.gaussian();
            for (int r = 0; r < n_rx; ++r) y_im[r] += ctx.noise_std_axis * rng.gaussian();
            ce.noalias() = ctx.pinv_scaled * y_re;
            ci.noalias() = ctx.pinv_scaled * y_im;
            for (int t = 0; t < n_tx; ++t) eq.c_hat[t] = {ce[t], ci[t]};
            detector.detect_bits(eq, rx_bits.data());
            for (int j = 0; j < bits; ++j) out.bit_errors += tx_bits[j] != rx_bits[j];
        }
        return out;
    }

    // DNN detector: generate a chunk, then one batched forward pass
    constexpr int kChunk = 256;
    Eigen::MatrixXd X(2 * n_tx, kChunk);
    std::vector<uint8_t> truth(static_cast<size_t>(kChunk) * bits);
    MlpWorkspace ws;
    long long remaining = n_trials;
    while (remaining > 0) {
        const int count = static_cast<int>(std::min<long long>(kChunk, remaining));
        for (int s = 0; s < count; ++s) {
            uint8_t* tb = truth.data() + static_cast<size_t>(s) * bits;
            rng.fill_bits(tb, bits);
            mapper.map(tb, frame);
            for (int t = 0; t < n_tx; ++t) {
                c_re[t] = frame.c[t].real();
                c_im[t] = frame.c[t].imag();
            }
            y_re.noalias() = ctx.h_scaled * c_re;
            y_im.noalias() = ctx.h_scaled * c_im;
            for (int r = 0; r < n_rx; ++r) y_re[r] += ctx.noise_std_axis * rng.gaussian();
            for (int r = 0; r < n_rx; ++r) y_im[r] += ctx.noise_std_axis * rng.gaussian();
            X.col(s).head(n_tx).noalias() = ctx.pinv_scaled * y_re;
            X.col(s).tail(n_tx).noalias() = ctx.pinv_scaled * y_im;
        }
        if (count == kChunk) {
            forward_batch(*ctx.net, X, ws);
        } else {
            Eigen::MatrixXd Xp = X.leftCols(count);
            forward_batch(*ctx.net, Xp, ws);
        }
        const Eigen::MatrixXd& scores = ws.a[4];
        for (int s = 0; s < count; ++s) {
            const uint8_t* tb = truth.data() + static_cast<size_t>(s) * bits;
            for (int j = 0; j < bits; ++j)
                out.bit_errors += (scores(j, s) >= 0.5 ? 1 : 0) != tb[j];
        }
        remaining -= count;
    }
    return out;
}

// Full OFDM path: whole frames, memoryless channel applied per time sample.
BlockOutcome run_block_ofdm(const PointContext& ctx, uint64_t block_index,
                            long long n_frames) {
    RngStream rng(ctx.sim->seed, combine_seed(ctx.point_stream, block_index));
    SmMapper mapper(ctx.sm);
    OfdmEngine engine(ctx.sim->ofdm);
    const int n_data = engine.config().n_data();
    const int n_sym = engine.config().symbol_len();
    const int n_tx = ctx.sm.n_tx;
    const int n_rx = static_cast<int>(ctx.h_scaled.rows());
    const int bits = ctx.bits_per_use;

    std::unique_ptr<MlMrcDetector> mlmrc;
    if (ctx.detector == DetectorKind::kMlMrc) mlmrc = std::make_unique<MlMrcDetector>(ctx.sm);

    SmFrame frame;
    Eigen::MatrixXcd freq(n_tx, n_data);
    std::vector<uint8_t> tx_bits(static_cast<size_t>(n_data) * bits);
    std::vector<uint8_t> rx_bits(bits);
    EqualizedSymbol eq;
    eq.c_hat.resize(n_tx);
    eq.branch_noise_var = ctx.branch_var;
    MlpWorkspace ws;
    Eigen::MatrixXd X(2 * n_tx, n_data);

    BlockOutcome out;
    out.trials = n_frames * n_data;

    for (long long f = 0; f < n_frames; ++f) {
        for (int k = 0; k < n_data; ++k) {
            uint8_t* tb = tx_bits.data() + static_cast<size_t>(k) * bits;
            rng.fill_bits(tb, bits);
            mapper.map(tb, frame);
            for (int t = 0; t < n_tx; ++t) freq(t, k) = ctx.scale * frame.c[t];
        }
        Eigen::MatrixXd s_time = engine.modulate(freq);
        Eigen::MatrixXd y_time(n_rx, n_sym);
        y_time.noalias() = ctx.h * s_time;
        for (int t = 0; t < n_sym; ++t)
            for (int r = 0; r < n_rx; ++r) y_time(r, t) += ctx.noise_std_time * rng.gaussian();
        Eigen::MatrixXcd y_freq = engine.demodulate(y_time);

        if (ctx.detector == DetectorKind::kMlMrc) {
            for (int k = 0; k < n_data; ++k) {
                for (int t = 0; t < n_tx; ++t) eq.c_hat[t] = {0.0, 0.0};
                auto ce = (ctx.pinv_scaled * y_freq.col(k).real()).eval();
                auto ci = (ctx.pinv_scaled * y_freq.col(k).imag()).eval();
                for (int t = 0; t < n_tx; ++t) eq.c_hat[t] = {ce[t], ci[t]};
                mlmrc->detect_bits(eq, rx_bits.data());
                const uint8_t* tb = tx_bits.data() + static_cast<size_t>(k) * bits;
                for (int j = 0; j < bits; ++j) out.bit_errors += tb[j] != rx_bits[j];
            }
        } else {
            for (int k = 0; k < n_data; ++k) {
                X.col(k).head(n_tx).noalias() = ctx.pinv_scaled * y_freq.col(k).real();
                X.col(k).tail(n_tx).noalias() = ctx.pinv_scaled * y_freq.col(k).imag();
            }
            forward_batch(*ctx.net, X, ws);
            const Eigen::MatrixXd& scores = ws.a[4];
            for (int k = 0; k < n_data; ++k) {
                const uint8_t* tb = tx_bits.data() + static_cast<size_t>(k) * bits;
                for (int j = 0; j < bits; ++j)
                    out.bit_errors += (scores(j, k) >= 0.5 ? 1 : 0) != tb[j];
            }
        }
    }
    return out;
}

}  // namespace

BerRecord run_ber_point(const SimConfig& config, const MimoChannel& channel,
                        const PointSpec& point, const MlpNetwork* net) {
    const auto t0 = std::chrono::steady_clock::now();

    PointContext ctx;
    ctx.sim = &config;
    ctx.channel = &channel;
    ctx.sm = config.sm_config_for(point.scheme, point.spectral_efficiency);
    ctx.detector = point.detector;
    ctx.net = net;
    ctx.bits_per_use = bits_per_use(ctx.sm);
    if (point.detector == DetectorKind::kDnn) {
        if (net == nullptr) throw std::invalid_argument("dnn point without a trained network");
        if (net->output_dim() != ctx.bits_per_use || net->input_dim() != 2 * ctx.sm.n_tx)
            throw std::invalid_argument("network shape does not match the configuration");
    }

    ZfEqualizer equalizer(channel);
    ctx.equalizer = &equalizer;
    ctx.scale = transmitted_snr_scale(ctx.sm, channel, point.snr_db);
    ctx.h = channel.h;
    ctx.h_scaled = channel.h * ctx.scale;
    ctx.pinv_scaled = equalizer.pinv() / ctx.scale;
    const double sigma2_axis = config.disable_noise ? 0.0 : channel.noise_power / 2.0;
    ctx.noise_std_axis = std::sqrt(sigma2_axis);
    ctx.noise_std_time = config.disable_noise ? 0.0 : std::sqrt(channel.noise_power);
    // per-axis variance after ZF and scale normalization; MRC weights are
    // invariant to the common factor, so the noiseless checks fall back to
    // the relative variances
    ctx.branch_var = sigma2_axis > 0.0
                         ? ((sigma2_axis / (ctx.scale * ctx.scale)) *
                            equalizer.gram_inv_diag().array())
                               .matrix()
                               .eval()
                         : equalizer.gram_inv_diag();
    ctx.point_stream = point_stream_id(point);

    // trial budget and fixed block size (full path rounds to whole frames)
    const long long budget_trials =
        config.max_trials > 0 ? config.max_trials
                              : (config.max_bits + ctx.bits_per_use - 1) / ctx.bits_per_use;
    long long block_trials;
    long long n_data = 0;
    if (config.fast_path) {
        block_trials = 4096;
    } else {
        n_data = config.ofdm.n_data();
        block_trials = 32 * n_data;
    }
    const uint64_t max_blocks =
        static_cast<uint64_t>((budget_trials + block_trials - 1) / block_trials);

    std::mutex mu;
    std::map<uint64_t, BlockOutcome> pending;
    uint64_t next_commit = 0;
    long long cum_err = 0, cum_trials = 0;
    std::optional<uint64_t> stop_block;
    std::atomic<uint64_t> next_block{0};

    auto worker = [&]() {
        for (;;) {
            const uint64_t b = next_block.fetch_add(1);
            if (b >= max_blocks) return;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (stop_block && b > *stop_block) return;
            }
            long long trials = block_trials;
            if (config.fast_path) {
                trials = std::min<long long>(block_trials,
                                             budget_trials - static_cast<long long>(b) *
                                                                 block_trials);
            }
            BlockOutcome res = config.fast_path
                                   ? run_block_fast(ctx, b, trials)
                                   : run_block_ofdm(ctx, b, trials / n_data);

            std::lock_guard<std::mutex> lock(mu);
            pending[b] = res;
            while (!stop_block) {
                auto it = pending.find(next_commit);
                if (it == pending.end()) break;
                cum_err += it->second.bit_errors;
                cum_trials += it->second.trials;
                pending.erase(it);
                const uint64_t committed = next_commit++;
                if (cum_err >= config.min_bit_errors || cum_trials >= budget_trials ||
                    committed + 1 == max_blocks)
                    stop_block = committed;
            }
        }
    };

    const int n_workers = std::max(1, config.workers);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    BerRecord rec;
    rec.scheme = scheme_name(point.scheme);
    rec.detector = detector_name(point.detector);
    rec.spectral_efficiency = point.spectral_efficiency;
    rec.snr_db = point.snr_db;
    rec.training_snr_db = point.training_snr_db;
    rec.bit_errors = cum_err;
    rec.bits_simulated = cum_trials * ctx.bits_per_use;
    rec.ber = rec.bits_simulated > 0
                  ? static_cast<double>(cum_err) / static_cast<double>(rec.bits_simulated)
                  : 0.0;
    rec.seed = config.seed;
    rec.unreliable = cum_err < config.min_bit_errors;
    rec.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

namespace {

std::vector<PointSpec> enumerate_points(const SimConfig& config) {
    std::vector<PointSpec> points;
    const std::vector<double>& dnn_grid =
        config.dnn_snr_grid_db.empty() ? config.snr_grid_db : config.dnn_snr_grid_db;
    for (SmScheme scheme : config.schemes) {
        for (double se : config.spectral_efficiencies) {
            for (DetectorKind det : config.detectors) {
                if (det == DetectorKind::kMlMrc) {
                    for (double snr : config.snr_grid_db)
                        points.push_back({scheme, se, det, snr, std::nullopt});
                } else {
                    for (double tsnr : config.training_snr_grid_db)
                        for (double snr : dnn_grid)
                            points.push_back({scheme, se, det, snr, tsnr});
                }
            }
        }
    }
    return points;
}

std::string point_key(const BerRecord& r) {
    char tsnr[64] = "-";
    if (r.training_snr_db) std::snprintf(tsnr, sizeof(tsnr), "%g", *r.training_snr_db);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s|%s|%g|%g|%s|%llu", r.scheme.c_str(),
                  r.detector.c_str(), r.spectral_efficiency, r.snr_db, tsnr,
                  static_cast<unsigned long long>(r.seed));
    return buf;
}

}  // namespace

SweepOutput run_sweep(const SimConfig& config) {
    config.validate();
    SimConfig cfg = config;
    MimoChannel channel = build_channel(cfg.optics, cfg.geometry);

    SweepOutput out;

    // train (or load) every required network first, on one thread
    std::map<std::string, MlpNetwork> nets;
    bool uses_dnn = std::find(cfg.detectors.begin(), cfg.detectors.end(),
                              DetectorKind::kDnn) != cfg.detectors.end();
    if (uses_dnn) {
        if (!cfg.model_path.empty()) {
            MlpNetwork net = load_mlp(cfg.model_path);
            cfg.training_snr_grid_db = {net.training_snr_db};
            nets["file"] = std::move(net);
        } else {
            for (SmScheme scheme : cfg.schemes) {
                for (double se : cfg.spectral_efficiencies) {
                    for (double tsnr : cfg.training_snr_grid_db) {
                        std::vector<EpochStats> history;
                        MlpNetwork net =
                            train_detector_network(cfg, channel, scheme, se, tsnr, &history);
                        char key[128];
                        std::snprintf(key, sizeof(key), "%s|%g|%g", scheme_name(scheme), se,
                                      tsnr);
                        nets[key] = std::move(net);
                        out.histories.push_back(
                            {scheme_name(scheme), se, tsnr, cfg.seed, history});
                    }
                }
            }
        }
    }

    for (const PointSpec& point : enumerate_points(cfg)) {
        const MlpNetwork* net = nullptr;
        if (point.detector == DetectorKind::kDnn) {
            if (!cfg.model_path.empty()) {
                net = &nets.at("file");
            } else {
                char key[128];
                std::snprintf(key, sizeof(key), "%s|%g|%g", scheme_name(point.scheme),
                              point.spectral_efficiency, *point.training_snr_db);
                net = &nets.at(key);
            }
        }
        out.records.push_back(run_ber_point(cfg, channel, point, net));
    }
    return out;
}

SweepOutput run_sweep_resumable(const SimConfig& config, const std::string& out_path) {
    config.validate();
    SimConfig cfg = config;

    // previously completed rows, kept verbatim
    std::map<std::string, std::pair<BerRecord, std::string>> existing;
    {
        std::ifstream is(out_path);
        if (is) {
            std::string header;
            std::getline(is, header);
            std::string line;
            while (std::getline(is, line)) {
                if (line.empty()) continue;
                std::stringstream ss(ber_csv_header() + "\n" + line + "\n");
                auto recs = read_ber_csv(ss);
                if (recs.size() == 1) existing[point_key(recs[0])] = {recs[0], line};
            }
        }
    }

    MimoChannel channel = build_channel(cfg.optics, cfg.geometry);
    SweepOutput out;

    std::map<std::string, MlpNetwork> nets;
    if (!cfg.model_path.empty()) {
        nets["file"] = load_mlp(cfg.model_path);
        cfg.training_snr_grid_db = {nets.at("file").training_snr_db};
    }
    auto net_for = [&](const PointSpec& point) -> const MlpNetwork* {
        if (point.detector != DetectorKind::kDnn) return nullptr;
        if (!cfg.model_path.empty()) return &nets.at("file");
        char key[128];
        std::snprintf(key, sizeof(key), "%s|%g|%g", scheme_name(point.scheme),
                      point.spectral_efficiency, *point.training_snr_db);
        if (nets.find(key) == nets.end()) {
            std::vector<EpochStats> history;
            nets[key] = train_detector_network(cfg, channel, point.scheme,
                                               point.spectral_efficiency,
                                               *point.training_snr_db, &history);
            out.histories.push_back({scheme_name(point.scheme), point.spectral_efficiency,
                                     *point.training_snr_db, cfg.seed, history});
        }
        return &nets.at(key);
    };

    std::vector<std::string> lines;
    for (const PointSpec& point : enumerate_points(cfg)) {
        BerRecord probe;
        probe.scheme = scheme_name(point.scheme);
        probe.detector = detector_name(point.detector);
        probe.spectral_efficiency = point.spectral_efficiency;
        probe.snr_db = point.snr_db;
        probe.training_snr_db = point.training_snr_db;
        probe.seed = cfg.seed;

        auto it = existing.find(point_key(probe));
        if (it != existing.end()) {
            out.records.push_back(it->second.first);
            lines.push_back(it->second.second);
        } else {
            BerRecord rec = run_ber_point(cfg, channel, point, net_for(point));
            out.records.push_back(rec);
            lines.push_back(ber_csv_row(rec));
        }
    }

    std::ofstream os(out_path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    os << ber_csv_header() << "\n";
    for (const auto& line : lines) os << line << "\n";
    return out;
}

double find_snr_at_ber(const std::vector<BerRecord>& curve, double target_ber) {
    if (curve.size() < 1) throw std::invalid_argument("empty curve");
    std::vector<BerRecord> pts = curve;
    std::sort(pts.begin(), pts.end(),
              [](const BerRecord& a, const BerRecord& b) { return a.snr_db < b.snr_db; });

    for (const auto& p : pts)
        if (p.ber == target_ber) return p.snr_db;

    // BER floor for zero-error points so the log interpolation stays finite
    auto eff_ber = [&](const BerRecord& r) {
        return r.ber > 0.0 ? r.ber : 0.5 / std::max<long long>(1, r.bits_simulated);
    };

    // last downward crossing, robust to statistical wiggles
    for (int i = static_cast<int>(pts.size()) - 2; i >= 0; --i) {
        double b1 = eff_ber(pts[i]);
        double b2 = eff_ber(pts[i + 1]);
        if (b1 >= target_ber && target_ber >= b2 && b1 > b2) {
            double s1 = pts[i].snr_db, s2 = pts[i + 1].snr_db;
            double f = (std::log10(b1) - std::log10(target_ber)) /
                       (std::log10(b1) - std::log10(b2));
            return s1 + f * (s2 - s1);
        }
    }
    throw std::runtime_error("target BER not bracketed by the sweep records");
}

std::vector<BerRecord> filter_curve(const std::vector<BerRecord>& records, SmScheme scheme,
                                    DetectorKind detector, double spectral_eff,
                                    std::optional<double> training_snr_db) {
    std::vector<BerRecord> out;
    for (const auto& r : records) {
        if (r.scheme != scheme_name(scheme) || r.detector != detector_name(detector))
            continue;
        if (r.spectral_efficiency != spectral_eff) continue;
        if (training_snr_db) {
            if (!r.training_snr_db || *r.training_snr_db != *training_snr_db) continue;
        }
        out.push_back(r);
    }
    std::sort(out.begin(), out.end(),
              [](const BerRecord& a, const BerRecord& b) { return a.snr_db < b.snr_db; });
    return out;
}

std::string ber_csv_header() {
    return "scheme,detector,spectral_efficiency,snr_db,training_snr_db,bit_errors,"
           "bits_simulated,ber,seed,wall_time,unreliable";
}

std::string ber_csv_row(const BerRecord& r) {
    char buf[512];
    char tsnr[64] = "";
    if (r.training_snr_db) std::snprintf(tsnr, sizeof(tsnr), "%g", *r.training_snr_db);
    std::snprintf(buf, sizeof(buf), "%s,%s,%g,%g,%s,%lld,%lld,%.8e,%llu,%.3f,%d",
                  r.scheme.c_str(), r.detector.c_str(), r.spectral_efficiency, r.snr_db, tsnr,
                  r.bit_errors, r.bits_simulated, r.ber,
                  static_cast<unsigned long long>(r.seed), r.wall_time,
                  r.unreliable ? 1 : 0);
    return buf;
}

void write_ber_csv(std::ostream& os, const std::vector<BerRecord>& records) {
    os << ber_csv_header() << "\n";
    for (const auto& r : records) os << ber_csv_row(r) << "\n";
}

std::vector<BerRecord> read_ber_csv(std::istream& is) {
    std::vector<BerRecord> out;
    std::string line;
    if (!std::getline(is, line)) return out;  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < 11) fields.push_back("");
        BerRecord r;
        r.scheme = fields[0];
        r.detector = fields[1];
        r.spectral_efficiency = std::stod(fields[2]);
        r.snr_db = std::stod(fields[3]);
        if (!fields[4].empty()) r.training_snr_db = std::stod(fields[4]);
        r.bit_errors = std::stoll(fields[5]);
        r.bits_simulated = std::stoll(fields[6]);
        r.ber = std::stod(fields[7]);
        r.seed = std::stoull(fields[8]);
        r.wall_time = std::stod(fields[9]);
        r.unreliable = fields[10] == "1";
        out.push_back(r);
    }
    return out;
}

std::vector<BerRecord> read_ber_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_ber_csv(is);
}

void write_ber_json(std::ostream& os, const std::vector<BerRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json j;
        j["scheme"] = r.scheme;
        j["detector"] = r.detector;
        j["spectral_efficiency"] = r.spectral_efficiency;
        j["snr_db"] = r.snr_db;
        if (r.training_snr_db)
            j["training_snr_db"] = *r.training_snr_db;
        else
            j["training_snr_db"] = nullptr;
        j["bit_errors"] = r.bit_errors;
        j["bits_simulated"] = r.bits_simulated;
        j["ber"] = r.ber;
        j["seed"] = r.seed;
        j["wall_time"] = r.wall_time;
        j["unreliable"] = r.unreliable;
        arr.push_back(j);
    }
    os << arr.dump(2) << "\n";
}

void write_mse_csv(std::ostream& os, const std::vector<MseHistory>& histories) {
    os << "scheme,spectral_efficiency,training_snr_db,seed,epoch,train_mse,validation_mse\n";
    char buf[256];
    for (const auto& h : histories) {
        for (const auto& e : h.epochs) {
            std::snprintf(buf, sizeof(buf), "%s,%g,%g,%llu,%d,%.8e,%.8e", h.scheme.c_str(),
                          h.spectral_efficiency, h.training_snr_db,
                          static_cast<unsigned long long>(h.seed), e.epoch, e.train_mse,
                          e.validation_mse);
            os << buf << "\n";
        }
    }
}

}  // namespace owcsim
