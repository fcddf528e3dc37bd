// Command-line front end: channel inspection, detector training, BER sweeps
// and post-processing of sweep records.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "owcsim/channel.hpp"
#include "owcsim/config.hpp"
#include "owcsim/harness.hpp"

using namespace owcsim;

namespace {

SimConfig assemble_config(const std::string& preset, const std::string& config_path,
                          uint64_t seed, bool seed_set, int workers, bool workers_set) {
    SimConfig cfg = preset.empty() ? default_sim_config() : preset_sim_config(preset);
    if (!config_path.empty()) apply_config(cfg, KeyValueFile::parse_file(config_path));
    if (seed_set) cfg.seed = seed;
    if (workers_set) cfg.workers = workers;
    return cfg;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw std::runtime_error("cannot write " + path);
    return file;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Link-level simulator for OFDM-based generalized optical spatial "
                 "modulation over indoor MIMO optical wireless channels"};
    app.require_subcommand(1);

    std::string config_path, preset, out_path, format = "csv";
    uint64_t seed = 0;
    int workers = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key-value configuration file");
        sub->add_option("--preset", preset, "built-in preset: fig3, fig4a, fig4b, fig4c");
        sub->add_option("--seed", seed, "master RNG seed");
        sub->add_option("--workers", workers, "parallel workers for the Monte Carlo loops");
        sub->add_option("--out", out_path, "output file ('-' for stdout)");
    };

    auto* chan = app.add_subcommand("channel-gain", "print the MIMO DC-gain matrix as CSV");
    add_common(chan);

    auto* train = app.add_subcommand("train-dnn", "train one detector network and save it");
    add_common(train);
    std::string mse_out;
    train->add_option("--mse-out", mse_out, "also write the per-epoch MSE history CSV");

    auto* sweep = app.add_subcommand("sweep-ber", "run the configured BER sweep");
    add_common(sweep);
    sweep->add_option("--format", format, "output format: csv or json");
    std::string mse_out_sweep;
    sweep->add_option("--mse-out", mse_out_sweep, "write training MSE histories CSV");

    auto* snrat = app.add_subcommand("snr-at-ber",
                                     "interpolate the SNR reaching a target BER per curve");
    std::string records_path;
    double target_ber = 1e-3;
    snrat->add_option("--in", records_path, "sweep records CSV")->required();
    snrat->add_option("--target", target_ber, "target BER (default 1e-3)");
    snrat->add_option("--out", out_path, "output file ('-' for stdout)");

    auto* mse = app.add_subcommand("mse-history",
                                   "train the configured networks and emit MSE histories");
    add_common(mse);

    CLI11_PARSE(app, argc, argv);

    try {
        if (chan->parsed()) {
            SimConfig cfg = assemble_config(preset, config_path, seed, chan->count("--seed"),
                                            workers, chan->count("--workers"));
            MimoChannel channel = build_channel(cfg.optics, cfg.geometry);
            std::ofstream file;
            std::ostream& os = open_out(file, out_path);
            char buf[64];
            for (int r = 0; r < channel.n_rx(); ++r) {
                for (int t = 0; t < channel.n_tx(); ++t) {
                    std::snprintf(buf, sizeof(buf), "%.6g", channel.h(r, t));
                    os << buf << (t + 1 < channel.n_tx() ? "," : "\n");
                }
            }
            return 0;
        }

        if (train->parsed()) {
            SimConfig cfg = assemble_config(preset, config_path, seed, train->count("--seed"),
                                            workers, train->count("--workers"));
            if (cfg.schemes.size() != 1 || cfg.spectral_efficiencies.size() != 1 ||
                cfg.training_snr_grid_db.size() != 1)
                throw ConfigError(
                    "train-dnn needs exactly one scheme, spectral efficiency and "
                    "training SNR");
            if (out_path.empty()) throw ConfigError("train-dnn needs --out for the model file");
            MimoChannel channel = build_channel(cfg.optics, cfg.geometry);
            std::vector<EpochStats> history;
            MlpNetwork net = train_detector_network(cfg, channel, cfg.schemes[0],
                                                    cfg.spectral_efficiencies[0],
                                                    cfg.training_snr_grid_db[0], &history);
            save_mlp(net, out_path);
            if (!mse_out.empty()) {
                std::ofstream os(mse_out);
                write_mse_csv(os, {{scheme_name(cfg.schemes[0]), cfg.spectral_efficiencies[0],
                                    cfg.training_snr_grid_db[0], cfg.seed, history}});
            }
            std::cerr << "model written to " << out_path << " (final validation MSE "
                      << history.back().validation_mse << ")\n";
            return 0;
        }

        if (sweep->parsed()) {
            SimConfig cfg = assemble_config(preset, config_path, seed, sweep->count("--seed"),
                                            workers, sweep->count("--workers"));
            SweepOutput result;
            if (!out_path.empty() && out_path != "-" && format == "csv") {
                result = run_sweep_resumable(cfg, out_path);
            } else {
                result = run_sweep(cfg);
                std::ofstream file;
                std::ostream& os = open_out(file, out_path);
                if (format == "json")
                    write_ber_json(os, result.records);
                else
                    write_ber_csv(os, result.records);
            }
            if (!mse_out_sweep.empty()) {
                std::ofstream os(mse_out_sweep);
                write_mse_csv(os, result.histories);
            }
            return 0;
        }

        if (snrat->parsed()) {
            auto records = read_ber_csv_file(records_path);
            std::ofstream file;
            std::ostream& os = open_out(file, out_path);
            os << "scheme,detector,spectral_efficiency,training_snr_db,snr_at_target\n";
            for (SmScheme scheme : {SmScheme::kGosm, SmScheme::kGoqsm}) {
                for (DetectorKind det : {DetectorKind::kMlMrc, DetectorKind::kDnn}) {
                    // collect the distinct (efficiency, training SNR) pairs present
                    std::vector<std::pair<double, std::optional<double>>> keys;
                    for (const auto& r : records) {
                        if (r.scheme != scheme_name(scheme) || r.detector != detector_name(det))
                            continue;
                        std::pair<double, std::optional<double>> k{r.spectral_efficiency,
                                                                   r.training_snr_db};
                        if (std::find(keys.begin(), keys.end(), k) == keys.end())
                            keys.push_back(k);
                    }
                    for (const auto& [se, tsnr] : keys) {
                        auto curve = filter_curve(records, scheme, det, se, tsnr);
                        try {
                            double snr = find_snr_at_ber(curve, target_ber);
                            char buf[256];
                            char tbuf[32] = "";
                            if (tsnr) std::snprintf(tbuf, sizeof(tbuf), "%g", *tsnr);
                            std::snprintf(buf, sizeof(buf), "%s,%s,%g,%s,%.3f",
                                          scheme_name(scheme), detector_name(det), se, tbuf,
                                          snr);
                            os << buf << "\n";
                        } catch (const std::exception&) {
                            // curve does not bracket the target; skip it
                        }
                    }
                }
            }
            return 0;
        }

        if (mse->parsed()) {
            SimConfig cfg = assemble_config(preset, config_path, seed, mse->count("--seed"),
                                            workers, mse->count("--workers"));
            MimoChannel channel = build_channel(cfg.optics, cfg.geometry);
            std::vector<MseHistory> histories;
            for (SmScheme scheme : cfg.schemes) {
                for (double se : cfg.spectral_efficiencies) {
                    std::vector<double> tsnrs = cfg.training_snr_grid_db;
                    if (tsnrs.empty()) tsnrs = {default_training_snr_db(scheme, se)};
                    for (double tsnr : tsnrs) {
                        std::vector<EpochStats> history;
                        train_detector_network(cfg, channel, scheme, se, tsnr, &history);
                        histories.push_back(
                            {scheme_name(scheme), se, tsnr, cfg.seed, history});
                        std::cerr << scheme_name(scheme) << " " << se << " bits/s/Hz @ "
                                  << tsnr << " dB: validation MSE "
                                  << history.back().validation_mse << "\n";
                    }
                }
            }
            std::ofstream file;
            std::ostream& os = open_out(file, out_path);
            write_mse_csv(os, histories);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
