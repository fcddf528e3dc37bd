#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "owcsim/detect.hpp"
#include "owcsim/sm_codec.hpp"

namespace owcsim {

// Five-layer fully connected detector network: input K = 2 N_t, three ReLU
// hidden layers, sigmoid output with one unit per transmitted bit.
struct MlpNetwork {
    std::array<int, 5> layer_sizes{};           // K, S1, S2, S3, R
    std::vector<Eigen::MatrixXd> weights;       // W[i]: sizes[i+1] x sizes[i]
    std::vector<Eigen::VectorXd> biases;
    uint64_t init_seed = 0;
    double training_snr_db = 0.0;

    int input_dim() const { return layer_sizes[0]; }
    int output_dim() const { return layer_sizes[4]; }
};

// Hidden sizes used by the bundled configs, keyed by spectral efficiency:
// (30, 36, 16) at 3 bits/s/Hz, (30, 36, 17) at 4, (30, 36, 18) at 5.
std::array<int, 3> hidden_sizes_for_efficiency(double bits_s_hz);

// Uniform +-1/sqrt(fan_in) init for weights and biases; fully determined
// by the seed.
MlpNetwork make_mlp(const std::array<int, 5>& layer_sizes, uint64_t seed);

struct BitScoreVector {
    Eigen::VectorXd y5;  // sigmoid outputs in (0,1)
    BitBlock g_hat;      // hard decisions, 1 iff y5 >= 0.5
};

BitScoreVector forward(const MlpNetwork& net, const Eigen::VectorXd& input);

// mean squared difference between soft scores and the binary target
double mse_loss(const Eigen::VectorXd& y5, const BitBlock& g);

// Scratch space for batched forward/backward passes.
struct MlpWorkspace {
    std::vector<Eigen::MatrixXd> z;   // pre-activations per layer
    std::vector<Eigen::MatrixXd> a;   // activations per layer (a[0] = input)
    std::vector<Eigen::MatrixXd> dz;
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
};

// Forward a batch (inputs are columns); returns activations in ws.a.back().
void forward_batch(const MlpNetwork& net, const Eigen::MatrixXd& inputs,
                   MlpWorkspace& ws);

// Batch-mean MSE loss and exact gradients for every weight and bias.
double mlp_loss_and_gradients(const MlpNetwork& net, const Eigen::MatrixXd& inputs,
                              const Eigen::MatrixXd& targets, MlpWorkspace& ws);

struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState create(const MlpNetwork& net);
};

// One Adam step on one mini-batch; returns the pre-update batch loss.
// Throws on a non-finite loss.
double backward_and_step(MlpNetwork& net, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& targets, AdamState& adam,
                         double learning_rate, MlpWorkspace& ws);

struct TrainConfig {
    double learning_rate = 0.001;
    int batch_size = 100;
    long train_set_size = 1524000;
    long validation_set_size = 635000;
    int epochs = 10;
    double training_snr_db = 0.0;
    uint64_t rng_seed = 1;
};

struct EpochStats {
    int epoch = 0;           // 1-based
    double train_mse = 0.0;  // mean of batch losses over the epoch
    double validation_mse = 0.0;
};

// Deterministic sample stream: the same chunk index always yields the same
// samples, so epochs revisit identical data and runs reproduce bit-exactly.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual int input_dim() const = 0;
    virtual int target_dim() const = 0;
    // fills X (input_dim x count) and T (target_dim x count)
    virtual void fill_chunk(long chunk_index, int count, Eigen::MatrixXd& X,
                            Eigen::MatrixXd& T) = 0;
};

// Mini-batch Adam training with per-epoch train/validation MSE history.
// Throws (with the epoch index) if the loss turns non-finite.
std::vector<EpochStats> train(MlpNetwork& net, SampleSource& train_data,
                              SampleSource& validation_data, const TrainConfig& config);

// RIS pre-processing: [Re c_hat; Im c_hat] as the network input vector.
Eigen::VectorXd ris_input(const EqualizedSymbol& eq);

// Joint detection: RIS, forward pass, 0.5 threshold. No pattern/symbol
// intermediate is formed.
BitBlock dnn_detect(const MlpNetwork& net, const EqualizedSymbol& eq);

// Model file round trip (flat little-endian layout, see save_mlp impl).
void save_mlp(const MlpNetwork& net, const std::string& path);
MlpNetwork load_mlp(const std::string& path);

}  // namespace owcsim
