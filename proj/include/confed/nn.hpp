#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "confed/matrix.hpp"

namespace confed::nn {

enum class OutputActivation : uint8_t { kSigmoid = 0, kIdentity = 1 };

enum class Mode { kTrain, kEval };

enum class LossKind : uint8_t { kBce = 0, kL1 = 1, kSquare = 2 };

/// Feed-forward architecture: dense layers, leaky-ReLU hidden units with
/// optional per-layer batch norm and dropout, sigmoid or identity output.
struct ArchSpec {
    std::vector<uint32_t> layer_sizes;
    double leaky_slope = 0.01;
    OutputActivation output_activation = OutputActivation::kSigmoid;
    std::vector<uint8_t> batch_norm;   // one flag per hidden layer
    std::vector<double> dropout_rate;  // one rate in [0,1) per hidden layer

    size_t n_hidden() const {
        return layer_sizes.size() >= 2 ? layer_sizes.size() - 2 : 0;
    }
    void validate() const;

    bool operator==(const ArchSpec& other) const = default;
};

/// Convenience constructor: input -> hidden... -> output, uniform
/// batch-norm/dropout settings across hidden layers.
ArchSpec make_arch(const std::vector<uint32_t>& sizes,
                   OutputActivation out_act = OutputActivation::kSigmoid,
                   bool batch_norm = false, double dropout = 0.0,
                   double leaky_slope = 0.01);

/// Flat parameter addressing for one layer transition. Batch-norm slots are
/// npos-sized when the layer has no batch norm.
struct LayerSlots {
    size_t in = 0, out = 0;
    size_t w = 0, b = 0;
    size_t gamma = 0, beta = 0, run_mean = 0, run_var = 0;
    bool has_bn = false;
    bool is_hidden = false;
    double dropout = 0.0;
};

struct ParamLayout {
    std::vector<LayerSlots> layers;
    size_t total = 0;
};

ParamLayout make_layout(const ArchSpec& arch);
size_t param_count(const ArchSpec& arch);

/// Model parameters: architecture plus one flat value vector holding
/// weights, biases, batch-norm scale/shift and running statistics.
struct ModelParams {
    ArchSpec arch;
    std::vector<double> values;

    void validate() const;
    bool operator==(const ModelParams& other) const = default;
};

/// Fresh parameters: weights uniform in +-sqrt(6/(fan_in+fan_out)), biases 0,
/// batch-norm scale 1 / shift 0, running mean 0 / variance 1.
ModelParams init_params(const ArchSpec& arch, uint64_t seed);

/// Forward pass. Train mode applies dropout (seeded) and normalizes with
/// batch statistics; eval mode is deterministic and uses running statistics.
Matrix forward(const ModelParams& params, const Batch& batch, Mode mode,
               uint64_t rng_seed = 0);

/// Forward on a bare input matrix (targets not needed).
Matrix forward(const ModelParams& params, const Matrix& inputs, Mode mode,
               uint64_t rng_seed = 0);

/// Mean binary cross entropy; predictions are clamped to
/// [1e-7, 1 - 1e-7] before the logs so the loss stays finite.
double bce_loss(const std::vector<double>& pred, const std::vector<double>& target);

/// Mean absolute difference.
double l1_loss(const std::vector<double>& a, const std::vector<double>& b);

struct LsganLosses {
    double disc_loss = 0.0;  // mean((d_real-1)^2) + mean(d_fake^2)
    double gen_loss = 0.0;   // mean((d_fake-1)^2)
};

/// Least-squares GAN objectives from raw discriminator scores.
LsganLosses lsgan_losses(const std::vector<double>& d_real,
                         const std::vector<double>& d_fake);

/// Per-batch-norm-layer batch statistics gathered during a train-mode pass.
struct BnBatchStats {
    std::vector<std::vector<double>> mean;  // entry per bn layer
    std::vector<std::vector<double>> var;
};

struct BackwardOutcome {
    std::vector<double> param_grad;  // same length as params.values;
                                     // zero at running-statistic slots
    Matrix input_grad;               // d loss / d inputs
    double loss = 0.0;               // defined for loss-driven backward
    BnBatchStats bn_stats;           // train-mode batch statistics
};

/// Gradient of the selected loss w.r.t. every trainable parameter, by exact
/// backpropagation. Mode and seed must match the forward pass being
/// differentiated.
BackwardOutcome backward(const ModelParams& params, const Batch& batch,
                         LossKind loss, Mode mode, uint64_t rng_seed = 0);

/// Backward from an externally supplied gradient w.r.t. the network output
/// (post output-activation). Used to chain networks, e.g. pushing a
/// discriminator's input gradient into a generator.
BackwardOutcome backward_from(const ModelParams& params, const Matrix& inputs,
                              const Matrix& upstream, Mode mode,
                              uint64_t rng_seed = 0);

/// Exponential-moving-average update of running statistics (momentum 0.9).
void apply_bn_update(ModelParams& params, const BnBatchStats& stats,
                     double momentum = 0.9);

/// values' = values - lr * grads; running statistics pass through unchanged
/// because their gradient slots are zero.
ModelParams sgd_step(const ModelParams& params, const std::vector<double>& grads,
                     double lr);

/// Parameter file: magic "CFL1", arch descriptor, little-endian f64 values.
std::vector<uint8_t> serialize_params(const ModelParams& params);
ModelParams deserialize_params(const std::vector<uint8_t>& bytes);

}  // namespace confed::nn
