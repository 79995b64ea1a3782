#include <cmath>

#include "confed/nn.hpp"

namespace confed::nn {

void ArchSpec::validate() const {
    if (layer_sizes.size() < 2)
        throw InvalidInput("ArchSpec: need at least 2 layers");
    for (uint32_t s : layer_sizes)
        if (s < 1) throw InvalidInput("ArchSpec: layer sizes must be >= 1");
    size_t nh = n_hidden();
    if (batch_norm.size() != nh)
        throw InvalidInput("ArchSpec: batch_norm must have one flag per hidden layer");
    if (dropout_rate.size() != nh)
        throw InvalidInput("ArchSpec: dropout_rate must have one rate per hidden layer");
    for (double r : dropout_rate)
        if (r < 0.0 || r >= 1.0) throw InvalidInput("ArchSpec: dropout_rate must be in [0,1)");
    if (!(leaky_slope == leaky_slope))
        throw InvalidInput("ArchSpec: leaky_slope is NaN");
}

ArchSpec make_arch(const std::vector<uint32_t>& sizes, OutputActivation out_act,
                   bool batch_norm, double dropout, double leaky_slope) {
    ArchSpec arch;
    arch.layer_sizes = sizes;
    arch.output_activation = out_act;
    arch.leaky_slope = leaky_slope;
    size_t nh = arch.n_hidden();
    arch.batch_norm.assign(nh, batch_norm ? 1 : 0);
    arch.dropout_rate.assign(nh, dropout);
    arch.validate();
    return arch;
}

ParamLayout make_layout(const ArchSpec& arch) {
    arch.validate();
    ParamLayout layout;
    size_t offset = 0;
    size_t n_transitions = arch.layer_sizes.size() - 1;
    for (size_t t = 0; t < n_transitions; ++t) {
        LayerSlots s;
        s.in = arch.layer_sizes[t];
        s.out = arch.layer_sizes[t + 1];
        s.is_hidden = t + 1 < n_transitions;  // layer t+1 is not the output
        s.w = offset;
        offset += s.in * s.out;
        s.b = offset;
        offset += s.out;
        if (s.is_hidden) {
            s.has_bn = arch.batch_norm[t] != 0;
            s.dropout = arch.dropout_rate[t];
            if (s.has_bn) {
                s.gamma = offset;
                offset += s.out;
                s.beta = offset;
                offset += s.out;
                s.run_mean = offset;
                offset += s.out;
                s.run_var = offset;
                offset += s.out;
            }
        }
        layout.layers.push_back(s);
    }
    layout.total = offset;
    return layout;
}

size_t param_count(const ArchSpec& arch) { return make_layout(arch).total; }

void ModelParams::validate() const {
    arch.validate();
    if (values.size() != param_count(arch))
        throw InvalidInput("ModelParams: value count does not match architecture");
    for (double v : values)
        if (!std::isfinite(v)) throw InvalidInput("ModelParams: non-finite value");
}

ModelParams init_params(const ArchSpec& arch, uint64_t seed) {
    ParamLayout layout = make_layout(arch);
    ModelParams p;
    p.arch = arch;
    p.values.assign(layout.total, 0.0);
    Rng rng(seed);
    for (const LayerSlots& s : layout.layers) {
        double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        for (size_t i = 0; i < s.in * s.out; ++i)
            p.values[s.w + i] = (2.0 * rng.uniform() - 1.0) * limit;
        // biases stay 0
        if (s.has_bn) {
            for (size_t i = 0; i < s.out; ++i) {
                p.values[s.gamma + i] = 1.0;
                p.values[s.run_var + i] = 1.0;
            }
        }
    }
    return p;
}

ModelParams sgd_step(const ModelParams& params, const std::vector<double>& grads,
                     double lr) {
    if (grads.size() != params.values.size())
        throw InvalidInput("sgd_step: gradient length does not match parameters");
    if (lr < 0.0) throw InvalidInput("sgd_step: negative learning rate");
    ModelParams out = params;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] -= lr * grads[i];
    return out;
}

void apply_bn_update(ModelParams& params, const BnBatchStats& stats, double momentum) {
    ParamLayout layout = make_layout(params.arch);
    size_t bn_idx = 0;
    for (const LayerSlots& s : layout.layers) {
        if (!s.has_bn) continue;
        if (bn_idx >= stats.mean.size()) break;
        const auto& mu = stats.mean[bn_idx];
        const auto& var = stats.var[bn_idx];
        for (size_t j = 0; j < s.out; ++j) {
            params.values[s.run_mean + j] =
                momentum * params.values[s.run_mean + j] + (1.0 - momentum) * mu[j];
            params.values[s.run_var + j] =
                momentum * params.values[s.run_var + j] + (1.0 - momentum) * var[j];
        }
        ++bn_idx;
    }
}

}  // namespace confed::nn
