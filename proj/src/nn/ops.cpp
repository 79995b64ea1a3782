#include <cmath>

#include "confed/nn.hpp"

namespace confed::nn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBceClampLo = 1e-7;
constexpr double kBceClampHi = 1.0 - 1e-7;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Everything backward needs from the forward pass.
struct ForwardCache {
    std::vector<Matrix> layer_in;    // input to each transition (post previous layer)
    std::vector<Matrix> xhat;        // normalized Z (bn layers only, else empty)
    std::vector<std::vector<double>> bn_mean;  // per transition (empty when no bn)
    std::vector<std::vector<double>> bn_var;
    std::vector<Matrix> pre_act;     // input to the activation
    std::vector<Matrix> drop_mask;   // inverted-dropout masks (empty when rate 0)
    Matrix output;
};

ForwardCache run_forward(const ModelParams& params, const Matrix& inputs, Mode mode,
                         uint64_t rng_seed) {
    const ParamLayout layout = make_layout(params.arch);
    if (params.values.size() != layout.total)
        throw InvalidInput("forward: parameter count does not match architecture");
    if (inputs.cols != params.arch.layer_sizes.front())
        throw InvalidInput("forward: batch column count does not match first layer size");

    const size_t n = inputs.rows;
    const size_t n_trans = layout.layers.size();
    ForwardCache cache;
    cache.layer_in.resize(n_trans);
    cache.xhat.resize(n_trans);
    cache.bn_mean.resize(n_trans);
    cache.bn_var.resize(n_trans);
    cache.pre_act.resize(n_trans);
    cache.drop_mask.resize(n_trans);

    Rng drop_rng(mix_seed(rng_seed, 0x64726f70ULL));
    Matrix act = inputs;
    for (size_t t = 0; t < n_trans; ++t) {
        const LayerSlots& s = layout.layers[t];
        cache.layer_in[t] = act;

        Matrix z(n, s.out);
        const double* wbase = params.values.data() + s.w;
        const double* bias = params.values.data() + s.b;
        for (size_t i = 0; i < n; ++i) {
            const double* ai = act.row(i);
            double* zi = z.row(i);
            for (size_t o = 0; o < s.out; ++o) {
                const double* wo = wbase + o * s.in;
                double sum = bias[o];
                for (size_t k = 0; k < s.in; ++k) sum += ai[k] * wo[k];
                zi[o] = sum;
            }
        }

        if (s.is_hidden) {
            if (s.has_bn) {
                std::vector<double> mu(s.out, 0.0), var(s.out, 0.0);
                if (mode == Mode::kTrain) {
                    for (size_t i = 0; i < n; ++i) {
                        const double* zi = z.row(i);
                        for (size_t o = 0; o < s.out; ++o) mu[o] += zi[o];
                    }
                    for (size_t o = 0; o < s.out; ++o) mu[o] /= static_cast<double>(n);
                    for (size_t i = 0; i < n; ++i) {
                        const double* zi = z.row(i);
                        for (size_t o = 0; o < s.out; ++o) {
                            double d = zi[o] - mu[o];
                            var[o] += d * d;
                        }
                    }
                    for (size_t o = 0; o < s.out; ++o) var[o] /= static_cast<double>(n);
                } else {
                    for (size_t o = 0; o < s.out; ++o) {
                        mu[o] = params.values[s.run_mean + o];
                        var[o] = params.values[s.run_var + o];
                    }
                }
                Matrix xh(n, s.out);
                const double* gamma = params.values.data() + s.gamma;
                const double* beta = params.values.data() + s.beta;
                for (size_t i = 0; i < n; ++i) {
                    const double* zi = z.row(i);
                    double* xi = xh.row(i);
                    double* zo = z.row(i);
                    for (size_t o = 0; o < s.out; ++o) {
                        double x = (zi[o] - mu[o]) / std::sqrt(var[o] + kBnEps);
                        xi[o] = x;
                        zo[o] = gamma[o] * x + beta[o];
                    }
                }
                cache.xhat[t] = xh;
                cache.bn_mean[t] = std::move(mu);
                cache.bn_var[t] = std::move(var);
            }
            cache.pre_act[t] = z;
            const double slope = params.arch.leaky_slope;
            for (double& v : z.data) v = v > 0.0 ? v : slope * v;
            if (s.dropout > 0.0 && mode == Mode::kTrain) {
                Matrix mask(n, s.out);
                const double keep = 1.0 - s.dropout;
                for (double& m : mask.data) m = drop_rng.uniform() < keep ? 1.0 / keep : 0.0;
                for (size_t i = 0; i < z.data.size(); ++i) z.data[i] *= mask.data[i];
                cache.drop_mask[t] = std::move(mask);
            }
        } else {
            cache.pre_act[t] = z;
            if (params.arch.output_activation == OutputActivation::kSigmoid)
                for (double& v : z.data) v = sigmoid(v);
        }
        act = std::move(z);
    }
    cache.output = std::move(act);
    return cache;
}

/// Loss value and gradient w.r.t. predictions, mean over all elements.
double loss_and_grad(LossKind kind, const Matrix& pred, const Matrix& target,
                     Matrix& grad) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw InvalidInput("loss: prediction and target shapes differ");
    const double n = static_cast<double>(pred.data.size());
    grad = Matrix(pred.rows, pred.cols);
    double total = 0.0;
    switch (kind) {
        case LossKind::kBce:
            for (size_t i = 0; i < pred.data.size(); ++i) {
                double p = pred.data[i];
                double y = target.data[i];
                double pc = std::min(std::max(p, kBceClampLo), kBceClampHi);
                total += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
                grad.data[i] = (p > kBceClampLo && p < kBceClampHi)
                                   ? (-y / pc + (1.0 - y) / (1.0 - pc)) / n
                                   : 0.0;
            }
            break;
        case LossKind::kL1:
            for (size_t i = 0; i < pred.data.size(); ++i) {
                double d = pred.data[i] - target.data[i];
                total += std::fabs(d);
                grad.data[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
            }
            break;
        case LossKind::kSquare:
            for (size_t i = 0; i < pred.data.size(); ++i) {
                double d = pred.data[i] - target.data[i];
                total += d * d;
                grad.data[i] = 2.0 * d / n;
            }
            break;
    }
    return total / n;
}

BackwardOutcome run_backward(const ModelParams& params, const Matrix& inputs,
                             Mode mode, uint64_t rng_seed, const Matrix* targets,
                             LossKind loss_kind, const Matrix* upstream) {
    const ParamLayout layout = make_layout(params.arch);
    ForwardCache cache = run_forward(params, inputs, mode, rng_seed);

    BackwardOutcome out;
    out.param_grad.assign(params.values.size(), 0.0);

    Matrix d_out;  // gradient w.r.t. network output
    if (targets != nullptr) {
        out.loss = loss_and_grad(loss_kind, cache.output, *targets, d_out);
    } else {
        if (upstream->rows != cache.output.rows || upstream->cols != cache.output.cols)
            throw InvalidInput("backward_from: upstream shape does not match output");
        d_out = *upstream;
    }

    const size_t n = inputs.rows;
    const size_t n_trans = layout.layers.size();
    Matrix d_act = std::move(d_out);  // gradient w.r.t. current layer's post-activation

    for (size_t ti = n_trans; ti-- > 0;) {
        const LayerSlots& s = layout.layers[ti];
        Matrix dz(n, s.out);

        if (!s.is_hidden) {
            if (params.arch.output_activation == OutputActivation::kSigmoid) {
                for (size_t i = 0; i < dz.data.size(); ++i) {
                    double p = cache.output.data[i];
                    dz.data[i] = d_act.data[i] * p * (1.0 - p);
                }
            } else {
                dz.data = d_act.data;
            }
        } else {
            // dropout
            if (!cache.drop_mask[ti].data.empty()) {
                for (size_t i = 0; i < d_act.data.size(); ++i)
                    d_act.data[i] *= cache.drop_mask[ti].data[i];
            }
            // leaky relu
            const double slope = params.arch.leaky_slope;
            for (size_t i = 0; i < d_act.data.size(); ++i) {
                double pre = cache.pre_act[ti].data[i];
                dz.data[i] = d_act.data[i] * (pre > 0.0 ? 1.0 : slope);
            }
            if (s.has_bn) {
                const double* gamma = params.values.data() + s.gamma;
                const Matrix& xh = cache.xhat[ti];
                // gamma / beta gradients
                for (size_t i = 0; i < n; ++i) {
                    const double* dyi = dz.row(i);
                    const double* xi = xh.row(i);
                    for (size_t o = 0; o < s.out; ++o) {
                        out.param_grad[s.gamma + o] += dyi[o] * xi[o];
                        out.param_grad[s.beta + o] += dyi[o];
                    }
                }
                Matrix dz_bn(n, s.out);
                if (mode == Mode::kTrain) {
                    // full batch-norm backward through batch statistics
                    const auto& var = cache.bn_var[ti];
                    std::vector<double> sum_dxhat(s.out, 0.0), sum_dxhat_xhat(s.out, 0.0);
                    for (size_t i = 0; i < n; ++i) {
                        const double* dyi = dz.row(i);
                        const double* xi = xh.row(i);
                        for (size_t o = 0; o < s.out; ++o) {
                            double dxh = dyi[o] * gamma[o];
                            sum_dxhat[o] += dxh;
                            sum_dxhat_xhat[o] += dxh * xi[o];
                        }
                    }
                    const double m = static_cast<double>(n);
                    for (size_t i = 0; i < n; ++i) {
                        const double* dyi = dz.row(i);
                        const double* xi = xh.row(i);
                        double* di = dz_bn.row(i);
                        for (size_t o = 0; o < s.out; ++o) {
                            double dxh = dyi[o] * gamma[o];
                            di[o] = (m * dxh - sum_dxhat[o] - xi[o] * sum_dxhat_xhat[o]) /
                                    (m * std::sqrt(var[o] + kBnEps));
                        }
                    }
                } else {
                    const double* rvar = params.values.data() + s.run_var;
                    for (size_t i = 0; i < n; ++i) {
                        const double* dyi = dz.row(i);
                        double* di = dz_bn.row(i);
                        for (size_t o = 0; o < s.out; ++o)
                            di[o] = dyi[o] * gamma[o] / std::sqrt(rvar[o] + kBnEps);
                    }
                }
                dz = std::move(dz_bn);
            }
        }

        // weight / bias gradients and gradient w.r.t. this transition's input
        const Matrix& layer_in = cache.layer_in[ti];
        for (size_t i = 0; i < n; ++i) {
            const double* dzi = dz.row(i);
            const double* ai = layer_in.row(i);
            for (size_t o = 0; o < s.out; ++o) {
                const double g = dzi[o];
                if (g == 0.0) continue;
                double* wg = out.param_grad.data() + s.w + o * s.in;
                for (size_t k = 0; k < s.in; ++k) wg[k] += g * ai[k];
                out.param_grad[s.b + o] += g;
            }
        }
        Matrix d_in(n, s.in);
        const double* wbase = params.values.data() + s.w;
        for (size_t i = 0; i < n; ++i) {
            const double* dzi = dz.row(i);
            double* di = d_in.row(i);
            for (size_t o = 0; o < s.out; ++o) {
                const double g = dzi[o];
                if (g == 0.0) continue;
                const double* wo = wbase + o * s.in;
                for (size_t k = 0; k < s.in; ++k) di[k] += g * wo[k];
            }
        }
        d_act = std::move(d_in);
    }

    out.input_grad = std::move(d_act);
    if (mode == Mode::kTrain) {
        size_t bn_layers = 0;
        for (const auto& s : layout.layers)
            if (s.has_bn) ++bn_layers;
        out.bn_stats.mean.reserve(bn_layers);
        out.bn_stats.var.reserve(bn_layers);
        for (size_t t = 0; t < n_trans; ++t) {
            if (layout.layers[t].has_bn) {
                out.bn_stats.mean.push_back(cache.bn_mean[t]);
                out.bn_stats.var.push_back(cache.bn_var[t]);
            }
        }
    }
    return out;
}

}  // namespace

Matrix forward(const ModelParams& params, const Matrix& inputs, Mode mode,
               uint64_t rng_seed) {
    return run_forward(params, inputs, mode, rng_seed).output;
}

Matrix forward(const ModelParams& params, const Batch& batch, Mode mode,
               uint64_t rng_seed) {
    return forward(params, batch.inputs, mode, rng_seed);
}

double bce_loss(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw InvalidInput("bce_loss: length mismatch");
    if (pred.empty()) throw InvalidInput("bce_loss: empty input");
    Matrix p(1, pred.size()), t(1, target.size());
    p.data = pred;
    t.data = target;
    Matrix scratch;
    return loss_and_grad(LossKind::kBce, p, t, scratch);
}

double l1_loss(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InvalidInput("l1_loss: length mismatch");
    if (a.empty()) throw InvalidInput("l1_loss: empty input");
    Matrix ma(1, a.size()), mb(1, b.size());
    ma.data = a;
    mb.data = b;
    Matrix scratch;
    return loss_and_grad(LossKind::kL1, ma, mb, scratch);
}

LsganLosses lsgan_losses(const std::vector<double>& d_real,
                         const std::vector<double>& d_fake) {
    LsganLosses out;
    double real = 0.0, fake = 0.0, gen = 0.0;
    for (double v : d_real) real += (v - 1.0) * (v - 1.0);
    for (double v : d_fake) {
        fake += v * v;
        gen += (v - 1.0) * (v - 1.0);
    }
    if (!d_real.empty()) real /= static_cast<double>(d_real.size());
    if (!d_fake.empty()) {
        fake /= static_cast<double>(d_fake.size());
        gen /= static_cast<double>(d_fake.size());
    }
    out.disc_loss = real + fake;
    out.gen_loss = gen;
    return out;
}

BackwardOutcome backward(const ModelParams& params, const Batch& batch, LossKind loss,
                         Mode mode, uint64_t rng_seed) {
    return run_backward(params, batch.inputs, mode, rng_seed, &batch.targets, loss,
                        nullptr);
}

BackwardOutcome backward_from(const ModelParams& params, const Matrix& inputs,
                              const Matrix& upstream, Mode mode, uint64_t rng_seed) {
    return run_backward(params, inputs, mode, rng_seed, nullptr, LossKind::kSquare,
                        &upstream);
}

}  // namespace confed::nn
