#include <algorithm>
#include <cmath>

#include "confed/imputation.hpp"

namespace confed::imputation {

namespace {

constexpr uint64_t kStreamSplit = 21;
constexpr uint64_t kStreamEpoch = 22;
constexpr uint64_t kStreamInit = 23;
constexpr uint64_t kStreamValNoise = 24;
constexpr uint64_t kStreamValSample = 25;

struct CganData {
    Matrix src;               // all rows with the source type
    Matrix tgt;               // aligned; zero rows where unpaired
    std::vector<uint8_t> paired;
    std::vector<size_t> train_rows;
    std::vector<size_t> val_rows;  // paired only
};

CganData collect_rows(const silo::CentralData& central, DataType src, DataType tgt,
                      double validation_fraction, uint64_t seed) {
    std::vector<const cohort::PersonRecord*> rows;
    for (const auto& p : central.records)
        if (p.has_type(src)) rows.push_back(&p);
    if (rows.empty()) throw InvalidInput("train_cgan: no records with the source type");

    CganData data;
    const uint32_t src_vocab = rows.front()->type(src).vocab_size;
    uint32_t tgt_vocab = 0;
    for (const auto* p : rows)
        if (p->has_type(tgt)) {
            tgt_vocab = p->type(tgt).vocab_size;
            break;
        }
    if (tgt_vocab == 0) {
        // adversarial-only training is impossible without any target rows:
        // the discriminator would have no real examples at all
        throw InvalidInput("train_cgan: no records with the target type");
    }

    data.src = Matrix(rows.size(), src_vocab);
    data.tgt = Matrix(rows.size(), tgt_vocab);
    data.paired.assign(rows.size(), 0);
    for (size_t i = 0; i < rows.size(); ++i) {
        for (uint32_t idx : rows[i]->type(src).set_indices) data.src.at(i, idx) = 1.0;
        if (rows[i]->has_type(tgt)) {
            data.paired[i] = 1;
            for (uint32_t idx : rows[i]->type(tgt).set_indices)
                data.tgt.at(i, idx) = 1.0;
        }
    }

    // paired rows split into train/validation; unpaired rows always train
    std::vector<size_t> paired_rows;
    for (size_t i = 0; i < rows.size(); ++i)
        if (data.paired[i]) paired_rows.push_back(i);
    Rng rng(mix_seed(seed, kStreamSplit));
    rng.shuffle(paired_rows);
    size_t n_val = static_cast<size_t>(
        std::floor(validation_fraction * static_cast<double>(paired_rows.size())));
    for (size_t i = 0; i < paired_rows.size(); ++i)
        (i < n_val ? data.val_rows : data.train_rows).push_back(paired_rows[i]);
    for (size_t i = 0; i < rows.size(); ++i)
        if (!data.paired[i]) data.train_rows.push_back(i);
    std::sort(data.train_rows.begin(), data.train_rows.end());
    std::sort(data.val_rows.begin(), data.val_rows.end());
    return data;
}

Matrix gather_rows(const Matrix& m, const std::vector<size_t>& rows) {
    Matrix out(rows.size(), m.cols);
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(m.row(rows[i]), m.row(rows[i]) + m.cols, out.row(i));
    return out;
}

/// src ++ noise inputs for the generator.
Matrix gen_inputs(const Matrix& src, uint32_t noise_dim, Rng& z_rng) {
    Matrix in(src.rows, src.cols + noise_dim);
    for (size_t i = 0; i < src.rows; ++i) {
        std::copy(src.row(i), src.row(i) + src.cols, in.row(i));
        double* z = in.row(i) + src.cols;
        for (uint32_t a = 0; a < noise_dim; ++a) z[a] = z_rng.normal();
    }
    return in;
}

/// src ++ candidate inputs for the discriminator.
Matrix disc_inputs(const Matrix& src, const Matrix& candidate) {
    Matrix in(src.rows, src.cols + candidate.cols);
    for (size_t i = 0; i < src.rows; ++i) {
        std::copy(src.row(i), src.row(i) + src.cols, in.row(i));
        std::copy(candidate.row(i), candidate.row(i) + candidate.cols,
                  in.row(i) + src.cols);
    }
    return in;
}

/// Expected L1 between the generated data and the held-out real data, where
/// generated data means a Bernoulli draw at the generator's output
/// probabilities (fixed z stream). E|draw(p) - y| = p + y - 2py, computed
/// analytically so epoch selection is noise-free; a better-calibrated
/// conditional model scores strictly lower than any constant predictor.
double paired_validation_l1(const CganModel& model, const CganData& data,
                            uint64_t seed) {
    if (data.val_rows.empty()) return std::numeric_limits<double>::infinity();
    Matrix src = gather_rows(data.src, data.val_rows);
    Matrix tgt = gather_rows(data.tgt, data.val_rows);
    Rng z_rng(mix_seed(seed, kStreamValNoise));
    Matrix gin = gen_inputs(src, model.noise_dim, z_rng);
    Matrix out = nn::forward(model.generator, gin, nn::Mode::kEval);
    double total = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i) {
        double p = out.data[i], y = tgt.data[i];
        total += p + y - 2.0 * p * y;
    }
    return total / static_cast<double>(out.data.size());
}

}  // namespace

CganTrainResult train_cgan(const silo::CentralData& central, DataType src,
                           DataType tgt, const CganHyperparams& hp, uint64_t seed) {
    if (src == tgt) throw InvalidInput("train_cgan: src and tgt must differ");
    if (hp.noise_dim == 0) throw InvalidInput("train_cgan: noise_dim must be positive");
    CganData data = collect_rows(central, src, tgt, hp.validation_fraction, seed);
    const uint32_t src_vocab = static_cast<uint32_t>(data.src.cols);
    const uint32_t tgt_vocab = static_cast<uint32_t>(data.tgt.cols);

    size_t n_paired_train = 0;
    for (size_t row : data.train_rows) n_paired_train += data.paired[row];
    const bool no_paired = n_paired_train == 0 && data.val_rows.empty();

    CganTrainResult result;
    result.warned_no_paired = no_paired;

    // architectures
    std::vector<uint32_t> gen_sizes{src_vocab + hp.noise_dim};
    gen_sizes.insert(gen_sizes.end(), hp.gen_hidden.begin(), hp.gen_hidden.end());
    gen_sizes.push_back(tgt_vocab);
    std::vector<uint32_t> disc_sizes{src_vocab + tgt_vocab};
    disc_sizes.insert(disc_sizes.end(), hp.disc_hidden.begin(), hp.disc_hidden.end());
    disc_sizes.push_back(1);

    CganModel model;
    model.src_type = src;
    model.tgt_type = tgt;
    model.lambda_match = hp.lambda_match;
    model.noise_dim = hp.noise_dim;
    model.generator =
        nn::init_params(nn::make_arch(gen_sizes, nn::OutputActivation::kSigmoid,
                                      hp.batch_norm, hp.dropout),
                        mix_seed(seed, kStreamInit, 0));
    model.discriminator =
        nn::init_params(nn::make_arch(disc_sizes, nn::OutputActivation::kIdentity,
                                      hp.batch_norm, hp.dropout),
                        mix_seed(seed, kStreamInit, 1));

    // damp the noise-block input weights so the conditional signal is not
    // drowned by the 100 noise channels at the start of training
    {
        nn::ParamLayout layout = nn::make_layout(model.generator.arch);
        const nn::LayerSlots& l0 = layout.layers.front();
        for (size_t o = 0; o < l0.out; ++o)
            for (size_t k = src_vocab; k < l0.in; ++k)
                model.generator.values[l0.w + o * l0.in + k] *= hp.noise_init_scale;
    }

    // start the generator at the marginal code rates: output biases at the
    // logit of each code's frequency among paired training rows. Without
    // this the sigmoid saturates toward all-zeros under the L1 sign
    // gradients and the conditional structure never gets learned.
    {
        std::vector<double> rate(tgt_vocab, 0.0);
        size_t paired_rows = 0;
        for (size_t r : data.train_rows) {
            if (!data.paired[r]) continue;
            ++paired_rows;
            for (uint32_t j = 0; j < tgt_vocab; ++j) rate[j] += data.tgt.at(r, j);
        }
        nn::ParamLayout layout = nn::make_layout(model.generator.arch);
        const nn::LayerSlots& out_slots = layout.layers.back();
        for (uint32_t j = 0; j < tgt_vocab; ++j) {
            double p = paired_rows > 0 ? rate[j] / static_cast<double>(paired_rows)
                                       : 0.02;
            p = std::min(0.999, std::max(1e-3, p));
            model.generator.values[out_slots.b + j] = std::log(p / (1.0 - p));
        }
    }

    CganModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    size_t best_epoch = 0;

    std::vector<size_t> order = data.train_rows;
    for (size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        double lr_gen = hp.lr_gen;
        if (epoch * 20 >= hp.epochs * 17)
            lr_gen *= 0.25;
        else if (epoch * 5 >= hp.epochs * 3)
            lr_gen *= 0.5;
        Rng epoch_rng(mix_seed(seed, kStreamEpoch, epoch));
        epoch_rng.shuffle(order);

        for (size_t start = 0; start < order.size(); start += hp.batch_size) {
            size_t count = std::min(hp.batch_size, order.size() - start);
            std::vector<size_t> batch_rows(order.begin() + start,
                                           order.begin() + start + count);
            Matrix src_b = gather_rows(data.src, batch_rows);
            std::vector<size_t> paired_local;
            for (size_t i = 0; i < batch_rows.size(); ++i)
                if (data.paired[batch_rows[i]]) paired_local.push_back(i);

            const uint64_t step_seed = epoch_rng.next_u64();

            // --- discriminator step ---
            {
                Rng z_rng(mix_seed(step_seed, 1));
                Matrix gin = gen_inputs(src_b, hp.noise_dim, z_rng);
                Matrix fake = nn::forward(model.generator, gin, nn::Mode::kTrain,
                                          mix_seed(step_seed, 2));
                Rng u_rng(mix_seed(step_seed, 8));
                for (double& p : fake.data) p = u_rng.uniform() < p ? 1.0 : 0.0;
                Matrix fake_in = disc_inputs(src_b, fake);
                Batch fake_batch{fake_in, Matrix(count, 1, 0.0)};
                auto fake_back = nn::backward(model.discriminator, fake_batch,
                                              nn::LossKind::kSquare, nn::Mode::kTrain,
                                              mix_seed(step_seed, 3));
                std::vector<double> grad = fake_back.param_grad;
                nn::apply_bn_update(model.discriminator, fake_back.bn_stats);
                if (!paired_local.empty()) {
                    Matrix src_p(paired_local.size(), src_vocab);
                    Matrix tgt_p(paired_local.size(), tgt_vocab);
                    for (size_t i = 0; i < paired_local.size(); ++i) {
                        size_t r = batch_rows[paired_local[i]];
                        std::copy(data.src.row(r), data.src.row(r) + src_vocab,
                                  src_p.row(i));
                        std::copy(data.tgt.row(r), data.tgt.row(r) + tgt_vocab,
                                  tgt_p.row(i));
                    }
                    Matrix real_in = disc_inputs(src_p, tgt_p);
                    Batch real_batch{real_in, Matrix(paired_local.size(), 1, 1.0)};
                    auto real_back = nn::backward(model.discriminator, real_batch,
                                                  nn::LossKind::kSquare,
                                                  nn::Mode::kTrain,
                                                  mix_seed(step_seed, 4));
                    for (size_t i = 0; i < grad.size(); ++i)
                        grad[i] += real_back.param_grad[i];
                    nn::apply_bn_update(model.discriminator, real_back.bn_stats);
                }
                model.discriminator = nn::sgd_step(model.discriminator, grad, hp.lr_disc);
            }

            // --- generator step ---
            {
                const uint64_t g_seed = mix_seed(step_seed, 5);
                Rng z_rng(mix_seed(step_seed, 6));
                Matrix gin = gen_inputs(src_b, hp.noise_dim, z_rng);
                Matrix fake = nn::forward(model.generator, gin, nn::Mode::kTrain, g_seed);
                Matrix hard(count, tgt_vocab);
                Rng u_rng(mix_seed(step_seed, 9));
                for (size_t i = 0; i < fake.data.size(); ++i)
                    hard.data[i] = u_rng.uniform() < fake.data[i] ? 1.0 : 0.0;
                Matrix fake_in = disc_inputs(src_b, hard);

                // adversarial upstream through the discriminator
                Matrix scores = nn::forward(model.discriminator, fake_in,
                                            nn::Mode::kTrain, mix_seed(step_seed, 7));
                Matrix up_scores(count, 1);
                for (size_t i = 0; i < count; ++i)
                    up_scores.at(i, 0) =
                        2.0 * (scores.at(i, 0) - 1.0) / static_cast<double>(count);
                auto disc_back =
                    nn::backward_from(model.discriminator, fake_in, up_scores,
                                      nn::Mode::kTrain, mix_seed(step_seed, 7));

                Matrix upstream(count, tgt_vocab);
                for (size_t i = 0; i < count; ++i)
                    std::copy(disc_back.input_grad.row(i) + src_vocab,
                              disc_back.input_grad.row(i) + src_vocab + tgt_vocab,
                              upstream.row(i));

                // L1 matching on paired rows only, straight-through the
                // Bernoulli draw: the push up on missed real codes balances
                // the push down on sampled false codes exactly when the
                // output probability equals the conditional code rate, so
                // plain SGD converges to calibrated conditionals instead of
                // the all-zeros collapse that probability-space L1 causes
                // on sparse targets.
                if (!paired_local.empty() && hp.lambda_match > 0.0) {
                    double denom = static_cast<double>(paired_local.size());
                    for (size_t i : paired_local) {
                        size_t r = batch_rows[i];
                        for (uint32_t j = 0; j < tgt_vocab; ++j) {
                            double g = hard.at(i, j) - data.tgt.at(r, j);
                            upstream.at(i, j) += hp.lambda_match * g / denom;
                        }
                    }
                }

                auto gen_back = nn::backward_from(model.generator, gin, upstream,
                                                  nn::Mode::kTrain, g_seed);
                nn::apply_bn_update(model.generator, gen_back.bn_stats);
                model.generator =
                    nn::sgd_step(model.generator, gen_back.param_grad, lr_gen);
            }
        }

        double val = paired_validation_l1(model, data, seed);
        result.val_l1_history.push_back(val);
        // ties break toward the later (more trained) epoch
        if (val <= best_val) {
            best_val = val;
            best = model;
            best_epoch = epoch;
        }
    }

    if (std::isinf(best_val)) {
        // no paired validation rows: fall back to the final model
        best = model;
        best_epoch = hp.epochs > 0 ? hp.epochs - 1 : 0;
    }
    result.model = best;
    result.best_val_l1 = best_val;
    result.best_epoch = best_epoch;
    return result;
}

ImputeResult impute(const CganModel& cgan, const cohort::CodeVector& x_src,
                    uint64_t z_seed) {
    const uint32_t src_vocab =
        cgan.generator.arch.layer_sizes.front() - cgan.noise_dim;
    if (x_src.vocab_size != src_vocab)
        throw InvalidInput("impute: source vector width does not match the generator");
    Matrix in(1, src_vocab + cgan.noise_dim);
    for (uint32_t idx : x_src.set_indices) in.at(0, idx) = 1.0;
    Rng z_rng(z_seed);
    for (uint32_t a = 0; a < cgan.noise_dim; ++a)
        in.at(0, src_vocab + a) = z_rng.normal();
    Matrix out = nn::forward(cgan.generator, in, nn::Mode::kEval);

    ImputeResult result;
    result.probabilities = out.data;
    result.binarized.vocab_size = static_cast<uint32_t>(out.cols);
    for (uint32_t j = 0; j < out.cols; ++j)
        if (out.data[j] > 0.5) result.binarized.set_indices.push_back(j);
    return result;
}

}  // namespace confed::imputation
