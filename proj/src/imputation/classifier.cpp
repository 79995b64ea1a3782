#include <algorithm>
#include <cmath>
#include <limits>

#include "confed/imputation.hpp"

namespace confed::imputation {

namespace {
constexpr uint64_t kStreamSplit = 31;
constexpr uint64_t kStreamEpoch = 32;
constexpr uint64_t kStreamInit = 33;
}  // namespace

LabelClassifier train_label_classifier(const silo::CentralData& central, DataType src,
                                       size_t disease, const ClassifierHyperparams& hp,
                                       uint64_t seed) {
    std::vector<const cohort::PersonRecord*> rows;
    for (const auto& p : central.records)
        if (p.has_type(src)) {
            if (disease >= p.labels.size())
                throw InvalidInput("train_label_classifier: disease index out of range");
            rows.push_back(&p);
        }
    if (rows.empty())
        throw InvalidInput("train_label_classifier: no records with the source type");

    size_t positives = 0;
    for (const auto* p : rows) positives += p->labels[disease];
    if (positives == 0 || positives == rows.size())
        throw DegenerateLabels("train_label_classifier: single-class labels");

    const uint32_t vocab = rows.front()->type(src).vocab_size;
    Matrix inputs(rows.size(), vocab);
    Matrix targets(rows.size(), 1);
    for (size_t i = 0; i < rows.size(); ++i) {
        for (uint32_t idx : rows[i]->type(src).set_indices) inputs.at(i, idx) = 1.0;
        targets.at(i, 0) = rows[i]->labels[disease] ? 1.0 : 0.0;
    }

    // 20% held-out split for early stopping
    std::vector<size_t> order(rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(mix_seed(seed, kStreamSplit));
    split_rng.shuffle(order);
    size_t n_val = static_cast<size_t>(
        std::floor(hp.validation_fraction * static_cast<double>(order.size())));
    std::vector<size_t> val_rows(order.begin(), order.begin() + n_val);
    std::vector<size_t> train_rows(order.begin() + n_val, order.end());
    if (train_rows.empty())
        throw InvalidInput("train_label_classifier: empty training split");

    std::vector<uint32_t> sizes{vocab};
    sizes.insert(sizes.end(), hp.hidden.begin(), hp.hidden.end());
    sizes.push_back(1);
    nn::ModelParams params =
        nn::init_params(nn::make_arch(sizes), mix_seed(seed, kStreamInit));

    auto validation_loss = [&](const nn::ModelParams& p) {
        if (val_rows.empty()) return std::numeric_limits<double>::infinity();
        std::vector<double> pred, truth;
        Matrix in(val_rows.size(), vocab);
        for (size_t i = 0; i < val_rows.size(); ++i)
            std::copy(inputs.row(val_rows[i]), inputs.row(val_rows[i]) + vocab,
                      in.row(i));
        Matrix out = nn::forward(p, in, nn::Mode::kEval);
        for (size_t i = 0; i < val_rows.size(); ++i) {
            pred.push_back(out.at(i, 0));
            truth.push_back(targets.at(val_rows[i], 0));
        }
        return nn::bce_loss(pred, truth);
    };

    nn::ModelParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    size_t since_best = 0;
    for (size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        Rng epoch_rng(mix_seed(seed, kStreamEpoch, epoch));
        epoch_rng.shuffle(train_rows);
        for (size_t start = 0; start < train_rows.size(); start += hp.batch_size) {
            size_t count = std::min(hp.batch_size, train_rows.size() - start);
            Matrix in(count, vocab), tgt(count, 1);
            for (size_t i = 0; i < count; ++i) {
                size_t r = train_rows[start + i];
                std::copy(inputs.row(r), inputs.row(r) + vocab, in.row(i));
                tgt.at(i, 0) = targets.at(r, 0);
            }
            auto back = nn::backward(params, Batch{std::move(in), std::move(tgt)},
                                     nn::LossKind::kBce, nn::Mode::kTrain,
                                     epoch_rng.next_u64());
            nn::apply_bn_update(params, back.bn_stats);
            params = nn::sgd_step(params, back.param_grad, hp.lr);
        }
        double val = validation_loss(params);
        if (val < best_val) {
            best_val = val;
            best = params;
            since_best = 0;
        } else if (++since_best >= hp.patience) {
            break;
        }
    }
    if (std::isinf(best_val)) best = params;

    LabelClassifier clf;
    clf.src_type = src;
    clf.disease = disease;
    clf.model = std::move(best);
    return clf;
}

const CganModel& CganSet::get(DataType src, DataType tgt) const {
    const auto& slot = models[static_cast<size_t>(src)][static_cast<size_t>(tgt)];
    if (!slot)
        throw InvalidInput(std::string("missing cGAN ") + cohort::type_name(src) +
                           "->" + cohort::type_name(tgt));
    return *slot;
}

void CganSet::put(CganModel model) {
    models[static_cast<size_t>(model.src_type)][static_cast<size_t>(model.tgt_type)] =
        std::move(model);
}

const LabelClassifier& ClassifierSet::get(DataType type, size_t disease) const {
    if (disease >= by_disease.size())
        throw InvalidInput("missing label classifier: disease out of range");
    const auto& slot = by_disease[disease][static_cast<size_t>(type)];
    if (!slot)
        throw InvalidInput(std::string("missing label classifier for ") +
                           cohort::type_name(type));
    return *slot;
}

void ClassifierSet::put(LabelClassifier clf) {
    if (clf.disease >= by_disease.size()) by_disease.resize(clf.disease + 1);
    by_disease[clf.disease][static_cast<size_t>(clf.src_type)] = std::move(clf);
}

}  // namespace confed::imputation
