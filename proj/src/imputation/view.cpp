#include <algorithm>

#include "confed/imputation.hpp"

namespace confed::imputation {

size_t ImputedView::type_offset(DataType t) const {
    size_t off = 0;
    for (size_t k = 0; k < static_cast<size_t>(t); ++k) off += vocab_sizes[k];
    return off;
}

ImputedView build_imputed_view(const silo::Silo& silo, const CganSet& cgans,
                               const ClassifierSet& classifiers, LabelMode label_mode,
                               uint64_t seed, BinarizeMode binarize) {
    const DataType observed = silo::data_type_of(silo.kind);
    const bool use_true_labels =
        label_mode == LabelMode::kClinicTrue && silo.kind == silo::SiloKind::kClinic;

    // resolve required models up front so missing ones reject the call
    std::array<const CganModel*, 3> cgan_for{};
    for (DataType t : cohort::kAllTypes)
        if (t != observed) cgan_for[static_cast<size_t>(t)] = &cgans.get(observed, t);
    const size_t n_diseases = classifiers.n_diseases();
    std::vector<const LabelClassifier*> clf_for;
    if (!use_true_labels)
        for (size_t d = 0; d < n_diseases; ++d)
            clf_for.push_back(&classifiers.get(observed, d));

    ImputedView view;
    view.silo_id = silo.silo_id;
    view.kind = silo.kind;
    view.type_tags = {VectorTag::kImputed, VectorTag::kImputed, VectorTag::kImputed};
    view.type_tags[static_cast<size_t>(observed)] = VectorTag::kObserved;
    view.label_tag = use_true_labels ? LabelTag::kTrue : LabelTag::kInferred;

    // vocab widths: observed from the silo, imputed from the generators
    for (DataType t : cohort::kAllTypes) {
        size_t k = static_cast<size_t>(t);
        if (t == observed) {
            view.vocab_sizes[k] =
                silo.records.empty() ? 0 : silo.records.front().x.vocab_size;
        } else {
            view.vocab_sizes[k] =
                cgan_for[k]->generator.arch.layer_sizes.back();
        }
    }
    size_t total_width = view.vocab_sizes[0] + view.vocab_sizes[1] + view.vocab_sizes[2];

    view.inputs = Matrix(silo.records.size(), total_width);
    view.local_ids.reserve(silo.records.size());
    view.labels.reserve(silo.records.size());

    Rng bern_rng(mix_seed(seed, 0x6265726eULL, static_cast<uint64_t>(silo.silo_id)));
    for (size_t i = 0; i < silo.records.size(); ++i) {
        const silo::SiloRecord& rec = silo.records[i];
        view.local_ids.push_back(rec.local_id);
        double* row = view.inputs.row(i);

        // observed block: the raw silo vector, never modified
        size_t obs_off = view.type_offset(observed);
        for (uint32_t idx : rec.x.set_indices) row[obs_off + idx] = 1.0;

        // imputed blocks
        for (DataType t : cohort::kAllTypes) {
            if (t == observed) continue;
            size_t k = static_cast<size_t>(t);
            uint64_t z_seed =
                mix_seed(seed, static_cast<uint64_t>(silo.silo_id), i, k);
            ImputeResult imp = impute(*cgan_for[k], rec.x, z_seed);
            size_t off = view.type_offset(t);
            if (binarize == BinarizeMode::kThreshold) {
                for (uint32_t idx : imp.binarized.set_indices) row[off + idx] = 1.0;
            } else {
                for (size_t j = 0; j < imp.probabilities.size(); ++j)
                    if (bern_rng.uniform() < imp.probabilities[j]) row[off + j] = 1.0;
            }
        }

        // labels
        std::vector<uint8_t> labels;
        if (use_true_labels) {
            if (!rec.true_labels)
                throw InvalidInput("build_imputed_view: clinic record without labels");
            labels = *rec.true_labels;
        } else {
            Matrix in(1, view.vocab_sizes[static_cast<size_t>(observed)]);
            for (uint32_t idx : rec.x.set_indices) in.at(0, idx) = 1.0;
            for (size_t d = 0; d < n_diseases; ++d) {
                Matrix out = nn::forward(clf_for[d]->model, in, nn::Mode::kEval);
                labels.push_back(out.at(0, 0) > 0.5 ? 1 : 0);
            }
        }
        view.labels.push_back(std::move(labels));
    }
    return view;
}

}  // namespace confed::imputation
