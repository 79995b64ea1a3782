#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "confed/cohort.hpp"
#include "confed/nn.hpp"
#include "confed/silo.hpp"

namespace confed::imputation {

using cohort::DataType;

/// Thrown when classifier training data contains a single class.
class DegenerateLabels : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

struct CganHyperparams {
    std::vector<uint32_t> gen_hidden{64};
    std::vector<uint32_t> disc_hidden{32};
    uint32_t noise_dim = 100;  // Gaussian noise vector length
    double lambda_match = 10.0;
    double lr_gen = 0.3;  // halved at 60% and quartered at 85% of the epochs
    double lr_disc = 0.05;
    size_t batch_size = 128;
    size_t epochs = 50;
    double validation_fraction = 0.2;
    double noise_init_scale = 0.3;   // initial damping of noise-block weights
    bool batch_norm = true;
    double dropout = 0.1;
};

/// Directed conditional generator src -> tgt with its discriminator.
struct CganModel {
    DataType src_type = DataType::kDiag;
    DataType tgt_type = DataType::kMed;
    nn::ModelParams generator;      // input src ++ noise, sigmoid output over tgt
    nn::ModelParams discriminator;  // input src ++ candidate tgt, scalar score
    double lambda_match = 10.0;
    uint32_t noise_dim = 100;
};

struct CganTrainResult {
    CganModel model;                    // parameters from the best epoch
    std::vector<double> val_l1_history; // paired-validation L1 per epoch
    double best_val_l1 = 0.0;
    size_t best_epoch = 0;
    bool warned_no_paired = false;      // adversarial-only fallback was taken
};

/// Step 1: alternating LSGAN training on central records. Paired rows
/// contribute the L1 matching term; rows lacking the target type contribute
/// adversarial terms only. Deterministic per seed.
CganTrainResult train_cgan(const silo::CentralData& central, DataType src,
                           DataType tgt, const CganHyperparams& hp, uint64_t seed);

struct ImputeResult {
    std::vector<double> probabilities;
    cohort::CodeVector binarized;  // probability > 0.5 (0.5 itself maps to 0)
};

/// Step 2 primitive: draw z ~ N(0,1)^noise_dim from z_seed, run the
/// generator in eval mode.
ImputeResult impute(const CganModel& cgan, const cohort::CodeVector& x_src,
                    uint64_t z_seed);

struct ClassifierHyperparams {
    std::vector<uint32_t> hidden{32};
    double lr = 0.1;
    size_t batch_size = 128;
    size_t epochs = 50;
    size_t patience = 5;
    double validation_fraction = 0.2;
};

struct LabelClassifier {
    DataType src_type = DataType::kDiag;
    size_t disease = 0;
    nn::ModelParams model;  // sigmoid output of width 1
};

/// Per-(type, disease) label model trained on central records with the type
/// present; early stops on a 20% held-out central split.
LabelClassifier train_label_classifier(const silo::CentralData& central,
                                       DataType src, size_t disease,
                                       const ClassifierHyperparams& hp,
                                       uint64_t seed);

/// The six directed models, indexed [src][tgt].
struct CganSet {
    std::array<std::array<std::optional<CganModel>, 3>, 3> models;

    const CganModel& get(DataType src, DataType tgt) const;
    void put(CganModel model);
};

/// Classifiers indexed [type][disease].
struct ClassifierSet {
    std::vector<std::array<std::optional<LabelClassifier>, 3>> by_disease;

    const LabelClassifier& get(DataType type, size_t disease) const;
    void put(LabelClassifier clf);
    size_t n_diseases() const { return by_disease.size(); }
};

enum class LabelMode : uint8_t {
    kClinicTrue = 0,          // clinics keep true labels, others infer
    kInferredEverywhere = 1,  // every silo infers labels from its own type
};

enum class BinarizeMode : uint8_t { kThreshold = 0, kBernoulli = 1 };

enum class VectorTag : uint8_t { kObserved = 0, kImputed = 1 };
enum class LabelTag : uint8_t { kTrue = 0, kInferred = 1 };

/// A silo's records completed to all three data types. Inputs are the dense
/// concatenation diag ++ med ++ lab aligned with the silo's record order;
/// the observed block equals the silo's raw vectors exactly.
struct ImputedView {
    int32_t silo_id = 0;
    silo::SiloKind kind = silo::SiloKind::kClinic;
    std::vector<uint64_t> local_ids;
    Matrix inputs;
    std::array<uint32_t, 3> vocab_sizes{};
    std::array<VectorTag, 3> type_tags{};
    std::vector<std::vector<uint8_t>> labels;  // [record][disease]
    LabelTag label_tag = LabelTag::kInferred;

    size_t type_offset(DataType t) const;
    size_t n_records() const { return local_ids.size(); }
};

/// Step 2: complete every record of a silo with the two missing data types
/// and attach labels per label_mode.
ImputedView build_imputed_view(const silo::Silo& silo, const CganSet& cgans,
                               const ClassifierSet& classifiers, LabelMode label_mode,
                               uint64_t seed,
                               BinarizeMode binarize = BinarizeMode::kThreshold);

/// Model files: 16-byte role header (magic "CFR1", role, src, tgt, disease)
/// followed by the nn-core parameter file.
enum class ModelRole : uint8_t { kGenerator = 0, kDiscriminator = 1, kClassifier = 2 };

std::vector<uint8_t> serialize_model_file(ModelRole role, DataType src, DataType tgt,
                                          int32_t disease,
                                          const nn::ModelParams& params);

struct ModelFile {
    ModelRole role;
    DataType src;
    DataType tgt;
    int32_t disease;
    nn::ModelParams params;
};
ModelFile deserialize_model_file(const std::vector<uint8_t>& bytes);

}  // namespace confed::imputation
