#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "confed/common.hpp"

namespace confed::cohort {

enum class DataType : uint8_t { kDiag = 0, kMed = 1, kLab = 2 };
constexpr std::array<DataType, 3> kAllTypes{DataType::kDiag, DataType::kMed,
                                            DataType::kLab};
const char* type_name(DataType t);

/// Sparse multi-hot vector over one code vocabulary.
struct CodeVector {
    uint32_t vocab_size = 0;
    std::vector<uint32_t> set_indices;  // sorted, unique, < vocab_size

    void validate() const;
    std::vector<double> to_dense() const;
    bool contains(uint32_t idx) const;
};

struct DiseaseSpec {
    std::string name;
    double target_prevalence = 0.1;
    std::array<std::vector<uint32_t>, 3> signal_codes;  // per data type
    double noise_level = 1.0;

    void validate() const;
};

struct CohortConfig {
    uint64_t n_people = 10000;
    std::array<uint32_t, 3> vocab_sizes{500, 300, 200};
    std::array<double, 3> mean_codes{13.6, 6.9, 7.4};
    uint32_t n_regions = 34;
    std::vector<double> region_weights;  // empty -> default_region_weights(n_regions)
    std::vector<DiseaseSpec> diseases;   // empty -> default_diseases(vocab_sizes)
    double unpaired_fraction = 0.2;
    uint32_t latent_dim = 8;
    uint64_t seed = 0;

    /// Fills region_weights / diseases defaults and checks invariants.
    void finalize();
    void validate() const;
};

/// Heavy-tailed default: weight of region r proportional to (r+1)^-1.2,
/// one dominant region down to sub-percent tails.
std::vector<double> default_region_weights(uint32_t n_regions);

/// Three diseases with prevalences 0.205, 0.10, 0.098 and per-type signal
/// code blocks placed in the mid-popularity range of each vocabulary.
std::vector<DiseaseSpec> default_diseases(const std::array<uint32_t, 3>& vocab_sizes);

struct PersonRecord {
    uint64_t person_id = 0;
    uint32_t region = 0;
    std::array<std::optional<CodeVector>, 3> x;  // indexed by DataType
    std::vector<uint8_t> labels;                 // one bit per disease

    bool has_type(DataType t) const { return x[static_cast<size_t>(t)].has_value(); }
    const CodeVector& type(DataType t) const { return *x[static_cast<size_t>(t)]; }
    bool fully_paired() const { return x[0] && x[1] && x[2]; }
};

struct Cohort {
    CohortConfig config;
    std::vector<PersonRecord> people;
};

// Stream tags for seed derivation. The label stream for disease d is
// mix_seed(seed, kStreamLabels, d) and draws one normal per person in
// cohort order; tests reimplement the draw against these constants.
inline constexpr uint64_t kStreamLatent = 1;
inline constexpr uint64_t kStreamCodes = 2;
inline constexpr uint64_t kStreamRegion = 3;
inline constexpr uint64_t kStreamLabels = 4;
inline constexpr uint64_t kStreamMask = 5;
inline constexpr uint64_t kStreamWeights = 6;

/// Gain applied to the standardized signal-code count in the label model:
/// label = 1 iff kSignalGain * zscore(count) + noise_level * eps + c > 0,
/// with c calibrated per disease to the target prevalence.
inline constexpr double kSignalGain = 2.0;

/// Thrown when target prevalence cannot be met within tolerance.
class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Seeded synthetic cohort: latent-factor correlated code draws across the
/// three data types, heavy-tailed regions, optional unpaired-type masking
/// and calibrated disease labels.
Cohort generate_cohort(const CohortConfig& config);

struct CohortStats {
    size_t n_people = 0;
    std::array<double, 3> mean_codes{};         // mean over records with the type
    std::array<size_t, 3> records_with_type{};  // denominator per type
    std::vector<double> prevalence;             // per disease
    std::vector<size_t> region_histogram;
    double unpaired_fraction = 0.0;  // share of people missing >= 1 type
};

CohortStats cohort_stats(const Cohort& cohort);

/// Observation-window view (features, no labels) and follow-up-window view
/// (labels only); the generator emits the two views with disjoint provenance.
struct FeatureView {
    const Cohort* cohort = nullptr;
    // feature access goes through records' x only
};
struct LabelView {
    std::vector<uint64_t> person_ids;
    std::vector<std::vector<uint8_t>> labels;
};
std::pair<FeatureView, LabelView> split_windows(const Cohort& cohort);

/// Line-delimited plain-text export; see README for the field order.
void save_cohort(const Cohort& cohort, const std::string& path);
Cohort load_cohort(const std::string& path);
std::string cohort_to_text(const Cohort& cohort);
Cohort cohort_from_text(const std::string& text);

}  // namespace confed::cohort
