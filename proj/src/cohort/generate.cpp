#include <algorithm>
#include <cmath>
#include <numeric>

#include "confed/cohort.hpp"

namespace confed::cohort {

const char* type_name(DataType t) {
    switch (t) {
        case DataType::kDiag: return "diag";
        case DataType::kMed: return "med";
        case DataType::kLab: return "lab";
    }
    return "?";
}

void CodeVector::validate() const {
    for (size_t i = 0; i < set_indices.size(); ++i) {
        if (set_indices[i] >= vocab_size)
            throw InvalidInput("CodeVector: index out of range");
        if (i > 0 && set_indices[i] <= set_indices[i - 1])
            throw InvalidInput("CodeVector: indices not sorted unique");
    }
}

std::vector<double> CodeVector::to_dense() const {
    std::vector<double> out(vocab_size, 0.0);
    for (uint32_t i : set_indices) out[i] = 1.0;
    return out;
}

bool CodeVector::contains(uint32_t idx) const {
    return std::binary_search(set_indices.begin(), set_indices.end(), idx);
}

void DiseaseSpec::validate() const {
    if (name.empty()) throw InvalidInput("DiseaseSpec: empty name");
    if (target_prevalence <= 0.0 || target_prevalence >= 1.0)
        throw InvalidInput("DiseaseSpec: target_prevalence must be in (0,1)");
    if (noise_level < 0.0) throw InvalidInput("DiseaseSpec: negative noise_level");
    bool any = false;
    for (const auto& codes : signal_codes) any = any || !codes.empty();
    if (!any) throw InvalidInput("DiseaseSpec: needs signal codes for >= 1 data type");
}

std::vector<double> default_region_weights(uint32_t n_regions) {
    std::vector<double> w(n_regions);
    double total = 0.0;
    for (uint32_t r = 0; r < n_regions; ++r) {
        w[r] = std::pow(static_cast<double>(r + 1), -1.2);
        total += w[r];
    }
    for (double& v : w) v /= total;
    return w;
}

std::vector<DiseaseSpec> default_diseases(const std::array<uint32_t, 3>& vocab_sizes) {
    // prevalences from 16824/82143, 8265/82143 and 8044/82143
    const std::array<double, 3> prevalence{0.205, 0.10, 0.098};
    const std::array<std::string, 3> names{"disease_a", "disease_b", "disease_c"};
    std::vector<DiseaseSpec> out;
    for (size_t d = 0; d < 3; ++d) {
        DiseaseSpec spec;
        spec.name = names[d];
        spec.target_prevalence = prevalence[d];
        spec.noise_level = 1.0;
        for (size_t k = 0; k < 3; ++k) {
            // 12-code block per disease, offset past the most popular codes
            uint32_t base = vocab_sizes[k] / 10 + static_cast<uint32_t>(d) * 12;
            for (uint32_t j = 0; j < 12; ++j) {
                uint32_t idx = base + j;
                if (idx < vocab_sizes[k]) spec.signal_codes[k].push_back(idx);
            }
        }
        out.push_back(std::move(spec));
    }
    return out;
}

void CohortConfig::finalize() {
    if (region_weights.empty()) region_weights = default_region_weights(n_regions);
    if (diseases.empty()) diseases = default_diseases(vocab_sizes);
    validate();
}

void CohortConfig::validate() const {
    if (n_regions == 0) throw InvalidInput("CohortConfig: n_regions must be positive");
    for (size_t k = 0; k < 3; ++k) {
        if (vocab_sizes[k] == 0) throw InvalidInput("CohortConfig: zero vocab size");
        if (mean_codes[k] <= 0.0 || mean_codes[k] >= vocab_sizes[k])
            throw InvalidInput("CohortConfig: mean_codes must be in (0, vocab_size)");
    }
    if (region_weights.size() != n_regions)
        throw InvalidInput("CohortConfig: region_weights length != n_regions");
    double sum = 0.0;
    for (double w : region_weights) {
        if (w < 0.0) throw InvalidInput("CohortConfig: negative region weight");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw InvalidInput("CohortConfig: region_weights must sum to 1");
    if (unpaired_fraction < 0.0 || unpaired_fraction >= 1.0)
        throw InvalidInput("CohortConfig: unpaired_fraction must be in [0,1)");
    if (latent_dim == 0) throw InvalidInput("CohortConfig: latent_dim must be positive");
    for (const auto& d : diseases) {
        d.validate();
        for (size_t k = 0; k < 3; ++k)
            for (uint32_t idx : d.signal_codes[k])
                if (idx >= vocab_sizes[k])
                    throw InvalidInput("CohortConfig: signal code out of vocabulary");
    }
}

namespace {

constexpr double kMaxCodeProb = 0.98;
constexpr double kGenericStrength = 1.3;  // latent coupling of ordinary codes
constexpr double kSignalStrength = 2.0;   // latent coupling of disease signal codes

/// Per-code generative parameters for one data type.
struct TypeModel {
    std::vector<double> base_rate;  // popularity pi_j, sums to mean_codes
    std::vector<std::vector<double>> w;  // latent loading per code
    std::vector<double> half_norm;       // 0.5 * |w_j|^2
};

TypeModel build_type_model(const CohortConfig& cfg, size_t k) {
    const uint32_t vocab = cfg.vocab_sizes[k];
    const uint32_t dim = cfg.latent_dim;
    TypeModel model;
    model.base_rate.resize(vocab);
    model.w.assign(vocab, std::vector<double>(dim, 0.0));
    model.half_norm.resize(vocab);

    // power-law popularity normalized to the target mean code count
    double total = 0.0;
    for (uint32_t j = 0; j < vocab; ++j)
        total += std::pow(static_cast<double>(j + 1), -0.5);
    const double scale = cfg.mean_codes[k] / total;

    Rng rng(mix_seed(cfg.seed, kStreamWeights, k));
    for (uint32_t j = 0; j < vocab; ++j) {
        model.base_rate[j] =
            std::min(kMaxCodeProb, scale * std::pow(static_cast<double>(j + 1), -0.5));
        for (uint32_t a = 0; a < dim; ++a)
            model.w[j][a] = rng.normal() * kGenericStrength / std::sqrt(dim);
    }

    // signal codes of disease d load on the shared latent axis d % dim, so
    // the same factor drives them in every data type
    for (size_t d = 0; d < cfg.diseases.size(); ++d) {
        uint32_t axis = static_cast<uint32_t>(d) % dim;
        for (uint32_t idx : cfg.diseases[d].signal_codes[k]) {
            for (uint32_t a = 0; a < dim; ++a) model.w[idx][a] = 0.0;
            model.w[idx][axis] = kSignalStrength;
        }
    }
    for (uint32_t j = 0; j < vocab; ++j) {
        double n2 = 0.0;
        for (double v : model.w[j]) n2 += v * v;
        model.half_norm[j] = 0.5 * n2;
    }
    return model;
}

/// Calibrates the per-disease intercept c by bisection so the realized
/// prevalence matches the target.
double calibrate_intercept(const std::vector<double>& margin, double target) {
    // margin_i + c > 0 decides the label; fraction is nondecreasing in c
    auto frac_at = [&](double c) {
        size_t pos = 0;
        for (double m : margin)
            if (m + c > 0.0) ++pos;
        return static_cast<double>(pos) / static_cast<double>(margin.size());
    };
    double lo = -1e3, hi = 1e3;
    if (frac_at(lo) > target || frac_at(hi) < target)
        throw CalibrationError("prevalence target outside achievable range");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (frac_at(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

}  // namespace

Cohort generate_cohort(const CohortConfig& config_in) {
    CohortConfig cfg = config_in;
    cfg.finalize();

    Cohort cohort;
    cohort.config = cfg;
    const size_t n = cfg.n_people;
    cohort.people.resize(n);
    if (n == 0) return cohort;

    // latent factors
    std::vector<std::vector<double>> latent(n, std::vector<double>(cfg.latent_dim));
    {
        Rng rng(mix_seed(cfg.seed, kStreamLatent));
        for (size_t i = 0; i < n; ++i)
            for (uint32_t a = 0; a < cfg.latent_dim; ++a) latent[i][a] = rng.normal();
    }

    // regions
    {
        Rng rng(mix_seed(cfg.seed, kStreamRegion));
        std::vector<double> cdf(cfg.n_regions);
        std::partial_sum(cfg.region_weights.begin(), cfg.region_weights.end(),
                         cdf.begin());
        for (size_t i = 0; i < n; ++i) {
            double u = rng.uniform();
            uint32_t r = static_cast<uint32_t>(
                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            cohort.people[i].region = std::min(r, cfg.n_regions - 1);
            cohort.people[i].person_id = i + 1;
        }
    }

    // codes for all three types, full (masking happens after labels)
    for (size_t k = 0; k < 3; ++k) {
        TypeModel model = build_type_model(cfg, k);
        Rng rng(mix_seed(cfg.seed, kStreamCodes, k));
        const uint32_t vocab = cfg.vocab_sizes[k];
        for (size_t i = 0; i < n; ++i) {
            CodeVector cv;
            cv.vocab_size = vocab;
            const auto& h = latent[i];
            for (uint32_t j = 0; j < vocab; ++j) {
                double dot = 0.0;
                for (uint32_t a = 0; a < cfg.latent_dim; ++a)
                    dot += model.w[j][a] * h[a];
                double p = std::min(kMaxCodeProb,
                                    model.base_rate[j] *
                                        std::exp(dot - model.half_norm[j]));
                if (rng.uniform() < p) cv.set_indices.push_back(j);
            }
            cohort.people[i].x[k] = std::move(cv);
        }
    }

    // labels per disease: logistic threshold on standardized signal counts
    for (size_t d = 0; d < cfg.diseases.size(); ++d) {
        const DiseaseSpec& spec = cfg.diseases[d];
        std::vector<double> count(n, 0.0);
        for (size_t i = 0; i < n; ++i) {
            double c = 0.0;
            for (size_t k = 0; k < 3; ++k)
                for (uint32_t idx : spec.signal_codes[k])
                    if (cohort.people[i].type(static_cast<DataType>(k)).contains(idx))
                        c += 1.0;
            count[i] = c;
        }
        double mean = std::accumulate(count.begin(), count.end(), 0.0) /
                      static_cast<double>(n);
        double var = 0.0;
        for (double c : count) var += (c - mean) * (c - mean);
        double sd = std::sqrt(var / static_cast<double>(n));

        Rng rng(mix_seed(cfg.seed, kStreamLabels, d));
        std::vector<double> margin(n);
        for (size_t i = 0; i < n; ++i) {
            double z = sd > 0.0 ? (count[i] - mean) / sd : 0.0;
            margin[i] = kSignalGain * z + spec.noise_level * rng.normal();
        }
        double c = calibrate_intercept(margin, spec.target_prevalence);
        size_t positives = 0;
        for (size_t i = 0; i < n; ++i) {
            bool pos = margin[i] + c > 0.0;
            cohort.people[i].labels.push_back(pos ? 1 : 0);
            if (pos) ++positives;
        }
        double emp = static_cast<double>(positives) / static_cast<double>(n);
        double tol = std::max(0.02, 1.5 / static_cast<double>(n));
        if (std::fabs(emp - spec.target_prevalence) > tol)
            throw CalibrationError("prevalence calibration failed for " + spec.name);
    }

    // unpaired masking: drop 1 or 2 data types for a fraction of people
    if (cfg.unpaired_fraction > 0.0) {
        Rng rng(mix_seed(cfg.seed, kStreamMask));
        for (size_t i = 0; i < n; ++i) {
            if (!rng.bernoulli(cfg.unpaired_fraction)) continue;
            std::vector<size_t> types{0, 1, 2};
            rng.shuffle(types);
            size_t n_drop = 1 + rng.uniform_index(2);
            for (size_t t = 0; t < n_drop; ++t)
                cohort.people[i].x[types[t]].reset();
        }
    }
    return cohort;
}

CohortStats cohort_stats(const Cohort& cohort) {
    if (cohort.people.empty()) throw InvalidInput("cohort_stats: empty cohort");
    CohortStats stats;
    stats.n_people = cohort.people.size();
    stats.prevalence.assign(cohort.config.diseases.size(), 0.0);
    stats.region_histogram.assign(cohort.config.n_regions, 0);
    size_t unpaired = 0;
    for (const PersonRecord& p : cohort.people) {
        stats.region_histogram[p.region]++;
        if (!p.fully_paired()) ++unpaired;
        for (size_t k = 0; k < 3; ++k) {
            if (!p.x[k]) continue;
            stats.records_with_type[k]++;
            stats.mean_codes[k] += static_cast<double>(p.x[k]->set_indices.size());
        }
        for (size_t d = 0; d < p.labels.size() && d < stats.prevalence.size(); ++d)
            stats.prevalence[d] += p.labels[d];
    }
    for (size_t k = 0; k < 3; ++k)
        if (stats.records_with_type[k] > 0)
            stats.mean_codes[k] /= static_cast<double>(stats.records_with_type[k]);
    for (double& p : stats.prevalence) p /= static_cast<double>(stats.n_people);
    stats.unpaired_fraction =
        static_cast<double>(unpaired) / static_cast<double>(stats.n_people);
    return stats;
}

std::pair<FeatureView, LabelView> split_windows(const Cohort& cohort) {
    FeatureView features{&cohort};
    LabelView labels;
    labels.person_ids.reserve(cohort.people.size());
    labels.labels.reserve(cohort.people.size());
    for (const PersonRecord& p : cohort.people) {
        if (p.labels.size() != cohort.config.diseases.size())
            throw InvalidInput("split_windows: label arity mismatch");
        labels.person_ids.push_back(p.person_id);
        labels.labels.push_back(p.labels);
    }
    return {features, labels};
}

}  // namespace confed::cohort
