#include <algorithm>
#include <unordered_set>

#include "confed/silo.hpp"

namespace confed::silo {

namespace {
constexpr uint64_t kStreamShuffle = 11;
constexpr uint64_t kStreamLocalIds = 12;
}  // namespace

cohort::DataType data_type_of(SiloKind kind) {
    return static_cast<cohort::DataType>(static_cast<uint8_t>(kind));
}

SiloKind kind_for(cohort::DataType type) {
    return static_cast<SiloKind>(static_cast<uint8_t>(type));
}

const char* kind_name(SiloKind kind) {
    switch (kind) {
        case SiloKind::kClinic: return "clinic";
        case SiloKind::kPharmacy: return "pharmacy";
        case SiloKind::kLab: return "lab";
    }
    return "?";
}

size_t SiloNetwork::total_beneficiaries() const {
    size_t n = 0;
    for (const Silo& s : silos) n += s.records.size();
    return n;
}

namespace {

/// Cohort row indices per silo in final record order; shared by partition
/// and silo_membership so the derivation stays in one place.
std::vector<std::vector<size_t>> membership_impl(const cohort::Cohort& cohort,
                                                 uint32_t central_region,
                                                 uint64_t seed) {
    const uint32_t n_regions = cohort.config.n_regions;
    std::vector<std::vector<size_t>> out;
    int32_t silo_id = 0;
    for (uint32_t r = 0; r < n_regions; ++r) {
        if (r == central_region) continue;
        for (SiloKind kind : kAllKinds) {
            std::vector<size_t> rows;
            cohort::DataType type = data_type_of(kind);
            for (size_t i = 0; i < cohort.people.size(); ++i) {
                const auto& p = cohort.people[i];
                if (p.region == r && p.has_type(type)) rows.push_back(i);
            }
            Rng rng(mix_seed(seed, kStreamShuffle, static_cast<uint64_t>(silo_id)));
            rng.shuffle(rows);
            out.push_back(std::move(rows));
            ++silo_id;
        }
    }
    return out;
}

/// Pseudorandom silo-scoped ids: the high bits carry the silo id (so id sets
/// are disjoint across silos by construction), the low 48 bits are a keyed
/// hash of the person id. Deterministic rehash on the rare truncation clash.
std::vector<uint64_t> assign_local_ids(uint64_t seed, int32_t silo_id,
                                       const std::vector<size_t>& rows,
                                       const cohort::Cohort& cohort) {
    for (uint64_t salt = 0;; ++salt) {
        uint64_t key = mix_seed(seed, kStreamLocalIds,
                                static_cast<uint64_t>(silo_id), salt);
        std::vector<uint64_t> ids;
        ids.reserve(rows.size());
        std::unordered_set<uint64_t> seen;
        bool clash = false;
        for (size_t row : rows) {
            uint64_t h = splitmix64(key ^ cohort.people[row].person_id);
            uint64_t id = (static_cast<uint64_t>(static_cast<uint32_t>(silo_id)) << 48) |
                          (h & 0xFFFFFFFFFFFFULL);
            if (!seen.insert(id).second) {
                clash = true;
                break;
            }
            ids.push_back(id);
        }
        if (!clash) return ids;
    }
}

}  // namespace

SiloNetwork partition(const cohort::Cohort& cohort, uint32_t central_region,
                      uint64_t seed) {
    if (central_region >= cohort.config.n_regions)
        throw InvalidInput("partition: central_region does not exist");

    SiloNetwork net;
    net.central_region = central_region;
    net.partition_seed = seed;
    net.vocab_sizes = cohort.config.vocab_sizes;
    net.n_diseases = cohort.config.diseases.size();

    for (const auto& p : cohort.people)
        if (p.region == central_region) net.central.records.push_back(p);

    auto membership = membership_impl(cohort, central_region, seed);
    int32_t silo_id = 0;
    size_t m_idx = 0;
    for (uint32_t r = 0; r < cohort.config.n_regions; ++r) {
        if (r == central_region) continue;
        for (SiloKind kind : kAllKinds) {
            const std::vector<size_t>& rows = membership[m_idx++];
            Silo silo;
            silo.silo_id = silo_id;
            silo.kind = kind;
            silo.region = r;
            auto ids = assign_local_ids(seed, silo_id, rows, cohort);
            cohort::DataType type = data_type_of(kind);
            silo.records.reserve(rows.size());
            for (size_t j = 0; j < rows.size(); ++j) {
                SiloRecord rec;
                rec.local_id = ids[j];
                rec.x = cohort.people[rows[j]].type(type);
                if (kind == SiloKind::kClinic)
                    rec.true_labels = cohort.people[rows[j]].labels;
                silo.records.push_back(std::move(rec));
            }
            net.silos.push_back(std::move(silo));
            ++silo_id;
        }
    }
    return net;
}

std::vector<std::vector<size_t>> silo_membership(const cohort::Cohort& cohort,
                                                 const SiloNetwork& network) {
    auto membership =
        membership_impl(cohort, network.central_region, network.partition_seed);
    if (membership.size() != network.silos.size())
        throw InvalidInput("silo_membership: cohort does not match network");
    for (size_t s = 0; s < membership.size(); ++s)
        if (membership[s].size() != network.silos[s].records.size())
            throw InvalidInput("silo_membership: cohort does not match network");
    return membership;
}

std::vector<Batch> silo_batches(const Silo& silo,
                                const std::vector<uint64_t>& view_local_ids,
                                const Matrix& inputs, const Matrix& targets,
                                size_t batch_size, uint64_t seed) {
    if (batch_size == 0) throw InvalidInput("silo_batches: batch_size must be positive");
    if (view_local_ids.size() != silo.records.size() ||
        inputs.rows != silo.records.size() || targets.rows != silo.records.size())
        throw InvalidInput("silo_batches: view is not aligned with the silo");
    for (size_t i = 0; i < view_local_ids.size(); ++i)
        if (view_local_ids[i] != silo.records[i].local_id)
            throw InvalidInput("silo_batches: view is not aligned with the silo");

    std::vector<size_t> order(silo.records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<Batch> batches;
    for (size_t start = 0; start < order.size(); start += batch_size) {
        size_t count = std::min(batch_size, order.size() - start);
        Matrix in(count, inputs.cols), tgt(count, targets.cols);
        for (size_t i = 0; i < count; ++i) {
            size_t row = order[start + i];
            std::copy(inputs.row(row), inputs.row(row) + inputs.cols, in.row(i));
            std::copy(targets.row(row), targets.row(row) + targets.cols, tgt.row(i));
        }
        batches.emplace_back(std::move(in), std::move(tgt));
    }
    return batches;
}

}  // namespace confed::silo
