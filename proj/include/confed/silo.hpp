#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "confed/cohort.hpp"
#include "confed/matrix.hpp"

namespace confed::silo {

/// Clinics hold diagnoses, pharmacies medication claims, labs test codes.
enum class SiloKind : uint8_t { kClinic = 0, kPharmacy = 1, kLab = 2 };

constexpr std::array<SiloKind, 3> kAllKinds{SiloKind::kClinic, SiloKind::kPharmacy,
                                            SiloKind::kLab};

cohort::DataType data_type_of(SiloKind kind);
SiloKind kind_for(cohort::DataType type);
const char* kind_name(SiloKind kind);

/// One record inside a silo: a silo-scoped opaque id and the silo's single
/// data type. True outcome labels exist only in clinic silos.
struct SiloRecord {
    uint64_t local_id = 0;
    cohort::CodeVector x;
    std::optional<std::vector<uint8_t>> true_labels;
};

struct Silo {
    int32_t silo_id = 0;
    SiloKind kind = SiloKind::kClinic;
    uint32_t region = 0;
    std::vector<SiloRecord> records;

    size_t size() const { return records.size(); }
};

/// The one institution with fully connected rows (all types, matchable ids).
struct CentralData {
    std::vector<cohort::PersonRecord> records;
};

struct SiloNetwork {
    CentralData central;
    std::vector<Silo> silos;
    uint32_t central_region = 0;
    uint64_t partition_seed = 0;
    std::array<uint32_t, 3> vocab_sizes{};
    size_t n_diseases = 0;

    size_t silo_count() const { return silos.size(); }
    /// Total beneficiaries across silos (the central analyzer is excluded).
    size_t total_beneficiaries() const;
};

/// Splits a cohort into one central analyzer (all records of central_region)
/// plus one clinic, pharmacy and lab silo per remaining region. The same
/// person's type-views receive independent local ids with no stored linkage;
/// record order is shuffled per silo.
SiloNetwork partition(const cohort::Cohort& cohort, uint32_t central_region,
                      uint64_t seed);

/// Simulation-harness device: re-derives, from the cohort and the network's
/// partition seed, which cohort row each silo record came from (in record
/// order). The network itself stores no such linkage.
std::vector<std::vector<size_t>> silo_membership(const cohort::Cohort& cohort,
                                                 const SiloNetwork& network);

/// The only message silos may emit: serialized model parameters.
struct ParamMessage {
    uint32_t round = 0;
    int32_t sender = kCentralSender;  // silo_id, or kCentralSender
    uint16_t kind_tag = 0;
    std::vector<uint8_t> payload;

    static constexpr int32_t kCentralSender = -1;

    std::vector<uint8_t> to_bytes() const;  // 16-byte header + payload
    static ParamMessage from_bytes(const std::vector<uint8_t>& bytes);
};

/// Append-only record of everything that crossed a silo boundary.
struct ExchangeLog {
    std::vector<ParamMessage> messages;
    void record(ParamMessage msg) { messages.push_back(std::move(msg)); }
};

struct AuditIssue {
    std::string rule;    // "type-purity" | "params-only-export" | "identity-separation"
    int32_t silo_id = 0;
    std::string detail;
};

struct AuditReport {
    bool passed = true;
    std::vector<AuditIssue> issues;
    size_t silos_checked = 0;
    size_t messages_checked = 0;

    std::string to_text() const;
    std::string to_json_lines() const;
};

/// Verifies (a) every silo holds only its own data type, (b) every exchanged
/// message parses as model parameters and nothing else, (c) local ids admit
/// no cross-silo join (pairwise disjoint id sets; the API stores no mapping).
AuditReport isolation_audit(const SiloNetwork& network,
                            const ExchangeLog* log = nullptr);

/// Seeded shuffled minibatches over a dense view aligned with the silo's
/// records. The union of batch rows covers each silo row exactly once.
std::vector<Batch> silo_batches(const Silo& silo,
                                const std::vector<uint64_t>& view_local_ids,
                                const Matrix& inputs, const Matrix& targets,
                                size_t batch_size, uint64_t seed);

}  // namespace confed::silo
