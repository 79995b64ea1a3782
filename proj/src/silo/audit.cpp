#include <sstream>
#include <unordered_set>

#include "confed/nn.hpp"
#include "confed/silo.hpp"
#include "json.hpp"

namespace confed::silo {

AuditReport isolation_audit(const SiloNetwork& network, const ExchangeLog* log) {
    AuditReport report;

    // (a) type purity: every record carries exactly the silo's data type
    for (const Silo& s : network.silos) {
        ++report.silos_checked;
        uint32_t expect = network.vocab_sizes[static_cast<size_t>(data_type_of(s.kind))];
        for (const SiloRecord& rec : s.records) {
            if (rec.x.vocab_size != expect) {
                report.issues.push_back(
                    {"type-purity", s.silo_id,
                     "record vector length " + std::to_string(rec.x.vocab_size) +
                         " != " + kind_name(s.kind) + " vocabulary " +
                         std::to_string(expect)});
                break;
            }
            bool bad = false;
            try {
                rec.x.validate();
            } catch (const InvalidInput&) {
                bad = true;
            }
            if (bad) {
                report.issues.push_back(
                    {"type-purity", s.silo_id, "malformed code vector"});
                break;
            }
            if (s.kind != SiloKind::kClinic && rec.true_labels.has_value()) {
                report.issues.push_back({"type-purity", s.silo_id,
                                         "non-clinic silo carries outcome labels"});
                break;
            }
        }
    }

    // (b) exports: every message payload must parse as model parameters
    if (log != nullptr) {
        for (const ParamMessage& msg : log->messages) {
            ++report.messages_checked;
            try {
                nn::deserialize_params(msg.payload);
            } catch (const ParseError& e) {
                report.issues.push_back({"params-only-export", msg.sender,
                                         std::string("payload is not a parameter "
                                                     "file: ") +
                                             e.what()});
            }
        }
    }

    // (c) identity separation: local id sets are pairwise disjoint and unique;
    // the network type stores no person-id mapping for silo records, so there
    // is no join surface to exercise
    {
        std::unordered_set<uint64_t> seen;
        for (const Silo& s : network.silos) {
            std::unordered_set<uint64_t> mine;
            for (const SiloRecord& rec : s.records) {
                if (!mine.insert(rec.local_id).second)
                    report.issues.push_back({"identity-separation", s.silo_id,
                                             "duplicate local id within silo"});
                if (!seen.insert(rec.local_id).second)
                    report.issues.push_back({"identity-separation", s.silo_id,
                                             "local id shared with another silo"});
            }
        }
    }

    report.passed = report.issues.empty();
    return report;
}

std::string AuditReport::to_text() const {
    std::ostringstream out;
    out << "isolation audit: " << (passed ? "PASS" : "FAIL") << " ("
        << silos_checked << " silos, " << messages_checked << " messages)\n";
    for (const AuditIssue& issue : issues)
        out << "  [" << issue.rule << "] silo " << issue.silo_id << ": "
            << issue.detail << '\n';
    return out.str();
}

std::string AuditReport::to_json_lines() const {
    std::ostringstream out;
    {
        nlohmann::json j;
        j["passed"] = passed;
        j["silos_checked"] = silos_checked;
        j["messages_checked"] = messages_checked;
        out << j.dump() << '\n';
    }
    for (const AuditIssue& issue : issues) {
        nlohmann::json j;
        j["rule"] = issue.rule;
        j["silo_id"] = issue.silo_id;
        j["detail"] = issue.detail;
        out << j.dump() << '\n';
    }
    return out.str();
}

}  // namespace confed::silo
