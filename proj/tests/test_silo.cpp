#include <algorithm>
#include <map>
#include <set>

#include "confed/nn.hpp"
#include "confed/silo.hpp"
#include "doctest.h"

using namespace confed;
using namespace confed::silo;

namespace {

cohort::Cohort make_cohort(uint32_t n_regions, uint64_t n_people, uint64_t seed,
                           double unpaired = 0.0) {
    cohort::CohortConfig cfg;
    cfg.n_people = n_people;
    cfg.n_regions = n_regions;
    cfg.vocab_sizes = {40, 30, 20};
    cfg.mean_codes = {5.0, 4.0, 3.0};
    cfg.unpaired_fraction = unpaired;
    cfg.seed = seed;
    return cohort::generate_cohort(cfg);
}

}  // namespace

TEST_CASE("partition: 34 regions give 99 silos plus one central") {
    cohort::Cohort c = make_cohort(34, 600, 1);
    SiloNetwork net = partition(c, 0, 7);
    CHECK(net.silo_count() == 99);
    CHECK(net.silos.size() == 3u * (34 - 1));
    size_t clinics = 0;
    for (const Silo& s : net.silos)
        if (s.kind == SiloKind::kClinic) ++clinics;
    CHECK(clinics == 33);
}

TEST_CASE("partition: 2 regions give 3 silos plus one central") {
    cohort::Cohort c = make_cohort(2, 100, 2);
    SiloNetwork net = partition(c, 1, 3);
    CHECK(net.silo_count() == 3);
    CHECK(net.silos[0].kind == SiloKind::kClinic);
    CHECK(net.silos[1].kind == SiloKind::kPharmacy);
    CHECK(net.silos[2].kind == SiloKind::kLab);
}

TEST_CASE("partition: conservation for fully paired cohorts") {
    cohort::Cohort c = make_cohort(6, 500, 3);
    SiloNetwork net = partition(c, 2, 11);
    size_t clinic_total = 0;
    for (const Silo& s : net.silos)
        if (s.kind == SiloKind::kClinic) clinic_total += s.size();
    CHECK(clinic_total + net.central.records.size() == c.people.size());

    // every non-central person appears once per kind
    for (SiloKind kind : kAllKinds) {
        size_t total = 0;
        for (const Silo& s : net.silos)
            if (s.kind == kind) total += s.size();
        CHECK(total + net.central.records.size() == c.people.size());
    }
}

TEST_CASE("partition: central analyzer holds every record of its region") {
    cohort::Cohort c = make_cohort(5, 400, 9, 0.3);
    SiloNetwork net = partition(c, 0, 13);
    size_t central_in_cohort = 0;
    for (const auto& p : c.people)
        if (p.region == 0) ++central_in_cohort;
    CHECK(net.central.records.size() == central_in_cohort);
    // unpaired central people are kept
    bool any_unpaired = false;
    for (const auto& p : net.central.records)
        if (!p.fully_paired()) any_unpaired = true;
    CHECK(any_unpaired);
    // central people appear in no silo: silo totals exclude the region
    for (const Silo& s : net.silos) CHECK(s.region != 0);
}

TEST_CASE("partition: deterministic per seed, ids differ across seeds") {
    cohort::Cohort c = make_cohort(4, 300, 21);
    SiloNetwork a = partition(c, 1, 5);
    SiloNetwork b = partition(c, 1, 5);
    SiloNetwork d = partition(c, 1, 6);
    REQUIRE(a.silo_count() == b.silo_count());
    bool ids_equal_ab = true, ids_equal_ad = true;
    for (size_t s = 0; s < a.silos.size(); ++s) {
        REQUIRE(a.silos[s].size() == b.silos[s].size());
        for (size_t i = 0; i < a.silos[s].records.size(); ++i) {
            ids_equal_ab &= a.silos[s].records[i].local_id ==
                            b.silos[s].records[i].local_id;
            ids_equal_ad &= a.silos[s].records[i].local_id ==
                            d.silos[s].records[i].local_id;
            CHECK(a.silos[s].records[i].x.set_indices ==
                  b.silos[s].records[i].x.set_indices);
        }
    }
    CHECK(ids_equal_ab);
    CHECK_FALSE(ids_equal_ad);
}

TEST_CASE("partition: labels live only in clinic silos; ids are silo-disjoint") {
    cohort::Cohort c = make_cohort(5, 400, 33);
    SiloNetwork net = partition(c, 4, 17);
    std::set<uint64_t> all_ids;
    for (const Silo& s : net.silos) {
        std::set<uint64_t> mine;
        for (const SiloRecord& rec : s.records) {
            CHECK(mine.insert(rec.local_id).second);
            CHECK(all_ids.insert(rec.local_id).second);
            if (s.kind == SiloKind::kClinic) {
                REQUIRE(rec.true_labels.has_value());
                CHECK(rec.true_labels->size() == net.n_diseases);
            } else {
                CHECK_FALSE(rec.true_labels.has_value());
            }
            CHECK(rec.x.vocab_size ==
                  net.vocab_sizes[static_cast<size_t>(data_type_of(s.kind))]);
        }
    }
}

TEST_CASE("partition: empty regions create empty silos, not errors") {
    cohort::CohortConfig cfg;
    cfg.n_people = 30;
    cfg.n_regions = 4;
    cfg.vocab_sizes = {50, 50, 50};
    cfg.mean_codes = {3, 3, 3};
    cfg.unpaired_fraction = 0.0;
    cfg.seed = 3;
    // force everyone into region 0
    cfg.region_weights = {1.0, 0.0, 0.0, 0.0};
    cohort::Cohort c = cohort::generate_cohort(cfg);
    SiloNetwork net = partition(c, 0, 2);
    CHECK(net.silo_count() == 9);
    for (const Silo& s : net.silos) CHECK(s.size() == 0);

    CHECK_THROWS_AS(partition(c, 9, 2), InvalidInput);
}

TEST_CASE("silo_membership: rederivation matches the silo contents") {
    cohort::Cohort c = make_cohort(4, 350, 44, 0.25);
    SiloNetwork net = partition(c, 0, 99);
    auto membership = silo_membership(c, net);
    REQUIRE(membership.size() == net.silos.size());
    for (size_t s = 0; s < net.silos.size(); ++s) {
        const Silo& silo = net.silos[s];
        REQUIRE(membership[s].size() == silo.records.size());
        cohort::DataType type = data_type_of(silo.kind);
        for (size_t i = 0; i < silo.records.size(); ++i) {
            const auto& person = c.people[membership[s][i]];
            CHECK(person.region == silo.region);
            CHECK(person.type(type).set_indices == silo.records[i].x.set_indices);
        }
    }
}

TEST_CASE("isolation_audit: freshly partitioned network passes") {
    cohort::Cohort c = make_cohort(5, 300, 55, 0.2);
    SiloNetwork net = partition(c, 2, 7);

    ExchangeLog log;
    nn::ModelParams p = nn::init_params(nn::make_arch({4, 2}), 1);
    log.record(ParamMessage{1, ParamMessage::kCentralSender, 0,
                            nn::serialize_params(p)});
    log.record(ParamMessage{1, 0, 0, nn::serialize_params(p)});

    AuditReport report = isolation_audit(net, &log);
    CHECK(report.passed);
    CHECK(report.issues.empty());
    CHECK(report.messages_checked == 2);
    CHECK(report.to_text().find("PASS") != std::string::npos);
}

TEST_CASE("isolation_audit: a pharmacy silo holding a diag vector fails type purity") {
    cohort::Cohort c = make_cohort(3, 200, 66);
    SiloNetwork net = partition(c, 0, 8);
    for (Silo& s : net.silos) {
        if (s.kind != SiloKind::kPharmacy || s.records.empty()) continue;
        s.records[0].x = c.people[0].type(cohort::DataType::kDiag);  // wrong type
        break;
    }
    AuditReport report = isolation_audit(net);
    CHECK_FALSE(report.passed);
    REQUIRE(!report.issues.empty());
    CHECK(report.issues[0].rule == "type-purity");
    CHECK(report.to_json_lines().find("type-purity") != std::string::npos);
}

TEST_CASE("isolation_audit: a payload that fails parameter parsing fails rule b") {
    cohort::Cohort c = make_cohort(3, 150, 77);
    SiloNetwork net = partition(c, 0, 9);
    ExchangeLog log;
    log.record(ParamMessage{2, 0, 1, {1, 2, 3, 4, 5}});  // raw bytes, not params
    AuditReport report = isolation_audit(net, &log);
    CHECK_FALSE(report.passed);
    REQUIRE(!report.issues.empty());
    CHECK(report.issues[0].rule == "params-only-export");
}

TEST_CASE("isolation_audit: shared local ids across silos fail identity separation") {
    cohort::Cohort c = make_cohort(3, 200, 88);
    SiloNetwork net = partition(c, 0, 10);
    REQUIRE(net.silos[0].size() > 0);
    REQUIRE(net.silos[1].size() > 0);
    net.silos[1].records[0].local_id = net.silos[0].records[0].local_id;
    AuditReport report = isolation_audit(net);
    CHECK_FALSE(report.passed);
    bool found = false;
    for (const auto& issue : report.issues)
        if (issue.rule == "identity-separation") found = true;
    CHECK(found);
}

TEST_CASE("param message: byte round trip and truncation") {
    nn::ModelParams p = nn::init_params(nn::make_arch({3, 2}), 4);
    ParamMessage msg{5, 12, 2, nn::serialize_params(p)};
    auto bytes = msg.to_bytes();
    ParamMessage back = ParamMessage::from_bytes(bytes);
    CHECK(back.round == 5);
    CHECK(back.sender == 12);
    CHECK(back.kind_tag == 2);
    CHECK(back.payload == msg.payload);
    nn::ModelParams q = nn::deserialize_params(back.payload);
    CHECK(q == p);

    std::vector<uint8_t> tiny(bytes.begin(), bytes.begin() + 10);
    CHECK_THROWS_AS(ParamMessage::from_bytes(tiny), ParseError);
}

TEST_CASE("silo_batches: coverage, determinism and alignment checks") {
    cohort::Cohort c = make_cohort(2, 120, 5);
    SiloNetwork net = partition(c, 0, 4);
    const Silo& silo = net.silos[0];
    REQUIRE(silo.size() > 10);

    size_t n = silo.size();
    std::vector<uint64_t> ids;
    Matrix inputs(n, 3), targets(n, 1);
    for (size_t i = 0; i < n; ++i) {
        ids.push_back(silo.records[i].local_id);
        inputs.at(i, 0) = static_cast<double>(i);  // row fingerprint
        inputs.at(i, 1) = 1.0;
        inputs.at(i, 2) = static_cast<double>(i) * 0.5;
        targets.at(i, 0) = static_cast<double>(i % 2);
    }

    SUBCASE("batch_size >= n gives a single full batch") {
        auto batches = silo_batches(silo, ids, inputs, targets, n + 50, 1);
        REQUIRE(batches.size() == 1);
        CHECK(batches[0].size() == n);
    }

    SUBCASE("same seed gives identical batch sequences") {
        auto a = silo_batches(silo, ids, inputs, targets, 16, 77);
        auto b = silo_batches(silo, ids, inputs, targets, 16, 77);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].inputs.data == b[i].inputs.data);
            CHECK(a[i].targets.data == b[i].targets.data);
        }
    }

    SUBCASE("union of batch rows is the silo rows exactly once") {
        auto batches = silo_batches(silo, ids, inputs, targets, 7, 3);
        std::multiset<double> seen;
        size_t total = 0;
        for (const Batch& b : batches) {
            total += b.size();
            for (size_t i = 0; i < b.size(); ++i) seen.insert(b.inputs.at(i, 0));
        }
        CHECK(total == n);
        std::multiset<double> expect;
        for (size_t i = 0; i < n; ++i) expect.insert(static_cast<double>(i));
        CHECK(seen == expect);
    }

    SUBCASE("misaligned views are rejected") {
        auto bad_ids = ids;
        bad_ids[0] ^= 1;
        CHECK_THROWS_AS(silo_batches(silo, bad_ids, inputs, targets, 8, 1),
                        InvalidInput);
        Matrix short_inputs(n - 1, 3);
        Matrix short_targets(n - 1, 1);
        std::vector<uint64_t> short_ids(ids.begin(), ids.end() - 1);
        CHECK_THROWS_AS(
            silo_batches(silo, short_ids, short_inputs, short_targets, 8, 1),
            InvalidInput);
    }
}
