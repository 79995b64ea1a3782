#include <algorithm>
#include <iomanip>
#include <sstream>

#include "confed/metrics.hpp"
#include "json.hpp"

namespace confed::metrics {

namespace {

std::string fmt3(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(3) << v;
    return ss.str();
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt3(*v) : "n/a";
}

}  // namespace

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["disease"] = disease;
    j["method"] = method;
    j["aucroc"] = aucroc;
    j["aucpr"] = aucpr;
    if (ppv)
        j["ppv"] = *ppv;
    else
        j["ppv"] = nullptr;
    if (npv)
        j["npv"] = *npv;
    else
        j["npv"] = nullptr;
    j["threshold"] = threshold;
    j["n_test"] = n_test;
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("metrics report: ") + e.what());
    }
    MetricsReport r;
    try {
        r.disease = j.at("disease").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.aucroc = j.at("aucroc").get<double>();
        r.aucpr = j.at("aucpr").get<double>();
        if (!j.at("ppv").is_null()) r.ppv = j.at("ppv").get<double>();
        if (!j.at("npv").is_null()) r.npv = j.at("npv").get<double>();
        r.threshold = j.at("threshold").get<double>();
        r.n_test = j.at("n_test").get<size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("metrics report: ") + e.what());
    }
    return r;
}

std::string format_table(const std::vector<MetricsReport>& reports) {
    // fixed method order, per-disease blocks
    const std::vector<std::string> method_order{"centralized", "central_only",
                                                "federated_single_type", "confederated"};
    std::vector<std::string> diseases;
    for (const auto& r : reports)
        if (std::find(diseases.begin(), diseases.end(), r.disease) == diseases.end())
            diseases.push_back(r.disease);

    std::ostringstream out;
    out << std::left << std::setw(28) << "" << std::right << std::setw(8) << "AUCROC"
        << std::setw(8) << "AUCPR" << std::setw(8) << "PPV" << std::setw(8) << "NPV"
        << '\n';
    for (const auto& disease : diseases) {
        out << disease << '\n';
        for (const auto& method : method_order) {
            for (const auto& r : reports) {
                if (r.disease != disease || r.method != method) continue;
                out << "  " << std::left << std::setw(26) << r.method << std::right
                    << std::setw(8) << fmt3(r.aucroc) << std::setw(8) << fmt3(r.aucpr)
                    << std::setw(8) << fmt_opt(r.ppv) << std::setw(8) << fmt_opt(r.npv)
                    << '\n';
            }
        }
    }
    return out.str();
}

}  // namespace confed::metrics
