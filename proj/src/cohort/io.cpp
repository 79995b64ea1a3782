#include <charconv>
#include <fstream>
#include <sstream>

#include "confed/cohort.hpp"

// Cohort text format, one record per line, tab-separated:
//   person_id  region  diag  med  lab  labels
// where each code field is "." when the type is absent, "-" when present but
// empty, else comma-separated sorted indices; labels is a 0/1 string.
// Header lines carry the vocabulary sizes and disease names.

namespace confed::cohort {

namespace {

std::string field_for(const std::optional<CodeVector>& cv) {
    if (!cv) return ".";
    if (cv->set_indices.empty()) return "-";
    std::string out;
    for (size_t i = 0; i < cv->set_indices.size(); ++i) {
        if (i) out.push_back(',');
        out += std::to_string(cv->set_indices[i]);
    }
    return out;
}

uint64_t parse_u64(const std::string& s, const char* what) {
    uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(std::string("cohort file: bad ") + what + " '" + s + "'");
    return v;
}

std::optional<CodeVector> parse_codes(const std::string& field, uint32_t vocab) {
    if (field == ".") return std::nullopt;
    CodeVector cv;
    cv.vocab_size = vocab;
    if (field == "-") return cv;
    std::stringstream ss(field);
    std::string tok;
    while (std::getline(ss, tok, ','))
        cv.set_indices.push_back(static_cast<uint32_t>(parse_u64(tok, "code index")));
    try {
        cv.validate();
    } catch (const InvalidInput& e) {
        throw ParseError(std::string("cohort file: ") + e.what());
    }
    return cv;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, '\t')) out.push_back(tok);
    return out;
}

}  // namespace

std::string cohort_to_text(const Cohort& cohort) {
    std::ostringstream out;
    out << "# confed-cohort v1\n";
    out << "# vocab\t" << cohort.config.vocab_sizes[0] << '\t'
        << cohort.config.vocab_sizes[1] << '\t' << cohort.config.vocab_sizes[2] << '\n';
    out << "# diseases";
    for (const auto& d : cohort.config.diseases) out << '\t' << d.name;
    out << '\n';
    out << "# regions\t" << cohort.config.n_regions << '\n';
    for (const PersonRecord& p : cohort.people) {
        out << p.person_id << '\t' << p.region;
        for (size_t k = 0; k < 3; ++k) out << '\t' << field_for(p.x[k]);
        out << '\t';
        for (uint8_t b : p.labels) out << (b ? '1' : '0');
        out << '\n';
    }
    return out.str();
}

Cohort cohort_from_text(const std::string& text) {
    Cohort cohort;
    std::istringstream in(text);
    std::string line;

    if (!std::getline(in, line) || line != "# confed-cohort v1")
        throw ParseError("cohort file: missing version header");
    if (!std::getline(in, line)) throw ParseError("cohort file: missing vocab header");
    {
        auto f = split_tabs(line);
        if (f.size() != 4 || f[0] != "# vocab")
            throw ParseError("cohort file: bad vocab header");
        for (size_t k = 0; k < 3; ++k)
            cohort.config.vocab_sizes[k] =
                static_cast<uint32_t>(parse_u64(f[k + 1], "vocab size"));
    }
    if (!std::getline(in, line)) throw ParseError("cohort file: missing disease header");
    size_t n_diseases = 0;
    {
        auto f = split_tabs(line);
        if (f.empty() || f[0] != "# diseases")
            throw ParseError("cohort file: bad disease header");
        n_diseases = f.size() - 1;
        cohort.config.diseases.clear();
        for (size_t d = 0; d < n_diseases; ++d) {
            DiseaseSpec spec;
            spec.name = f[d + 1];
            spec.signal_codes[0].push_back(0);  // placeholder; specs are not exported
            cohort.config.diseases.push_back(spec);
        }
    }
    if (!std::getline(in, line)) throw ParseError("cohort file: missing region header");
    {
        auto f = split_tabs(line);
        if (f.size() != 2 || f[0] != "# regions")
            throw ParseError("cohort file: bad region header");
        cohort.config.n_regions = static_cast<uint32_t>(parse_u64(f[1], "region count"));
    }

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_tabs(line);
        if (f.size() != 6) throw ParseError("cohort file: expected 6 fields");
        PersonRecord p;
        p.person_id = parse_u64(f[0], "person id");
        p.region = static_cast<uint32_t>(parse_u64(f[1], "region"));
        if (p.region >= cohort.config.n_regions)
            throw ParseError("cohort file: region out of range");
        for (size_t k = 0; k < 3; ++k)
            p.x[k] = parse_codes(f[2 + k], cohort.config.vocab_sizes[k]);
        if (!p.x[0] && !p.x[1] && !p.x[2])
            throw ParseError("cohort file: record with no data types");
        if (f[5].size() != n_diseases)
            throw ParseError("cohort file: label arity mismatch");
        for (char c : f[5]) {
            if (c != '0' && c != '1') throw ParseError("cohort file: bad label bit");
            p.labels.push_back(c == '1' ? 1 : 0);
        }
        cohort.people.push_back(std::move(p));
    }
    cohort.config.n_people = cohort.people.size();
    return cohort;
}

void save_cohort(const Cohort& cohort, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << cohort_to_text(cohort);
    if (!out) throw std::runtime_error("write failed: " + path);
}

Cohort load_cohort(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return cohort_from_text(ss.str());
}

}  // namespace confed::cohort
