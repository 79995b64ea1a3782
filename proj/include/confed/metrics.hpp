#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "confed/common.hpp"

namespace confed::metrics {

/// Thrown when a metric is undefined for the given labels (e.g. single class).
class UndefinedMetric : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mann-Whitney AUCROC: probability a random positive outscores a random
/// negative, ties counted 1/2.
double auc_roc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

/// Average precision: mean of precision-at-rank over positives in descending
/// score order. Ties are broken by a stable sort with positives ordered last
/// within a tie (pessimistic).
double auc_pr(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

struct OperatingPoint {
    std::optional<double> ppv;  // unset when no predicted positives
    std::optional<double> npv;  // unset when no predicted negatives
    double threshold = 0.0;
    size_t n_predicted_positive = 0;
};

/// Threshold = nearest-rank empirical q-quantile (ceil(q*n)-th smallest);
/// scores >= threshold are predicted positive.
OperatingPoint ppv_npv_at_quantile(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& labels,
                                   double q = 0.95);

struct MetricsReport {
    std::string disease;
    std::string method;
    double aucroc = 0.0;
    double aucpr = 0.0;
    std::optional<double> ppv;
    std::optional<double> npv;
    double threshold = 0.0;
    size_t n_test = 0;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
};

/// All four Table-2 metrics from raw scores and true labels.
MetricsReport compute_report(const std::vector<double>& scores,
                             const std::vector<uint8_t>& labels,
                             const std::string& disease, const std::string& method);

/// Text table in the Table-2 shape: per disease, one row per method.
std::string format_table(const std::vector<MetricsReport>& reports);

}  // namespace confed::metrics
