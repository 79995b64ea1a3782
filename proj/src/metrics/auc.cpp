#include <algorithm>
#include <cmath>
#include <numeric>

#include "confed/metrics.hpp"

namespace confed::metrics {

namespace {

void check_sizes(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw InvalidInput("metrics: score/label length mismatch");
    if (scores.empty()) throw InvalidInput("metrics: empty input");
    for (double s : scores)
        if (std::isnan(s)) throw InvalidInput("metrics: NaN score");
}

}  // namespace

double auc_roc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    check_sizes(scores, labels);
    size_t n_pos = 0;
    for (uint8_t y : labels) n_pos += y ? 1 : 0;
    size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetric("auc_roc: needs both classes");

    // rank-sum with average ranks for ties
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]]) pos_rank_sum += avg_rank;
        i = j + 1;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_pr(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    check_sizes(scores, labels);
    size_t n_pos = 0;
    for (uint8_t y : labels) n_pos += y ? 1 : 0;
    if (n_pos == 0) throw UndefinedMetric("auc_pr: no positives");

    // descending score; within a tie negatives first (stable)
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return labels[a] < labels[b];
    });

    double ap = 0.0;
    size_t tp = 0;
    for (size_t rank = 0; rank < order.size(); ++rank) {
        if (!labels[order[rank]]) continue;
        ++tp;
        ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
    return ap / static_cast<double>(n_pos);
}

OperatingPoint ppv_npv_at_quantile(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& labels, double q) {
    check_sizes(scores, labels);
    if (q <= 0.0 || q > 1.0) throw InvalidInput("ppv_npv_at_quantile: q must be in (0,1]");
    size_t n_pos = 0;
    for (uint8_t y : labels) n_pos += y ? 1 : 0;
    if (n_pos == 0 || n_pos == labels.size())
        throw UndefinedMetric("ppv_npv_at_quantile: needs both classes");

    // nearest-rank quantile: ceil(q*n)-th smallest
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    size_t rank = static_cast<size_t>(
        std::ceil(q * static_cast<double>(n) - 1e-12));  // 1-based
    if (rank == 0) rank = 1;
    double threshold = sorted[rank - 1];

    size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (size_t i = 0; i < n; ++i) {
        bool predicted = scores[i] >= threshold;
        if (predicted)
            (labels[i] ? tp : fp)++;
        else
            (labels[i] ? fn : tn)++;
    }
    OperatingPoint op;
    op.threshold = threshold;
    op.n_predicted_positive = tp + fp;
    if (tp + fp > 0) op.ppv = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tn + fn > 0) op.npv = static_cast<double>(tn) / static_cast<double>(tn + fn);
    return op;
}

MetricsReport compute_report(const std::vector<double>& scores,
                             const std::vector<uint8_t>& labels,
                             const std::string& disease, const std::string& method) {
    MetricsReport r;
    r.disease = disease;
    r.method = method;
    r.aucroc = auc_roc(scores, labels);
    r.aucpr = auc_pr(scores, labels);
    OperatingPoint op = ppv_npv_at_quantile(scores, labels);
    r.ppv = op.ppv;
    r.npv = op.npv;
    r.threshold = op.threshold;
    r.n_test = scores.size();
    return r;
}

}  // namespace confed::metrics
