#include "fmgnn/metrics.hpp"

#include "fmgnn/errors.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>

namespace fmgnn {

std::string_view to_string(metric_kind m) noexcept {
    switch (m) {
    case metric_kind::accuracy: return "accuracy";
    case metric_kind::f1_binary: return "f1_binary";
    case metric_kind::roc_auc: return "roc_auc";
    }
    return "?";
}

metric_kind parse_metric(std::string_view s) {
    for (auto m : {metric_kind::accuracy, metric_kind::f1_binary, metric_kind::roc_auc})
        if (s == to_string(m)) return m;
    throw contract_error("unknown metric '" + std::string(s) + "'");
}

namespace {

void check_mask(std::size_t preds, std::size_t labels, std::span<const std::size_t> mask) {
    if (preds != labels) throw dimension_error("metric: prediction and label counts differ");
    if (mask.empty()) throw metric_error("metric: empty mask");
    for (std::size_t i : mask)
        if (i >= labels) throw dimension_error("metric: mask index out of range");
}

} // namespace

double accuracy(std::span<const int> preds, std::span<const int> labels, std::span<const std::size_t> mask) {
    check_mask(preds.size(), labels.size(), mask);
    std::size_t hit = 0;
    for (std::size_t i : mask) hit += preds[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(mask.size());
}

double f1_binary(std::span<const int> preds, std::span<const int> labels, std::span<const std::size_t> mask) {
    check_mask(preds.size(), labels.size(), mask);
    std::size_t tp = 0, fp = 0, fn = 0, pos = 0;
    for (std::size_t i : mask) {
        const bool p = preds[i] == 1, y = labels[i] == 1;
        pos += y;
        tp += p && y;
        fp += p && !y;
        fn += !p && y;
    }
    if (pos == 0 || pos == mask.size()) throw metric_error("f1: both classes must be present");
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw dimension_error("roc_auc: score and label counts differ");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the sum of positive ranks, ties sharing their mean rank, kept in
    // integers so the result is one exact division.
    std::uint64_t rank_sum2 = 0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t mid2 = i + j + 1;
        for (std::size_t t = i; t < j; ++t) {
            const int y = labels[order[t]];
            if (y != 0 && y != 1) throw contract_error("roc_auc: labels must be 0 or 1");
            if (y == 1) {
                rank_sum2 += mid2;
                ++pos;
            }
        }
        i = j;
    }
    const std::size_t neg = order.size() - pos;
    if (pos == 0 || neg == 0) throw metric_error("roc_auc: both classes must be present");
    const std::uint64_t num = rank_sum2 - static_cast<std::uint64_t>(pos) * (pos + 1);
    return static_cast<double>(num) / static_cast<double>(2 * static_cast<std::uint64_t>(pos) * neg);
}

std::vector<int> argmax_rows(std::span<const double> values, std::size_t cols) {
    if (cols == 0 || values.size() % cols != 0) throw dimension_error("argmax_rows: bad shape");
    std::vector<int> out(values.size() / cols);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto row = values.subspan(i * cols, cols);
        out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

} // namespace fmgnn
