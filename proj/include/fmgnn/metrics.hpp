#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace fmgnn {

enum class metric_kind { accuracy, f1_binary, roc_auc };

std::string_view to_string(metric_kind m) noexcept;
metric_kind parse_metric(std::string_view s);

/// Fraction of masked nodes whose prediction equals the label.
double accuracy(std::span<const int> preds, std::span<const int> labels, std::span<const std::size_t> mask);

/// F1 of the positive class (label 1) over the masked nodes. Throws
/// metric_error unless both classes occur among the masked labels.
double f1_binary(std::span<const int> preds, std::span<const int> labels, std::span<const std::size_t> mask);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Labels are 0 or 1; throws metric_error when either
/// class is missing.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Row-wise argmax of an n x c matrix; ties go to the lowest column.
std::vector<int> argmax_rows(std::span<const double> values, std::size_t cols);

} // namespace fmgnn
