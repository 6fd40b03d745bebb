#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace bioseq::downstream {

// Fraction of positions where preds equals labels.
double accuracy(std::span<const int> preds, std::span<const int> labels);

// Descending-score ranking with ties kept in index order; mean of the
// precision at each positive's rank. Throws when labels has no positive.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct MapResult {
    double value = 0.0;
    std::vector<std::optional<double>> per_class;  // empty for classes without positives
};

// scores and labels are row-major [n, C]. Averages AP over the classes that
// have at least one positive.
MapResult mean_average_precision(std::span<const double> scores, std::span<const int> labels, std::size_t n,
                                 std::size_t classes);

}  // namespace bioseq::downstream
