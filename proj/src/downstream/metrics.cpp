#include "bioseq/downstream/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bioseq::downstream {

double accuracy(std::span<const int> preds, std::span<const int> labels) {
    if (preds.empty()) throw std::invalid_argument("accuracy: empty input");
    if (preds.size() != labels.size())
        throw std::invalid_argument("accuracy: " + std::to_string(preds.size()) + " predictions for " +
                                    std::to_string(labels.size()) + " labels");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("average_precision: " + std::to_string(scores.size()) + " scores for " +
                                    std::to_string(labels.size()) + " labels");
    std::size_t positives = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("average_precision: labels must be 0 or 1");
        positives += static_cast<std::size_t>(y);
    }
    if (positives == 0) throw std::invalid_argument("average_precision: no positive labels");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("average_precision: non-finite score");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (labels[order[r]] == 1) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(positives);
}

MapResult mean_average_precision(std::span<const double> scores, std::span<const int> labels, std::size_t n,
                                 std::size_t classes) {
    if (n == 0 || classes == 0) throw std::invalid_argument("mean_average_precision: empty input");
    if (scores.size() != n * classes || labels.size() != n * classes)
        throw std::invalid_argument("mean_average_precision: expected " + std::to_string(n * classes) + " entries");
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("mean_average_precision: scores must lie in [0, 1]");

    MapResult res;
    std::size_t used = 0;
    std::vector<double> col(n);
    std::vector<int> lab(n);
    for (std::size_t c = 0; c < classes; ++c) {
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = scores[i * classes + c];
            lab[i] = labels[i * classes + c];
            any = any || lab[i] == 1;
        }
        if (!any) {
            res.per_class.emplace_back();
            continue;
        }
        const double ap = average_precision(col, lab);
        res.per_class.emplace_back(ap);
        res.value += ap;
        ++used;
    }
    if (used == 0) throw std::invalid_argument("mean_average_precision: no class has a positive label");
    res.value /= static_cast<double>(used);
    return res;
}

}  // namespace bioseq::downstream
