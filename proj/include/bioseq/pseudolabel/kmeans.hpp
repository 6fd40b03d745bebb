#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bioseq/num/checkpoint.hpp"
#include "bioseq/signal/frames.hpp"

namespace bioseq::pseudolabel {

using signal::FrameSequence;

enum class FeatureKind { mfcc, layer_repr };

struct Codebook {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<float> centroids;  // [k, dim]
    FeatureKind kind = FeatureKind::mfcc;
    std::optional<std::size_t> source_layer;

    std::span<const float> centroid(std::size_t j) const { return {centroids.data() + j * dim, dim}; }

    // Entries under "<prefix>centroids"; metadata under config()[prefix + "codebook"].
    void save(num::Checkpoint& ckpt, const std::string& prefix = "") const;
    static Codebook load(const num::Checkpoint& ckpt, const std::string& prefix = "");
};

struct KmeansOptions {
    std::size_t k = 100;
    std::size_t max_iter = 100;
    double tol = 1e-4;  // stop when no centroid moves farther than this
    std::size_t n_init = 1;  // seeded restarts; the lowest final inertia wins
    std::uint64_t seed = 0;
};

struct KmeansResult {
    Codebook codebook;
    std::vector<double> inertia_trace;  // after each assignment step
    std::size_t iterations = 0;
    bool converged = false;
    double inertia() const { return inertia_trace.empty() ? 0.0 : inertia_trace.back(); }
};

// k-means++ seeding followed by Lloyd iterations (accumulated in double).
// A cluster left empty is re-seeded with the point farthest from its centroid.
KmeansResult kmeans_fit(const FrameSequence& X, const KmeansOptions& opt);

// Nearest centroid by squared L2; ties go to the lowest index.
std::vector<int> assign(const FrameSequence& X, const Codebook& cb);

// Sum of squared distances to the assigned centroids.
double inertia(const FrameSequence& X, const Codebook& cb, std::span<const int> labels);

// Encoder-rate labels from 2x-rate labels: out[t] = labels[min(2t, len-1)].
std::vector<int> align_labels(std::span<const int> labels, std::size_t target_len);

// Uniform sample of at most budget rows (without replacement, original order).
FrameSequence subsample_rows(const FrameSequence& X, std::size_t budget, std::uint64_t seed);

const char* to_string(FeatureKind k);

}  // namespace bioseq::pseudolabel
