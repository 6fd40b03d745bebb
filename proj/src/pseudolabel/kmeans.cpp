#include "bioseq/pseudolabel/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bioseq/num/random.hpp"

namespace bioseq::pseudolabel {

namespace {

double sq_dist(const float* a, const double* c, std::size_t dim) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        const double d = static_cast<double>(a[j]) - c[j];
        s += d * d;
    }
    return s;
}

double sq_dist(const float* a, const float* c, std::size_t dim) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        const double d = static_cast<double>(a[j]) - static_cast<double>(c[j]);
        s += d * d;
    }
    return s;
}

void check_finite(const FrameSequence& X) {
    for (float v : X.values)
        if (!std::isfinite(v)) throw std::invalid_argument("kmeans: non-finite feature value");
}

// labels and per-point distances for double centroids
double assign_double(const FrameSequence& X, const std::vector<double>& c, std::size_t k, std::vector<int>& labels,
                     std::vector<double>& dist) {
    double total = 0.0;
    for (std::size_t i = 0; i < X.frames; ++i) {
        const float* x = X.values.data() + i * X.dim;
        double best = sq_dist(x, c.data(), X.dim);
        int arg = 0;
        for (std::size_t j = 1; j < k; ++j) {
            const double d = sq_dist(x, c.data() + j * X.dim, X.dim);
            if (d < best) {
                best = d;
                arg = static_cast<int>(j);
            }
        }
        labels[i] = arg;
        dist[i] = best;
        total += best;
    }
    return total;
}

}  // namespace

const char* to_string(FeatureKind k) { return k == FeatureKind::mfcc ? "mfcc" : "layer_repr"; }

void Codebook::save(num::Checkpoint& ckpt, const std::string& prefix) const {
    ckpt.put_f32(prefix + "centroids", {k, dim}, centroids);
    nlohmann::json meta = {{"k", k}, {"dim", dim}, {"feature_kind", to_string(kind)}};
    meta["source_layer"] = source_layer ? nlohmann::json(*source_layer) : nlohmann::json(nullptr);
    ckpt.config()[prefix + "codebook"] = meta;
}

Codebook Codebook::load(const num::Checkpoint& ckpt, const std::string& prefix) {
    if (!ckpt.has(prefix + "centroids") || !ckpt.config().contains(prefix + "codebook"))
        throw std::runtime_error("checkpoint has no codebook '" + prefix + "'");
    const auto& meta = ckpt.config().at(prefix + "codebook");
    Codebook cb;
    cb.k = meta.at("k").get<std::size_t>();
    cb.dim = meta.at("dim").get<std::size_t>();
    cb.kind = meta.at("feature_kind").get<std::string>() == "mfcc" ? FeatureKind::mfcc : FeatureKind::layer_repr;
    if (!meta.at("source_layer").is_null()) cb.source_layer = meta.at("source_layer").get<std::size_t>();
    cb.centroids = ckpt.get_f32(prefix + "centroids");
    if (cb.centroids.size() != cb.k * cb.dim) throw std::runtime_error("codebook size does not match its metadata");
    return cb;
}

namespace {

KmeansResult fit_once(const FrameSequence& X, const KmeansOptions& opt, std::uint64_t restart) {
    const std::size_t n = X.frames, dim = X.dim, k = opt.k;
    auto rng = num::make_rng(opt.seed, {0x6b6d, restart});
    std::vector<double> c(k * dim);
    auto set_centroid = [&](std::size_t j, std::size_t i) {
        for (std::size_t a = 0; a < dim; ++a) c[j * dim + a] = X.values[i * dim + a];
    };

    // k-means++
    std::vector<char> chosen(n, 0);
    std::size_t first = std::min(n - 1, static_cast<std::size_t>(num::uniform01(rng) * static_cast<double>(n)));
    set_centroid(0, first);
    chosen[first] = 1;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(X.values.data() + i * dim, c.data(), dim);
    for (std::size_t j = 1; j < k; ++j) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = num::uniform01(rng) * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += d2[i];
                if (d2[i] > 0.0 && cum > r) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
        } else {
            for (std::size_t i = 0; i < n && pick == n; ++i)
                if (!chosen[i]) pick = i;
        }
        set_centroid(j, pick);
        chosen[pick] = 1;
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], sq_dist(X.values.data() + i * dim, c.data() + j * dim, dim));
    }

    KmeansResult res;
    std::vector<int> labels(n);
    std::vector<double> dist(n), next(k * dim);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        res.inertia_trace.push_back(assign_double(X, c, k, labels, dist));
        res.iterations = it + 1;

        std::fill(next.begin(), next.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(labels[i]);
            ++counts[j];
            for (std::size_t a = 0; a < dim; ++a) next[j * dim + a] += X.values[i * dim + a];
        }
        bool reseeded = false;
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                for (std::size_t a = 0; a < dim; ++a) next[j * dim + a] /= static_cast<double>(counts[j]);
                continue;
            }
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (dist[i] > dist[far]) far = i;
            for (std::size_t a = 0; a < dim; ++a) next[j * dim + a] = X.values[far * dim + a];
            dist[far] = -1.0;
            reseeded = true;
        }
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < dim; ++a) s += (next[j * dim + a] - c[j * dim + a]) * (next[j * dim + a] - c[j * dim + a]);
            shift = std::max(shift, std::sqrt(s));
        }
        c.swap(next);
        if (!reseeded && shift < opt.tol) {
            res.converged = true;
            break;
        }
    }
    res.inertia_trace.push_back(assign_double(X, c, k, labels, dist));

    Codebook& cb = res.codebook;
    cb.k = k;
    cb.dim = dim;
    cb.centroids.resize(k * dim);
    for (std::size_t i = 0; i < k * dim; ++i) cb.centroids[i] = static_cast<float>(c[i]);
    return res;
}

}  // namespace

KmeansResult kmeans_fit(const FrameSequence& X, const KmeansOptions& opt) {
    if (opt.k < 2) throw std::invalid_argument("kmeans: k must be >= 2");
    if (X.frames < opt.k)
        throw std::invalid_argument("kmeans: " + std::to_string(X.frames) + " points is fewer than k = " +
                                    std::to_string(opt.k));
    if (X.dim == 0) throw std::invalid_argument("kmeans: zero-dimensional features");
    if (opt.n_init < 1) throw std::invalid_argument("kmeans: n_init must be >= 1");
    check_finite(X);

    KmeansResult best = fit_once(X, opt, 0);
    for (std::size_t r = 1; r < opt.n_init; ++r) {
        KmeansResult cand = fit_once(X, opt, r);
        if (cand.inertia() < best.inertia()) best = std::move(cand);
    }
    return best;
}

std::vector<int> assign(const FrameSequence& X, const Codebook& cb) {
    if (X.dim != cb.dim)
        throw std::invalid_argument("assign: feature dim " + std::to_string(X.dim) + " != codebook dim " +
                                    std::to_string(cb.dim));
    std::vector<int> labels(X.frames);
    for (std::size_t i = 0; i < X.frames; ++i) {
        const float* x = X.values.data() + i * X.dim;
        double best = sq_dist(x, cb.centroids.data(), cb.dim);
        int arg = 0;
        for (std::size_t j = 1; j < cb.k; ++j) {
            const double d = sq_dist(x, cb.centroids.data() + j * cb.dim, cb.dim);
            if (d < best) {
                best = d;
                arg = static_cast<int>(j);
            }
        }
        labels[i] = arg;
    }
    return labels;
}

double inertia(const FrameSequence& X, const Codebook& cb, std::span<const int> labels) {
    if (labels.size() != X.frames) throw std::invalid_argument("inertia: label count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < X.frames; ++i)
        total += sq_dist(X.values.data() + i * X.dim, cb.centroids.data() + static_cast<std::size_t>(labels[i]) * cb.dim, cb.dim);
    return total;
}

std::vector<int> align_labels(std::span<const int> labels, std::size_t target_len) {
    if (labels.empty()) throw std::invalid_argument("align_labels: empty label sequence");
    std::vector<int> out(target_len);
    for (std::size_t t = 0; t < target_len; ++t) out[t] = labels[std::min(2 * t, labels.size() - 1)];
    return out;
}

FrameSequence subsample_rows(const FrameSequence& X, std::size_t budget, std::uint64_t seed) {
    if (X.frames <= budget) return X;
    auto rng = num::make_rng(seed, {0x5b5});
    std::vector<std::size_t> idx(X.frames);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < budget; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(num::uniform01(rng) * static_cast<double>(X.frames - i));
        std::swap(idx[i], idx[std::min(j, X.frames - 1)]);
    }
    idx.resize(budget);
    std::sort(idx.begin(), idx.end());
    FrameSequence out(budget, X.dim, X.frame_rate_hz);
    for (std::size_t r = 0; r < budget; ++r)
        std::copy_n(X.values.data() + idx[r] * X.dim, X.dim, out.values.data() + r * X.dim);
    return out;
}

}  // namespace bioseq::pseudolabel
