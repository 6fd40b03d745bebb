#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bioseq/num/random.hpp"
#include "bioseq/pseudolabel/kmeans.hpp"
#include "bioseq/pseudolabel/labels.hpp"
#include "wav_fixture.hpp"

using namespace bioseq;
using namespace bioseq::pseudolabel;

namespace {

FrameSequence random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double offset = 0.0) {
    auto rng = num::make_rng(seed, {0x91});
    FrameSequence X(n, dim, 100.0);
    for (auto& v : X.values) v = static_cast<float>(offset + num::normal01(rng));
    return X;
}

FrameSequence concat(const FrameSequence& a, const FrameSequence& b) {
    FrameSequence out(a.frames + b.frames, a.dim, a.frame_rate_hz);
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(a.values.size()));
    return out;
}

// independent nearest-centroid scan in long double
std::vector<int> brute_force(const FrameSequence& X, const Codebook& cb) {
    std::vector<int> out;
    for (std::size_t i = 0; i < X.frames; ++i) {
        long double best = -1;
        int arg = -1;
        for (std::size_t j = 0; j < cb.k; ++j) {
            long double s = 0;
            for (std::size_t a = 0; a < X.dim; ++a) {
                const long double d = static_cast<long double>(X.at(i, a)) - cb.centroids[j * cb.dim + a];
                s += d * d;
            }
            if (arg < 0 || s < best) {
                best = s;
                arg = static_cast<int>(j);
            }
        }
        out.push_back(arg);
    }
    return out;
}

std::vector<Utterance> tone_corpus(std::size_t n) {
    std::vector<Utterance> out;
    const double freqs[] = {300, 800, 1800, 3600};
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({"u" + std::to_string(i), {fixture::sine(freqs[i % 4], 16000, 4000 + 731 * i), 16000}});
    return out;
}

}  // namespace

TEST_CASE("kmeans") {
    SUBCASE("two separated clouds") {
        const FrameSequence X = concat(random_points(60, 3, 1, -20.0), random_points(40, 3, 2, 20.0));
        const auto res = kmeans_fit(X, {.k = 2, .max_iter = 50, .seed = 3});
        const auto labels = assign(X, res.codebook);
        for (std::size_t i = 1; i < 60; ++i) CHECK(labels[i] == labels[0]);
        for (std::size_t i = 61; i < 100; ++i) CHECK(labels[i] == labels[60]);
        CHECK(labels[0] != labels[60]);
        std::vector<double> mean(3, 0.0);
        for (std::size_t i = 0; i < X.frames; ++i)
            for (std::size_t a = 0; a < 3; ++a) mean[a] += X.at(i, a) / 100.0;
        double single = 0.0;
        for (std::size_t i = 0; i < X.frames; ++i)
            for (std::size_t a = 0; a < 3; ++a) single += std::pow(X.at(i, a) - mean[a], 2);
        CHECK(res.inertia() < single);
        CHECK(res.converged);
    }
    SUBCASE("k distinct repeated points give zero inertia") {
        FrameSequence X(40, 2, 100.0);
        for (std::size_t i = 0; i < 40; ++i) {
            X.at(i, 0) = static_cast<float>(i % 5);
            X.at(i, 1) = static_cast<float>((i % 5) * (i % 5));
        }
        const auto res = kmeans_fit(X, {.k = 5, .seed = 9});
        CHECK(res.inertia() == 0.0);
        CHECK(inertia(X, res.codebook, assign(X, res.codebook)) == 0.0);
    }
    SUBCASE("inertia never increases") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const FrameSequence X = random_points(300, 4, seed);
            const auto res = kmeans_fit(X, {.k = 7, .max_iter = 100, .seed = seed});
            REQUIRE(res.inertia_trace.size() >= 2);
            for (std::size_t t = 1; t < res.inertia_trace.size(); ++t)
                CHECK(res.inertia_trace[t] <= res.inertia_trace[t - 1]);
            CHECK(res.converged);
        }
    }
    SUBCASE("more clusters than distinct points still terminates monotonically") {
        FrameSequence X(12, 1, 100.0);
        for (std::size_t i = 0; i < 12; ++i) X.at(i, 0) = static_cast<float>(i % 3);
        const auto res = kmeans_fit(X, {.k = 4, .max_iter = 20, .seed = 1});
        CHECK(res.inertia() == 0.0);
        for (std::size_t t = 1; t < res.inertia_trace.size(); ++t) CHECK(res.inertia_trace[t] <= res.inertia_trace[t - 1]);
    }
    SUBCASE("deterministic per seed") {
        const FrameSequence X = random_points(200, 3, 5);
        CHECK(kmeans_fit(X, {.k = 6, .seed = 2}).codebook.centroids == kmeans_fit(X, {.k = 6, .seed = 2}).codebook.centroids);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(kmeans_fit(random_points(3, 2, 1), {.k = 4}), std::invalid_argument);
        CHECK_THROWS_AS(kmeans_fit(random_points(3, 2, 1), {.k = 1}), std::invalid_argument);
        FrameSequence bad = random_points(10, 2, 1);
        bad.values[3] = std::nanf("");
        CHECK_THROWS_AS(kmeans_fit(bad, {.k = 2}), std::invalid_argument);
    }
}

TEST_CASE("assign") {
    Codebook cb;
    cb.k = 4;
    cb.dim = 2;
    cb.centroids = {10, 10, -1, 0, -10, 10, 1, 0};
    SUBCASE("a centroid maps to itself") {
        FrameSequence X(4, 2, 100.0);
        X.values = cb.centroids;
        CHECK(assign(X, cb) == std::vector<int>{0, 1, 2, 3});
    }
    SUBCASE("ties go to the lowest index") {
        FrameSequence X(1, 2, 100.0);
        X.values = {0, 0};
        CHECK(assign(X, cb) == std::vector<int>{1});
    }
    SUBCASE("matches a brute-force scan") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const FrameSequence X = random_points(500, 3, seed + 40);
            const auto res = kmeans_fit(random_points(100, 3, seed + 80), {.k = 9, .seed = seed});
            CHECK(assign(X, res.codebook) == brute_force(X, res.codebook));
        }
        // integer grid forces exact ties
        FrameSequence X(49, 2, 100.0);
        for (std::size_t i = 0; i < 49; ++i) {
            X.at(i, 0) = static_cast<float>(i % 7) - 3.0f;
            X.at(i, 1) = static_cast<float>(i / 7) - 3.0f;
        }
        Codebook g;
        g.k = 4;
        g.dim = 2;
        g.centroids = {-1, -1, 1, -1, -1, 1, 1, 1};
        CHECK(assign(X, g) == brute_force(X, g));
    }
    SUBCASE("dimension mismatch") { CHECK_THROWS_AS(assign(random_points(3, 3, 1), cb), std::invalid_argument); }
}

TEST_CASE("align_labels") {
    std::vector<int> src(98);
    for (int i = 0; i < 98; ++i) src[static_cast<std::size_t>(i)] = i;
    const auto out = align_labels(src, 49);
    REQUIRE(out.size() == 49);
    for (int t = 0; t < 49; ++t) CHECK(out[static_cast<std::size_t>(t)] == 2 * t);
    CHECK(align_labels(std::vector<int>(7, 3), 4) == std::vector<int>(4, 3));
    CHECK(align_labels(std::vector<int>{1, 2, 3}, 4) == std::vector<int>{1, 3, 3, 3});
    for (std::size_t len = 1; len < 60; ++len)
        for (std::size_t T = 0; T <= (len + 1) / 2 + 2; ++T) {
            std::vector<int> v(len);
            for (std::size_t i = 0; i < len; ++i) v[i] = static_cast<int>(i);
            const auto a = align_labels(v, T);
            REQUIRE(a.size() == T);
            for (std::size_t t = 0; t < T; ++t) CHECK(a[t] == static_cast<int>(std::min(2 * t, len - 1)));
        }
    CHECK_THROWS_AS(align_labels(std::vector<int>{}, 3), std::invalid_argument);
}

TEST_CASE("subsampling") {
    const FrameSequence X = random_points(1000, 2, 4);
    const FrameSequence s = subsample_rows(X, 100, 7);
    CHECK(s.frames == 100);
    CHECK(subsample_rows(X, 100, 7).values == s.values);
    CHECK(subsample_rows(X, 100, 8).values != s.values);
    CHECK(subsample_rows(X, 5000, 7).values == X.values);
}

TEST_CASE("persistence") {
    const auto dir = fixture::temp_dir("pseudolabel");
    SUBCASE("codebook") {
        auto res = kmeans_fit(random_points(50, 3, 1), {.k = 3});
        res.codebook.kind = FeatureKind::layer_repr;
        res.codebook.source_layer = 6;
        num::Checkpoint ck;
        res.codebook.save(ck, "phase2.");
        ck.save(dir / "cb.bmck");
        const Codebook back = Codebook::load(num::Checkpoint::load(dir / "cb.bmck"), "phase2.");
        CHECK(back.centroids == res.codebook.centroids);
        CHECK(back.source_layer == std::optional<std::size_t>(6));
        CHECK(back.kind == FeatureKind::layer_repr);
        CHECK_THROWS_AS(Codebook::load(ck, "phase1."), std::runtime_error);
    }
    SUBCASE("label sets") {
        PseudoLabelSet set{5, {{"a", {0, 1, 4}}, {"b", {2}}}};
        write_labels(dir / "l.jsonl", set);
        CHECK(read_labels(dir / "l.jsonl", 5) == set);
        CHECK_THROWS_AS(read_labels(dir / "l.jsonl", 4), std::runtime_error);
        CHECK(set.find("b").labels == std::vector<int>{2});
        CHECK_THROWS_AS(set.find("c"), std::runtime_error);
    }
}

TEST_CASE("phase labels") {
    const auto corpus = tone_corpus(8);
    const encoder::EncoderConfig cfg = encoder::EncoderConfig::desk();
    LabelingOptions opt;
    opt.k = 4;
    opt.seed = 3;

    SUBCASE("phase 1 labels follow the encoder frame count") {
        const auto res = build_phase1_labels(corpus, cfg.cnn, {}, opt);
        REQUIRE(res.labels.items.size() == corpus.size());
        for (std::size_t u = 0; u < corpus.size(); ++u) {
            CHECK(res.labels.items[u].labels.size() == cfg.cnn.output_length(corpus[u].wave.size()));
            for (int z : res.labels.items[u].labels) CHECK((z >= 0 && z < 4));
        }
        CHECK(res.codebook.kind == FeatureKind::mfcc);
        CHECK(res.codebook.dim == 39);
    }
    SUBCASE("phase 2") {
        const encoder::Encoder model(cfg, 1);
        const auto res = build_phase2_labels(model, 6, corpus, opt);
        CHECK(res.codebook.source_layer == std::optional<std::size_t>(6));
        CHECK(res.codebook.dim == 64);
        for (std::size_t u = 0; u < corpus.size(); ++u)
            CHECK(res.labels.items[u].labels.size() == cfg.cnn.output_length(corpus[u].wave.size()));
        CHECK(build_phase2_labels(model, 6, corpus, opt).codebook.centroids == res.codebook.centroids);

        num::NoGradGuard ng;
        const num::Tensor h = model.layers(model.features(corpus[0].wave).frames, 6);
        FrameSequence f(h.rows(), h.cols(), 50.0);
        std::copy(h.data().begin(), h.data().end(), f.values.begin());
        CHECK(brute_force(f, res.codebook) == res.labels.items[0].labels);
        CHECK_THROWS_AS(build_phase2_labels(model, 9, corpus, opt), std::invalid_argument);

        const auto dir = fixture::temp_dir("phase2");
        num::Checkpoint ck;
        model.save(ck);
        ck.save(dir / "m.bmck");
        CHECK(build_phase2_labels(dir / "m.bmck", corpus, opt).labels == res.labels);
    }
    SUBCASE("frame budget limits the fitting pool") {
        opt.frame_budget = 50;
        const auto res = build_phase1_labels(corpus, cfg.cnn, {}, opt);
        CHECK(res.fit.codebook.k == 4);
        CHECK_THROWS_AS(build_phase1_labels({}, cfg.cnn, {}, opt), std::invalid_argument);
    }
}
