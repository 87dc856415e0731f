#include "kevo/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kevo {

Vec l2_normalized(const Vec& v) {
    double norm = v.norm();
    if (norm <= 0.0) {
        Vec out = Vec::Zero(v.size());
        if (out.size() > 0) out(0) = 1.0;
        return out;
    }
    return v / norm;
}

double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw InvariantError("cosine_similarity: dimension mismatch (" +
                             std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    double na = a.norm();
    double nb = b.norm();
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

double cosine_distance(const Vec& a, const Vec& b) {
    return 1.0 - cosine_similarity(a, b);
}

KMeansResult kmeans(const std::vector<Vec>& points, int k, std::uint64_t seed,
                    int max_iterations) {
    if (points.empty()) throw ConfigError("kmeans: no points");
    if (k < 1 || static_cast<std::size_t>(k) > points.size())
        throw ConfigError("kmeans: cluster count " + std::to_string(k) + " out of range for " +
                          std::to_string(points.size()) + " points");

    const auto n = points.size();
    const auto dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw InvariantError("kmeans: dimension mismatch");

    // Initial centroids: k distinct points chosen by a seeded shuffle.
    Rng rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = rng.uniform_index(i + 1);
        std::swap(order[i], order[j]);
    }
    std::vector<Vec> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) centroids.push_back(points[order[static_cast<std::size_t>(c)]]);

    std::vector<int> labels(n, 0);
    KMeansResult result;
    for (int iter = 0; iter < max_iterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double d = (points[i] - centroids[static_cast<std::size_t>(c)]).squaredNorm();
                if (d < best_dist) {
                    best_dist = d;
                    best = c;
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }

        std::vector<Vec> sums(static_cast<std::size_t>(k), Vec::Zero(dim));
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[static_cast<std::size_t>(labels[i])] += points[i];
            ++counts[static_cast<std::size_t>(labels[i])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centroids[static_cast<std::size_t>(c)] =
                    sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
                continue;
            }
            // Re-seed an empty cluster from the globally farthest point.
            std::size_t farthest = 0;
            double max_dist = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d =
                    (points[i] - centroids[static_cast<std::size_t>(labels[i])]).squaredNorm();
                if (d > max_dist) {
                    max_dist = d;
                    farthest = i;
                }
            }
            centroids[static_cast<std::size_t>(c)] = points[farthest];
            labels[farthest] = c;
            changed = true;
        }

        result.iterations = iter + 1;
        if (!changed) break;
    }

    result.labels = std::move(labels);
    result.centroids = std::move(centroids);
    return result;
}

std::vector<double> softmax(const std::vector<double>& scores, double temperature) {
    if (scores.empty()) return {};
    if (temperature <= 0.0) throw ConfigError("softmax: temperature must be positive");
    double max_score = *std::max_element(scores.begin(), scores.end());
    std::vector<double> probs(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        probs[i] = std::exp((scores[i] - max_score) / temperature);
        sum += probs[i];
    }
    for (auto& p : probs) p /= sum;
    return probs;
}

std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng) {
    if (probs.empty()) throw StateError("sample_categorical: empty distribution");
    double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

std::vector<std::size_t> sample_softmax_without_replacement(
    const std::vector<double>& scores, double temperature, std::size_t count, Rng& rng) {
    if (count > scores.size())
        throw InvariantError("sample_softmax_without_replacement: count exceeds population");
    std::vector<std::size_t> remaining(scores.size());
    std::iota(remaining.begin(), remaining.end(), 0);
    std::vector<std::size_t> drawn;
    drawn.reserve(count);
    while (drawn.size() < count) {
        std::vector<double> sub(remaining.size());
        for (std::size_t i = 0; i < remaining.size(); ++i) sub[i] = scores[remaining[i]];
        auto probs = softmax(sub, temperature);
        std::size_t pick = sample_categorical(probs, rng);
        drawn.push_back(remaining[pick]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return drawn;
}

}  // namespace kevo
