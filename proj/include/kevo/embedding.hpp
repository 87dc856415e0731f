#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "kevo/common.hpp"

namespace kevo {

using Vec = Eigen::VectorXd;

/// Returns v scaled to unit L2 norm. A zero vector maps to the first basis
/// vector so downstream cosine math stays well-defined.
Vec l2_normalized(const Vec& v);

double cosine_similarity(const Vec& a, const Vec& b);

/// 1 - cosine similarity; the distance used for thought association.
double cosine_distance(const Vec& a, const Vec& b);

struct KMeansResult {
    std::vector<int> labels;      // one label per input point, 0..k-1
    std::vector<Vec> centroids;   // k centroids
    int iterations = 0;
};

/// Lloyd's algorithm with deterministic seeding. Assignment ties break to the
/// lowest centroid index; an empty cluster is re-seeded from the point
/// farthest from its current centroid. No cluster is ever left empty.
KMeansResult kmeans(const std::vector<Vec>& points, int k, std::uint64_t seed,
                    int max_iterations = 100);

/// Numerically stable softmax of scores / temperature.
std::vector<double> softmax(const std::vector<double>& scores, double temperature);

std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng);

/// Successive softmax draws without replacement: after each draw the chosen
/// score is removed and the remainder renormalized. count must be <= scores.
std::vector<std::size_t> sample_softmax_without_replacement(
    const std::vector<double>& scores, double temperature, std::size_t count, Rng& rng);

}  // namespace kevo
