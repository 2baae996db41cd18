#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace bet {

// k cluster centers over the action set, frozen after fit. encode() splits an
// action into (nearest-center index, residual); decode() adds them back, so
// decode(encode(a)) == a up to float add/sub round trip.
struct ActionCodebook {
    int k = 0;
    int act_dim = 0;
    std::vector<double> centers;  // k * act_dim, row-major
    double inertia = 0.0;         // sum of squared distances at convergence
    std::vector<double> inertia_history;  // one entry per Lloyd iteration

    std::span<const double> center(int i) const {
        return {centers.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(act_dim),
                static_cast<std::size_t>(act_dim)};
    }
};

// Lloyd's algorithm with k-means++ seeding. Stops when the largest center
// movement drops below tol or after max_iters sweeps. Empty clusters are
// refilled with the point farthest from its assigned center.
ActionCodebook kmeans_fit(std::span<const double> actions, int n_points, int act_dim, int k,
                          std::uint64_t seed, int max_iters = 100, double tol = 1e-6);

// Nearest center by Euclidean distance; ties go to the lowest index.
std::pair<int, std::vector<double>> kmeans_encode(const ActionCodebook& cb,
                                                  std::span<const double> action);

std::vector<double> kmeans_decode(const ActionCodebook& cb, int bin,
                                  std::span<const double> residual);

}  // namespace bet
