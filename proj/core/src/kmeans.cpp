#include "bet/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bet/errors.hpp"
#include "bet/rng.hpp"

namespace bet {

namespace {

double sq_dist(const double* a, const double* b, int dim) {
    double acc = 0.0;
    for (int c = 0; c < dim; ++c) {
        const double d = a[c] - b[c];
        acc += d * d;
    }
    return acc;
}

}  // namespace

ActionCodebook kmeans_fit(std::span<const double> actions, int n_points, int act_dim, int k,
                          std::uint64_t seed, int max_iters, double tol) {
    if (k <= 0) throw InputError("kmeans_fit: k must be positive, got " + std::to_string(k));
    if (act_dim <= 0) throw InputError("kmeans_fit: act_dim must be positive");
    if (n_points < k) {
        throw InputError("kmeans_fit: need at least k=" + std::to_string(k) + " points, got " +
                         std::to_string(n_points));
    }
    if (max_iters < 1) throw InputError("kmeans_fit: max_iters must be >= 1");
    if (actions.size() != static_cast<std::size_t>(n_points) * static_cast<std::size_t>(act_dim)) {
        throw InputError("kmeans_fit: action buffer size does not match n_points*act_dim");
    }

    const auto point = [&](int i) { return actions.data() + static_cast<std::size_t>(i) * act_dim; };

    Rng rng(seed);
    ActionCodebook cb;
    cb.k = k;
    cb.act_dim = act_dim;
    cb.centers.assign(static_cast<std::size_t>(k) * act_dim, 0.0);

    // k-means++ seeding: first center uniform, the rest D^2-weighted
    std::vector<double> d2(static_cast<std::size_t>(n_points), 0.0);
    {
        const int first = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_points)));
        std::copy_n(point(first), act_dim, cb.centers.begin());
        for (int i = 0; i < n_points; ++i) d2[i] = sq_dist(point(i), cb.centers.data(), act_dim);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (double v : d2) total += v;
            int chosen;
            if (total <= 0.0) {
                // all remaining points coincide with existing centers
                chosen = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_points)));
            } else {
                double r = rng.uniform() * total;
                chosen = n_points - 1;
                for (int i = 0; i < n_points; ++i) {
                    r -= d2[i];
                    if (r <= 0.0) {
                        chosen = i;
                        break;
                    }
                }
            }
            double* dst = cb.centers.data() + static_cast<std::size_t>(c) * act_dim;
            std::copy_n(point(chosen), act_dim, dst);
            for (int i = 0; i < n_points; ++i) d2[i] = std::min(d2[i], sq_dist(point(i), dst, act_dim));
        }
    }

    std::vector<int> assign(static_cast<std::size_t>(n_points), 0);
    std::vector<double> new_centers(cb.centers.size());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);

    for (int iter = 0; iter < max_iters; ++iter) {
        // assignment step, ties to the lowest center index
        double inertia = 0.0;
        for (int i = 0; i < n_points; ++i) {
            int best = 0;
            double best_d = sq_dist(point(i), cb.centers.data(), act_dim);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(point(i), cb.centers.data() + static_cast<std::size_t>(c) * act_dim, act_dim);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
            inertia += best_d;
        }
        cb.inertia = inertia;
        cb.inertia_history.push_back(inertia);

        // update step
        std::fill(new_centers.begin(), new_centers.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n_points; ++i) {
            double* dst = new_centers.data() + static_cast<std::size_t>(assign[i]) * act_dim;
            const double* src = point(i);
            for (int c = 0; c < act_dim; ++c) dst[c] += src[c];
            ++counts[assign[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                double* dst = new_centers.data() + static_cast<std::size_t>(c) * act_dim;
                for (int j = 0; j < act_dim; ++j) dst[j] /= counts[c];
            } else {
                // refill with the point farthest from its assigned center
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n_points; ++i) {
                    const double d = sq_dist(point(i),
                                             cb.centers.data() + static_cast<std::size_t>(assign[i]) * act_dim,
                                             act_dim);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                std::copy_n(point(far), act_dim,
                            new_centers.begin() + static_cast<std::size_t>(c) * act_dim);
            }
        }

        double max_move = 0.0;
        for (std::size_t j = 0; j < cb.centers.size(); ++j) {
            max_move = std::max(max_move, std::abs(new_centers[j] - cb.centers[j]));
        }
        cb.centers = new_centers;
        if (max_move < tol) break;
    }

    // final inertia under the converged centers
    double inertia = 0.0;
    for (int i = 0; i < n_points; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            best_d = std::min(best_d, sq_dist(point(i), cb.centers.data() + static_cast<std::size_t>(c) * act_dim, act_dim));
        }
        inertia += best_d;
    }
    cb.inertia = inertia;
    cb.inertia_history.push_back(inertia);
    return cb;
}

std::pair<int, std::vector<double>> kmeans_encode(const ActionCodebook& cb,
                                                  std::span<const double> action) {
    if (action.size() != static_cast<std::size_t>(cb.act_dim)) {
        throw InputError("kmeans_encode: action has " + std::to_string(action.size()) +
                         " entries, codebook expects " + std::to_string(cb.act_dim));
    }
    int best = 0;
    double best_d = sq_dist(action.data(), cb.centers.data(), cb.act_dim);
    for (int c = 1; c < cb.k; ++c) {
        const double d = sq_dist(action.data(),
                                 cb.centers.data() + static_cast<std::size_t>(c) * cb.act_dim, cb.act_dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    std::vector<double> residual(static_cast<std::size_t>(cb.act_dim));
    const double* ctr = cb.centers.data() + static_cast<std::size_t>(best) * cb.act_dim;
    for (int c = 0; c < cb.act_dim; ++c) residual[static_cast<std::size_t>(c)] = action[static_cast<std::size_t>(c)] - ctr[c];
    return {best, std::move(residual)};
}

std::vector<double> kmeans_decode(const ActionCodebook& cb, int bin,
                                  std::span<const double> residual) {
    if (bin < 0 || bin >= cb.k) {
        throw InputError("kmeans_decode: bin " + std::to_string(bin) + " out of range [0, " +
                         std::to_string(cb.k) + ")");
    }
    if (residual.size() != static_cast<std::size_t>(cb.act_dim)) {
        throw InputError("kmeans_decode: residual dimension mismatch");
    }
    std::vector<double> action(static_cast<std::size_t>(cb.act_dim));
    const double* ctr = cb.centers.data() + static_cast<std::size_t>(bin) * cb.act_dim;
    for (int c = 0; c < cb.act_dim; ++c) action[static_cast<std::size_t>(c)] = ctr[c] + residual[static_cast<std::size_t>(c)];
    return action;
}

}  // namespace bet
