#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bet/rng.hpp"

namespace bet {

// One episode: observation o_t is paired with the action a_t taken from it,
// so observation count equals action count.
struct Trajectory {
    int length = 0;
    std::vector<double> obs;  // length * obs_dim
    std::vector<double> act;  // length * act_dim

    std::span<const double> obs_at(int t, int obs_dim) const {
        return {obs.data() + static_cast<std::size_t>(t) * obs_dim, static_cast<std::size_t>(obs_dim)};
    }
    std::span<const double> act_at(int t, int act_dim) const {
        return {act.data() + static_cast<std::size_t>(t) * act_dim, static_cast<std::size_t>(act_dim)};
    }
};

struct TrajectoryDataset {
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<Trajectory> trajectories;

    std::size_t total_steps() const {
        std::size_t n = 0;
        for (const auto& t : trajectories) n += static_cast<std::size_t>(t.length);
        return n;
    }
};

// batch of contiguous length-h windows, each from a single trajectory
struct WindowBatch {
    int batch = 0;
    int h = 0;
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<double> obs;  // batch * h * obs_dim
    std::vector<double> act;  // batch * h * act_dim
};

// Number of valid (trajectory, start) pairs for windows of length h;
// trajectories shorter than h contribute none.
std::size_t count_windows(const TrajectoryDataset& ds, int h);

// Draws batch_size windows uniformly over all valid (trajectory, start) pairs.
WindowBatch sample_windows(const TrajectoryDataset& ds, int h, int batch_size, Rng& rng);
WindowBatch sample_windows(const TrajectoryDataset& ds, int h, int batch_size, std::uint64_t seed);

// BETD container: magic "BETD", version/dims/counts as little-endian u32,
// payload float32. In-memory values are float64.
void save_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

// columns: traj_id, step, obs_0.., act_0..
void write_dataset_csv(const TrajectoryDataset& ds, const std::string& path);

}  // namespace bet
