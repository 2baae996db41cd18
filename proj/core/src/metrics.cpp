#include "bet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include "bet/errors.hpp"
#include "bet/fmt.hpp"
#include "bet/rng.hpp"

namespace bet {

RolloutRecord run_rollout(const Policy& policy, const EnvSpec& spec, std::uint64_t seed) {
    RolloutRecord rec;
    PointMassState state{spec.start, 0};
    rec.states.push_back(state.pos);
    for (int t = 0; t < spec.max_steps; ++t) {
        const Vec2 action = policy(rec.states, mix_seed(seed, static_cast<std::uint64_t>(t)));
        state = env_step(state, action);
        rec.actions.push_back(action);
        rec.states.push_back(state.pos);
        const double dx = state.pos.x - spec.goal.x;
        const double dy = state.pos.y - spec.goal.y;
        if (std::sqrt(dx * dx + dy * dy) <= spec.goal_radius) break;
    }
    rec.success = is_success(spec, rec.states);
    rec.mode = classify_mode(spec.id, rec.states, rec.actions);
    return rec;
}

namespace {

std::vector<Vec2> demo_state_set(const TrajectoryDataset& demos) {
    std::vector<Vec2> out;
    for (const Trajectory& t : demos.trajectories) {
        const auto states = trajectory_states(t, demos);
        out.insert(out.end(), states.begin(), states.end());
    }
    return out;
}

int eval_thread_count() {
    const char* env = std::getenv("BET_THREADS");
    if (env == nullptr) return 1;
    const int n = std::atoi(env);
    return std::max(1, n);
}

}  // namespace

EvalMetrics compute_metrics(std::span<const RolloutRecord> records, const EnvSpec& spec,
                            const TrajectoryDataset& demos) {
    if (records.empty()) throw InputError("compute_metrics: no rollouts");
    EvalMetrics m;
    for (ModeLabel label : mode_labels_for(spec.id)) m.mode_frequencies[label] = 0.0;

    int successes = 0;
    for (const RolloutRecord& r : records) {
        successes += r.success ? 1 : 0;
        auto it = m.mode_frequencies.find(r.mode);
        if (it == m.mode_frequencies.end()) it = m.mode_frequencies.emplace(r.mode, 0.0).first;
        it->second += 1.0;
    }
    const double n = static_cast<double>(records.size());
    m.success_rate = successes / n;
    for (auto& [label, freq] : m.mode_frequencies) freq /= n;

    m.mode_entropy = 0.0;
    for (const auto& [label, p] : m.mode_frequencies) {
        if (p > 0.0) m.mode_entropy -= p * std::log(p);
    }

    const std::vector<Vec2> demo_states = demo_state_set(demos);
    if (demo_states.empty()) throw InputError("compute_metrics: empty demonstration set");
    double dist_sum = 0.0;
    std::size_t steps = 0;
    for (const RolloutRecord& r : records) {
        for (std::size_t i = 1; i < r.states.size(); ++i) {
            const Vec2& s = r.states[i];
            double best = std::numeric_limits<double>::infinity();
            for (const Vec2& d : demo_states) {
                const double dx = s.x - d.x, dy = s.y - d.y;
                best = std::min(best, dx * dx + dy * dy);
            }
            dist_sum += std::sqrt(best);
            ++steps;
        }
    }
    m.mean_demo_distance = steps == 0 ? 0.0 : dist_sum / static_cast<double>(steps);
    return m;
}

EvalMetrics evaluate_policy(const PolicyFactory& factory, const EnvSpec& spec, int n_rollouts,
                            std::uint64_t seed, const TrajectoryDataset& demos,
                            std::vector<RolloutRecord>* records_out) {
    if (n_rollouts < 1) throw InputError("evaluate_policy: n_rollouts must be >= 1");
    std::vector<RolloutRecord> records(static_cast<std::size_t>(n_rollouts));
    const int threads = std::min(eval_thread_count(), n_rollouts);
    if (threads <= 1) {
        for (int i = 0; i < n_rollouts; ++i) {
            records[static_cast<std::size_t>(i)] =
                run_rollout(factory(i), spec, seed + static_cast<std::uint64_t>(i));
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w]() {
                for (int i = w; i < n_rollouts; i += threads) {
                    records[static_cast<std::size_t>(i)] =
                        run_rollout(factory(i), spec, seed + static_cast<std::uint64_t>(i));
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    EvalMetrics m = compute_metrics(records, spec, demos);
    if (records_out != nullptr) *records_out = std::move(records);
    return m;
}

PolicyFactory demo_replay_factory(const TrajectoryDataset& demos) {
    if (demos.trajectories.empty()) throw InputError("demo_replay_factory: empty dataset");
    if (demos.obs_dim != 2 || demos.act_dim != 2) {
        throw InputError("demo_replay_factory: expected 2-d point-mass demos");
    }
    const auto ds = std::make_shared<TrajectoryDataset>(demos);
    return [ds](int rollout_index) -> Policy {
        const Trajectory& t =
            ds->trajectories[static_cast<std::size_t>(rollout_index) % ds->trajectories.size()];
        return [&t](std::span<const Vec2> history, std::uint64_t) -> Vec2 {
            const std::size_t step = history.size() - 1;
            if (step >= static_cast<std::size_t>(t.length)) return {0.0, 0.0};
            return {t.act[step * 2], t.act[step * 2 + 1]};
        };
    };
}

namespace {

std::string fmt_double(double v) { return format_double(v); }

}  // namespace

void write_metrics_report(const EvalMetrics& metrics, const EnvSpec& spec, std::ostream& out) {
    out << "success_rate=" << fmt_double(metrics.success_rate) << "\n";
    for (ModeLabel label : mode_labels_for(spec.id)) {
        const auto it = metrics.mode_frequencies.find(label);
        const double p = it == metrics.mode_frequencies.end() ? 0.0 : it->second;
        out << "mode_freq." << mode_label_name(label) << "=" << fmt_double(p) << "\n";
    }
    out << "mode_entropy=" << fmt_double(metrics.mode_entropy) << "\n";
    out << "mean_demo_distance=" << fmt_double(metrics.mean_demo_distance) << "\n";
}

std::string metrics_report_string(const EvalMetrics& metrics, const EnvSpec& spec) {
    std::ostringstream os;
    write_metrics_report(metrics, spec, os);
    return os.str();
}

void write_rollout_csv(std::span<const RolloutRecord> records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing", 0);
    out << "rollout_id,step,x,y,dx,dy,mode,success\n";
    for (std::size_t r = 0; r < records.size(); ++r) {
        const RolloutRecord& rec = records[r];
        for (std::size_t s = 0; s < rec.states.size(); ++s) {
            out << r << "," << s << "," << fmt_double(rec.states[s].x) << ","
                << fmt_double(rec.states[s].y) << ",";
            if (s < rec.actions.size()) {
                out << fmt_double(rec.actions[s].x) << "," << fmt_double(rec.actions[s].y);
            } else {
                out << ",";
            }
            out << "," << mode_label_name(rec.mode) << "," << (rec.success ? 1 : 0) << "\n";
        }
    }
}

}  // namespace bet
