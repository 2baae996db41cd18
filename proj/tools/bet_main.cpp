// bet: behavior-cloning pipeline CLI.
//
// Subcommands: gen-data, export-csv, train, eval, sweep-k, selftest.
// Exit codes: 0 success, 1 usage/config error, 2 data/format error,
// 3 numeric failure.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bet/baselines.hpp"
#include "bet/checkpoint.hpp"
#include "bet/config.hpp"
#include "bet/data.hpp"
#include "bet/envs.hpp"
#include "bet/errors.hpp"
#include "bet/metrics.hpp"
#include "bet/selftest.hpp"
#include "bet/svg.hpp"
#include "bet/trainer.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

bet::EnvId parse_env(const std::string& name) {
    if (name == "multipath1") return bet::EnvId::Multipath1;
    if (name == "multipath2") return bet::EnvId::Multipath2;
    throw bet::InputError("unknown env '" + name + "', expected multipath1 or multipath2");
}

struct GenDataArgs {
    std::string env = "multipath1";
    int n = 200;
    std::uint64_t seed = 0;
    double jitter = 0.0;
    std::string out;
};

int cmd_gen_data(const GenDataArgs& args) {
    const bet::TrajectoryDataset ds = bet::gen_demos(parse_env(args.env), args.n, args.seed, args.jitter);
    bet::save_dataset(ds, args.out);
    std::cout << "wrote " << ds.trajectories.size() << " trajectories (obs_dim=" << ds.obs_dim
              << ", act_dim=" << ds.act_dim << ") to " << args.out << "\n";
    return 0;
}

struct ExportCsvArgs {
    std::string data;
    std::string out;
};

int cmd_export_csv(const ExportCsvArgs& args) {
    const bet::TrajectoryDataset ds = bet::load_dataset(args.data);
    bet::write_dataset_csv(ds, args.out);
    std::cout << "wrote " << ds.trajectories.size() << " trajectories to " << args.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    std::string log;
    std::string policy = "bet";
};

bet::RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets) {
    bet::RunConfig cfg;
    if (!config_path.empty()) cfg.apply_file(config_path);
    cfg.apply_overrides(sets);
    return cfg;
}

int cmd_train(const TrainArgs& args) {
    const bet::RunConfig run = resolve_config(args.config, args.sets);
    const bet::TrajectoryDataset ds = bet::load_dataset(args.data);

    const std::string log_path = args.log.empty() ? args.out + ".log" : args.log;
    std::ofstream log(log_path);
    if (!log) throw bet::FormatError("cannot open log file '" + log_path + "'", 0);
    const auto emit = [&log](const std::string& line) {
        std::cout << line << "\n";
        log << line << "\n";
    };

    // resolved configuration dump
    {
        std::istringstream dump(run.dump());
        std::string line;
        emit("# resolved configuration");
        while (std::getline(dump, line)) emit(line);
    }

    bet::PolicyCheckpoint ckpt;
    if (args.policy == "bet") {
        bet::TrainConfig cfg = run.train_config();
        const bet::TrainResult result =
            bet::train(ds, cfg, [&](int epoch, double focal, double mt, double total) {
                std::ostringstream os;
                os << "epoch=" << epoch << " focal=" << focal << " mt=" << mt << " total=" << total;
                emit(os.str());
            });
        std::ostringstream os;
        os << "alpha=" << result.report.alpha << " codebook_inertia=" << result.report.codebook_inertia
           << " windows=" << result.report.total_windows;
        emit(os.str());
        ckpt = result.checkpoint;
    } else if (args.policy == "mlp") {
        const int stack = run.mlp_stack_t > 0 ? run.mlp_stack_t : run.gpt_context;
        const std::vector<int> widths(static_cast<std::size_t>(std::max(0, run.mlp_depth)),
                                      run.mlp_width);
        bet::MlpTrainReport report;
        bet::AdamConfig optim = run.train_config().optim;
        const bet::MlpPolicy mlp = bet::train_mlp(ds, stack, widths, run.train_epochs, run.train_seed,
                                                  optim, run.train_batch, &report);
        for (std::size_t e = 0; e < report.epoch_mse.size(); ++e) {
            std::ostringstream os;
            os << "epoch=" << (e + 1) << " mse=" << report.epoch_mse[e];
            emit(os.str());
        }
        ckpt = mlp;
    } else if (args.policy == "nn" || args.policy == "lwr") {
        ckpt = bet::memorize_dataset(ds, run.baselines_knn, args.policy == "lwr");
    } else {
        throw bet::InputError("unknown policy '" + args.policy + "', expected bet|mlp|nn|lwr");
    }

    bet::save_checkpoint(ckpt, args.out);
    emit("checkpoint (" + std::string(bet::policy_type_name(ckpt)) + ") written to " + args.out);
    return 0;
}

struct EvalArgs {
    std::string ckpt;
    bool oracle = false;
    std::string data;
    std::string env = "multipath1";
    int n = 100;
    std::uint64_t seed = 0;
    double temperature = 1.0;
    int max_steps = 20;
    double goal_radius = 0.5;
    std::string plot;
    std::string csv;
    std::string report;
};

int cmd_eval(const EvalArgs& args) {
    const bet::EnvId env_id = parse_env(args.env);
    bet::EnvSpec spec = env_id == bet::EnvId::Multipath1 ? bet::EnvSpec::multipath1()
                                                         : bet::EnvSpec::multipath2();
    spec.max_steps = args.max_steps;
    spec.goal_radius = args.goal_radius;

    const bet::TrajectoryDataset demos = bet::load_dataset(args.data);
    if (demos.obs_dim != 2 || demos.act_dim != 2) {
        throw bet::FormatError("eval: demos must be 2-d point-mass trajectories", 0);
    }

    bet::PolicyFactory factory;
    if (args.oracle) {
        factory = bet::demo_replay_factory(demos);
    } else {
        if (args.ckpt.empty()) throw bet::InputError("eval: provide --ckpt or --oracle");
        const bet::PolicyCheckpoint ckpt = bet::load_checkpoint(args.ckpt);
        const bet::LoadedPolicy loaded = bet::make_rollout_policy(ckpt, args.temperature);
        if (loaded.obs_dim != demos.obs_dim || loaded.act_dim != demos.act_dim) {
            throw bet::FormatError("eval: checkpoint dims (" + std::to_string(loaded.obs_dim) + "," +
                                       std::to_string(loaded.act_dim) + ") incompatible with demos",
                                   0);
        }
        bet::Policy policy = loaded.policy;
        factory = [policy](int) { return policy; };
    }

    std::vector<bet::RolloutRecord> records;
    const bet::EvalMetrics metrics =
        bet::evaluate_policy(factory, spec, args.n, args.seed, demos, &records);

    const std::string report = bet::metrics_report_string(metrics, spec);
    std::cout << report;
    if (!args.report.empty()) {
        std::ofstream out(args.report);
        if (!out) throw bet::FormatError("cannot open '" + args.report + "' for writing", 0);
        out << report;
    }
    if (!args.csv.empty()) bet::write_rollout_csv(records, args.csv);
    if (!args.plot.empty()) bet::write_rollout_svg(args.plot, demos, records, spec);
    return 0;
}

struct SweepArgs {
    std::string data;
    std::string config;
    std::vector<std::string> sets;
    std::string k_list = "1,2,3";
    std::string out;
    int n = 100;
    std::uint64_t seed = 0;
    std::string env = "multipath1";
};

int cmd_sweep_k(const SweepArgs& args) {
    std::vector<int> ks;
    {
        std::istringstream in(args.k_list);
        std::string tok;
        std::set<int> seen;
        while (std::getline(in, tok, ',')) {
            if (tok.empty()) continue;
            int k = 0;
            try {
                k = std::stoi(tok);
            } catch (...) {
                throw bet::InputError("sweep-k: bad k value '" + tok + "'");
            }
            if (k < 1) throw bet::InputError("sweep-k: k must be >= 1");
            if (!seen.insert(k).second) {
                std::cerr << "warning: duplicate k=" << k << " ignored\n";
                continue;
            }
            ks.push_back(k);
        }
    }
    if (ks.empty()) throw bet::InputError("sweep-k: empty k list");

    const bet::EnvId env_id = parse_env(args.env);
    bet::EnvSpec spec = env_id == bet::EnvId::Multipath1 ? bet::EnvSpec::multipath1()
                                                         : bet::EnvSpec::multipath2();
    const bet::TrajectoryDataset ds = bet::load_dataset(args.data);

    std::filesystem::create_directories(args.out);
    const std::string csv_path = (std::filesystem::path(args.out) / "sweep.csv").string();
    std::ofstream csv(csv_path);
    if (!csv) throw bet::FormatError("cannot open '" + csv_path + "' for writing", 0);

    const auto labels = bet::mode_labels_for(env_id);
    csv << "k,codebook_inertia,success_rate,mode_entropy,mean_demo_distance";
    for (const auto label : labels) csv << ",mode_freq." << bet::mode_label_name(label);
    csv << "\n";

    for (const int k : ks) {
        bet::RunConfig run = resolve_config(args.config, args.sets);
        run.gpt_k = k;
        bet::TrainConfig cfg = run.train_config();
        const bet::TrainResult result = bet::train(ds, cfg);
        const bet::EvalMetrics metrics = bet::evaluate(result.checkpoint, spec, args.n, args.seed,
                                                       ds, run.eval_temperature);
        const std::string ckpt_path =
            (std::filesystem::path(args.out) / ("k" + std::to_string(k) + ".betc")).string();
        bet::save_checkpoint(result.checkpoint, ckpt_path);

        csv << k << "," << result.report.codebook_inertia << "," << metrics.success_rate << ","
            << metrics.mode_entropy << "," << metrics.mean_demo_distance;
        for (const auto label : labels) {
            const auto it = metrics.mode_frequencies.find(label);
            csv << "," << (it == metrics.mode_frequencies.end() ? 0.0 : it->second);
        }
        csv << "\n";
        std::cout << "k=" << k << " success_rate=" << metrics.success_rate
                  << " mode_entropy=" << metrics.mode_entropy << "\n";
    }
    std::cout << "sweep table written to " << csv_path << "\n";
    return 0;
}

int cmd_selftest() {
    const auto start = std::chrono::steady_clock::now();
    const int failures = bet::run_selfchecks(bet::standard_selftest_checks(), std::cout);
    const auto elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << " in " << elapsed
              << " s\n";
    return failures == 0 ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Behavior-cloning toolkit: k-means action discretization with residual offsets, "
                 "a causal transformer with dual heads, and point-mass evaluation harness"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate demonstration trajectories");
    gen_cmd->add_option("--env", gen.env, "Environment: multipath1 or multipath2")->required();
    gen_cmd->add_option("--n", gen.n, "Number of demonstrations")->required();
    gen_cmd->add_option("--seed", gen.seed, "Shuffle/jitter seed");
    gen_cmd->add_option("--jitter", gen.jitter, "Gaussian action jitter stddev (default 0)");
    gen_cmd->add_option("--out", gen.out, "Output BETD path")->required();

    ExportCsvArgs exp;
    auto* exp_cmd = app.add_subcommand("export-csv", "Export a BETD dataset as CSV");
    exp_cmd->add_option("--data", exp.data, "Input BETD path")->required();
    exp_cmd->add_option("--out", exp.out, "Output CSV path")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a policy and write a BETC checkpoint");
    train_cmd->add_option("--data", train.data, "Training BETD dataset")->required();
    train_cmd->add_option("--config", train.config, "key=value config file");
    train_cmd->add_option("--set", train.sets, "Override config entries (key=value, repeatable)");
    train_cmd->add_option("--out", train.out, "Output BETC path")->required();
    train_cmd->add_option("--log", train.log, "Log file (default: <out>.log)");
    train_cmd->add_option("--policy", train.policy, "Policy type: bet (default), mlp, nn, lwr");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with environment rollouts");
    eval_cmd->add_option("--ckpt", eval.ckpt, "BETC checkpoint path");
    eval_cmd->add_flag("--oracle", eval.oracle, "Replay the demos themselves as the policy");
    eval_cmd->add_option("--data", eval.data, "Demonstration BETD (reference set)")->required();
    eval_cmd->add_option("--env", eval.env, "Environment: multipath1 or multipath2")->required();
    eval_cmd->add_option("--n", eval.n, "Number of rollouts");
    eval_cmd->add_option("--seed", eval.seed, "Evaluation seed");
    eval_cmd->add_option("--temperature", eval.temperature, "Bin sampling temperature (0 = argmax)");
    eval_cmd->add_option("--max-steps", eval.max_steps, "Episode step limit");
    eval_cmd->add_option("--goal-radius", eval.goal_radius, "Goal proximity for success");
    eval_cmd->add_option("--plot", eval.plot, "Write an SVG overlay of demos and rollouts");
    eval_cmd->add_option("--csv", eval.csv, "Write all rollout states as CSV");
    eval_cmd->add_option("--report", eval.report, "Write the metrics report to a file");

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep-k", "Train and evaluate one model per bin count k");
    sweep_cmd->add_option("--data", sweep.data, "Training BETD dataset")->required();
    sweep_cmd->add_option("--config", sweep.config, "key=value config file");
    sweep_cmd->add_option("--set", sweep.sets, "Override config entries (key=value, repeatable)");
    sweep_cmd->add_option("--k-list", sweep.k_list, "Comma-separated k values")->required();
    sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
    sweep_cmd->add_option("--n", sweep.n, "Rollouts per k");
    sweep_cmd->add_option("--seed", sweep.seed, "Shared train/eval seed");
    sweep_cmd->add_option("--env", sweep.env, "Environment: multipath1 or multipath2");

    auto* selftest_cmd =
        app.add_subcommand("selftest", "Gradient, codec, loss, and env verification suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen_data(gen);
        if (exp_cmd->parsed()) return cmd_export_csv(exp);
        if (train_cmd->parsed()) return cmd_train(train);
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (sweep_cmd->parsed()) return cmd_sweep_k(sweep);
        if (selftest_cmd->parsed()) return cmd_selftest();
    } catch (const bet::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bet::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bet::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const bet::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
