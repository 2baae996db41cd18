#include "bet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bet/errors.hpp"
#include "bet/fmt.hpp"

namespace bet {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

std::string fmt_double(double v) { return format_double(v); }

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "env.id") {
        if (v != "multipath1" && v != "multipath2") {
            throw ConfigError("config: env.id must be multipath1 or multipath2, got '" + v + "'");
        }
        env_id = v;
    } else if (key == "env.max_steps") env_max_steps = parse_int(key, v);
    else if (key == "env.goal_radius") env_goal_radius = parse_double(key, v);
    else if (key == "env.start_x") env_start_x = parse_double(key, v);
    else if (key == "env.start_y") env_start_y = parse_double(key, v);
    else if (key == "env.goal_x") env_goal_x = parse_double(key, v);
    else if (key == "env.goal_y") env_goal_y = parse_double(key, v);
    else if (key == "gpt.layers") gpt_layers = parse_int(key, v);
    else if (key == "gpt.heads") gpt_heads = parse_int(key, v);
    else if (key == "gpt.embed") gpt_embed = parse_int(key, v);
    else if (key == "gpt.context") gpt_context = parse_int(key, v);
    else if (key == "gpt.k") gpt_k = parse_int(key, v);
    else if (key == "gpt.dropout") gpt_dropout = parse_double(key, v);
    else if (key == "gpt.obs_dim") gpt_obs_dim = parse_int(key, v);
    else if (key == "gpt.act_dim") gpt_act_dim = parse_int(key, v);
    else if (key == "train.epochs") train_epochs = parse_int(key, v);
    else if (key == "train.batch") train_batch = parse_int(key, v);
    else if (key == "train.gamma") train_gamma = parse_double(key, v);
    else if (key == "train.seed") train_seed = parse_u64(key, v);
    else if (key == "train.steps_per_epoch") train_steps_per_epoch = parse_int(key, v);
    else if (key == "optim.lr") optim_lr = parse_double(key, v);
    else if (key == "optim.beta1") optim_beta1 = parse_double(key, v);
    else if (key == "optim.beta2") optim_beta2 = parse_double(key, v);
    else if (key == "optim.eps") optim_eps = parse_double(key, v);
    else if (key == "optim.weight_decay") optim_weight_decay = parse_double(key, v);
    else if (key == "optim.clip_norm") optim_clip_norm = parse_double(key, v);
    else if (key == "ablations.offsets_enabled") ablations_offsets_enabled = parse_bool(key, v);
    else if (key == "ablations.k_override") ablations_k_override = parse_int(key, v);
    else if (key == "ablations.history_override") ablations_history_override = parse_int(key, v);
    else if (key == "mlp.width") mlp_width = parse_int(key, v);
    else if (key == "mlp.depth") mlp_depth = parse_int(key, v);
    else if (key == "mlp.stack_t") mlp_stack_t = parse_int(key, v);
    else if (key == "baselines.knn") baselines_knn = parse_int(key, v);
    else if (key == "eval.temperature") eval_temperature = parse_double(key, v);
    else throw ConfigError("config: unknown key '" + key + "'");
}

namespace {

void apply_lines(RunConfig& cfg, std::istream& in, const std::string& source) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + source + ":" + std::to_string(lineno) +
                              ": expected key=value, got '" + line + "'");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

}  // namespace

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    apply_lines(*this, in, path);
}

void RunConfig::apply_overrides(const std::vector<std::string>& kvs) {
    for (const std::string& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: --set expects key=value, got '" + kv + "'");
        }
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    apply_lines(cfg, in, "<string>");
    return cfg;
}

std::string RunConfig::dump() const {
    const EnvSpec spec = env_spec();  // resolves start/goal defaults
    std::ostringstream os;
    os << "env.id=" << env_id << "\n";
    os << "env.max_steps=" << env_max_steps << "\n";
    os << "env.goal_radius=" << fmt_double(env_goal_radius) << "\n";
    os << "env.start_x=" << fmt_double(spec.start.x) << "\n";
    os << "env.start_y=" << fmt_double(spec.start.y) << "\n";
    os << "env.goal_x=" << fmt_double(spec.goal.x) << "\n";
    os << "env.goal_y=" << fmt_double(spec.goal.y) << "\n";
    os << "gpt.layers=" << gpt_layers << "\n";
    os << "gpt.heads=" << gpt_heads << "\n";
    os << "gpt.embed=" << gpt_embed << "\n";
    os << "gpt.context=" << gpt_context << "\n";
    os << "gpt.k=" << gpt_k << "\n";
    os << "gpt.dropout=" << fmt_double(gpt_dropout) << "\n";
    os << "gpt.obs_dim=" << gpt_obs_dim << "\n";
    os << "gpt.act_dim=" << gpt_act_dim << "\n";
    os << "train.epochs=" << train_epochs << "\n";
    os << "train.batch=" << train_batch << "\n";
    os << "train.gamma=" << fmt_double(train_gamma) << "\n";
    os << "train.seed=" << train_seed << "\n";
    os << "train.steps_per_epoch=" << train_steps_per_epoch << "\n";
    os << "optim.lr=" << fmt_double(optim_lr) << "\n";
    os << "optim.beta1=" << fmt_double(optim_beta1) << "\n";
    os << "optim.beta2=" << fmt_double(optim_beta2) << "\n";
    os << "optim.eps=" << fmt_double(optim_eps) << "\n";
    os << "optim.weight_decay=" << fmt_double(optim_weight_decay) << "\n";
    os << "optim.clip_norm=" << fmt_double(optim_clip_norm) << "\n";
    os << "ablations.offsets_enabled=" << (ablations_offsets_enabled ? "true" : "false") << "\n";
    os << "ablations.k_override=" << ablations_k_override << "\n";
    os << "ablations.history_override=" << ablations_history_override << "\n";
    os << "mlp.width=" << mlp_width << "\n";
    os << "mlp.depth=" << mlp_depth << "\n";
    os << "mlp.stack_t=" << mlp_stack_t << "\n";
    os << "baselines.knn=" << baselines_knn << "\n";
    os << "eval.temperature=" << fmt_double(eval_temperature) << "\n";
    return os.str();
}

EnvSpec RunConfig::env_spec() const {
    EnvSpec spec = env_id == "multipath1" ? EnvSpec::multipath1() : EnvSpec::multipath2();
    spec.max_steps = env_max_steps;
    spec.goal_radius = env_goal_radius;
    if (env_start_x != kAuto) spec.start.x = env_start_x;
    if (env_start_y != kAuto) spec.start.y = env_start_y;
    if (env_goal_x != kAuto) spec.goal.x = env_goal_x;
    if (env_goal_y != kAuto) spec.goal.y = env_goal_y;
    return spec;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.gpt.n_layers = gpt_layers;
    cfg.gpt.n_heads = gpt_heads;
    cfg.gpt.embed_dim = gpt_embed;
    cfg.gpt.context_len = gpt_context;
    cfg.gpt.k = gpt_k;
    cfg.gpt.dropout_p = gpt_dropout;
    cfg.gpt.obs_dim = gpt_obs_dim;
    cfg.gpt.act_dim = gpt_act_dim;
    cfg.epochs = train_epochs;
    cfg.batch_size = train_batch;
    cfg.gamma = train_gamma;
    cfg.seed = train_seed;
    cfg.steps_per_epoch = train_steps_per_epoch;
    cfg.optim.lr = optim_lr;
    cfg.optim.beta1 = optim_beta1;
    cfg.optim.beta2 = optim_beta2;
    cfg.optim.eps = optim_eps;
    cfg.optim.weight_decay = optim_weight_decay;
    cfg.optim.clip_norm = optim_clip_norm;
    cfg.ablations.offsets_enabled = ablations_offsets_enabled;
    cfg.ablations.k_override = ablations_k_override;
    cfg.ablations.history_override = ablations_history_override;
    return cfg;
}

}  // namespace bet
