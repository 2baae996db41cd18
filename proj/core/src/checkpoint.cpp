#include "bet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "bet/errors.hpp"

namespace bet {

namespace {

constexpr char kMagic[4] = {'B', 'E', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

enum class PolicyTag : std::uint32_t { Bet = 0, Mlp = 1, NearestNeighbor = 2, Lwr = 3 };

static_assert(std::endian::native == std::endian::little, "BETC container assumes little-endian host");

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw FormatError("cannot open '" + path + "' for writing", 0);
    }
    void bytes(const void* src, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(n));
    }
    void u32(std::uint32_t v) { bytes(&v, sizeof(v)); }
    void u64(std::uint64_t v) { bytes(&v, sizeof(v)); }
    void f64(double v) { bytes(&v, sizeof(v)); }
    void f64s(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void close() {
        out_.flush();
        if (!out_) throw FormatError("write failure on '" + path_ + "'", 0);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw FormatError("cannot open '" + path + "'", 0);
    }
    void bytes(void* dst, std::size_t n, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError("'" + path_ + "': truncated while reading " + what, offset_);
        }
        offset_ += n;
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        bytes(&v, sizeof(v), what);
        return v;
    }
    std::uint64_t u64(const char* what) {
        std::uint64_t v;
        bytes(&v, sizeof(v), what);
        return v;
    }
    double f64(const char* what) {
        double v;
        bytes(&v, sizeof(v), what);
        return v;
    }
    void f64s(std::span<double> dst, const char* what) {
        bytes(dst.data(), dst.size() * sizeof(double), what);
    }
    std::string str(const char* what) {
        const std::uint32_t n = u32(what);
        if (n > (1u << 20)) throw FormatError("'" + path_ + "': implausible string length", offset_ - 4);
        std::string s(n, '\0');
        bytes(s.data(), n, what);
        return s;
    }
    std::uint64_t offset() const { return offset_; }

private:
    std::ifstream in_;
    std::string path_;
    std::uint64_t offset_ = 0;
};

void write_params(Writer& out, const std::vector<NamedParam>& params) {
    out.u32(static_cast<std::uint32_t>(params.size()));
    for (const NamedParam& p : params) {
        out.str(p.name);
        const Shape& shape = p.tensor.shape();
        out.u32(static_cast<std::uint32_t>(shape.size()));
        for (int d : shape) out.u32(static_cast<std::uint32_t>(d));
        out.f64s(p.tensor.data());
    }
}

// fills existing named tensors in place; names and shapes must match exactly
void read_params(Reader& in, std::vector<NamedParam> params) {
    const std::uint32_t count = in.u32("parameter count");
    if (count != params.size()) {
        throw FormatError("checkpoint parameter count " + std::to_string(count) + " != expected " +
                          std::to_string(params.size()), in.offset() - 4);
    }
    for (NamedParam& p : params) {
        const std::string name = in.str("parameter name");
        if (name != p.name) {
            throw FormatError("checkpoint parameter '" + name + "' does not match expected '" +
                              p.name + "'", in.offset());
        }
        const std::uint32_t ndim = in.u32("parameter rank");
        Shape shape(ndim);
        for (auto& d : shape) d = static_cast<int>(in.u32("parameter dim"));
        if (shape != p.tensor.shape()) {
            throw FormatError("checkpoint parameter '" + name + "' has unexpected shape", in.offset());
        }
        in.f64s(p.tensor.data(), "parameter data");
    }
}

void write_codebook(Writer& out, const ActionCodebook& cb) {
    out.u32(static_cast<std::uint32_t>(cb.k));
    out.u32(static_cast<std::uint32_t>(cb.act_dim));
    out.f64(cb.inertia);
    out.f64s(cb.centers);
}

ActionCodebook read_codebook(Reader& in) {
    ActionCodebook cb;
    cb.k = static_cast<int>(in.u32("codebook k"));
    cb.act_dim = static_cast<int>(in.u32("codebook act_dim"));
    if (cb.k <= 0 || cb.act_dim <= 0) throw FormatError("codebook dims must be positive", in.offset());
    cb.inertia = in.f64("codebook inertia");
    cb.centers.resize(static_cast<std::size_t>(cb.k) * cb.act_dim);
    in.f64s(cb.centers, "codebook centers");
    return cb;
}

void write_bet(Writer& out, const BetCheckpoint& c) {
    const GptConfig& g = c.cfg.gpt;
    out.u32(static_cast<std::uint32_t>(g.n_layers));
    out.u32(static_cast<std::uint32_t>(g.n_heads));
    out.u32(static_cast<std::uint32_t>(g.embed_dim));
    out.u32(static_cast<std::uint32_t>(g.context_len));
    out.u32(static_cast<std::uint32_t>(g.obs_dim));
    out.u32(static_cast<std::uint32_t>(g.act_dim));
    out.u32(static_cast<std::uint32_t>(g.k));
    out.f64(g.dropout_p);
    out.u32(static_cast<std::uint32_t>(c.cfg.epochs));
    out.u32(static_cast<std::uint32_t>(c.cfg.batch_size));
    out.f64(c.cfg.gamma);
    out.u64(c.cfg.seed);
    out.f64(c.cfg.optim.lr);
    out.f64(c.cfg.optim.beta1);
    out.f64(c.cfg.optim.beta2);
    out.f64(c.cfg.optim.eps);
    out.f64(c.cfg.optim.weight_decay);
    out.f64(c.cfg.optim.clip_norm);
    out.u32(c.cfg.ablations.offsets_enabled ? 1 : 0);
    out.u32(static_cast<std::uint32_t>(c.cfg.steps_per_epoch));
    out.f64(c.alpha);
    out.u64(c.opt_steps);
    write_codebook(out, c.codebook);
    write_params(out, gpt_parameters(c.model));
}

BetCheckpoint read_bet(Reader& in) {
    BetCheckpoint c;
    GptConfig& g = c.cfg.gpt;
    g.n_layers = static_cast<int>(in.u32("n_layers"));
    g.n_heads = static_cast<int>(in.u32("n_heads"));
    g.embed_dim = static_cast<int>(in.u32("embed_dim"));
    g.context_len = static_cast<int>(in.u32("context_len"));
    g.obs_dim = static_cast<int>(in.u32("obs_dim"));
    g.act_dim = static_cast<int>(in.u32("act_dim"));
    g.k = static_cast<int>(in.u32("k"));
    g.dropout_p = in.f64("dropout_p");
    c.cfg.epochs = static_cast<int>(in.u32("epochs"));
    c.cfg.batch_size = static_cast<int>(in.u32("batch_size"));
    c.cfg.gamma = in.f64("gamma");
    c.cfg.seed = in.u64("seed");
    c.cfg.optim.lr = in.f64("lr");
    c.cfg.optim.beta1 = in.f64("beta1");
    c.cfg.optim.beta2 = in.f64("beta2");
    c.cfg.optim.eps = in.f64("eps");
    c.cfg.optim.weight_decay = in.f64("weight_decay");
    c.cfg.optim.clip_norm = in.f64("clip_norm");
    c.cfg.ablations.offsets_enabled = in.u32("offsets_enabled") != 0;
    c.cfg.steps_per_epoch = static_cast<int>(in.u32("steps_per_epoch"));
    c.alpha = in.f64("alpha");
    c.opt_steps = in.u64("opt_steps");
    c.codebook = read_codebook(in);
    try {
        g.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint config invalid: ") + e.what(), in.offset());
    }
    c.model = gpt_init(g, 0);
    read_params(in, gpt_parameters(c.model));
    return c;
}

void write_mlp(Writer& out, const MlpPolicy& p) {
    out.u32(static_cast<std::uint32_t>(p.stack_t));
    out.u32(static_cast<std::uint32_t>(p.obs_dim));
    out.u32(static_cast<std::uint32_t>(p.act_dim));
    out.u32(static_cast<std::uint32_t>(p.widths.size()));
    for (int w : p.widths) out.u32(static_cast<std::uint32_t>(w));
    write_params(out, mlp_parameters(p));
}

MlpPolicy read_mlp(Reader& in) {
    MlpPolicy p;
    p.stack_t = static_cast<int>(in.u32("stack_t"));
    p.obs_dim = static_cast<int>(in.u32("obs_dim"));
    p.act_dim = static_cast<int>(in.u32("act_dim"));
    const std::uint32_t n_hidden = in.u32("hidden layer count");
    p.widths.resize(n_hidden);
    for (auto& w : p.widths) w = static_cast<int>(in.u32("hidden width"));
    if (p.stack_t < 1 || p.obs_dim < 1 || p.act_dim < 1) {
        throw FormatError("mlp checkpoint dims must be positive", in.offset());
    }
    int fan_in = p.stack_t * p.obs_dim;
    for (int w : p.widths) {
        p.weights.push_back(Tensor::zeros({fan_in, w}, true));
        p.biases.push_back(Tensor::zeros({w}, true));
        fan_in = w;
    }
    p.weights.push_back(Tensor::zeros({fan_in, p.act_dim}, true));
    p.biases.push_back(Tensor::zeros({p.act_dim}, true));
    read_params(in, mlp_parameters(p));
    return p;
}

void write_memorized(Writer& out, const MemorizedPolicy& p) {
    out.u32(static_cast<std::uint32_t>(p.kN));
    out.u32(static_cast<std::uint32_t>(p.obs_dim));
    out.u32(static_cast<std::uint32_t>(p.act_dim));
    out.u32(static_cast<std::uint32_t>(p.size()));
    out.f64s(p.obs);
    out.f64s(p.act);
}

MemorizedPolicy read_memorized(Reader& in, bool lwr) {
    MemorizedPolicy p;
    p.lwr = lwr;
    p.kN = static_cast<int>(in.u32("kN"));
    p.obs_dim = static_cast<int>(in.u32("obs_dim"));
    p.act_dim = static_cast<int>(in.u32("act_dim"));
    const std::uint32_t n = in.u32("pair count");
    if (p.kN < 1 || p.obs_dim < 1 || p.act_dim < 1 || n == 0) {
        throw FormatError("memorized checkpoint header invalid", in.offset());
    }
    p.obs.resize(static_cast<std::size_t>(n) * p.obs_dim);
    p.act.resize(static_cast<std::size_t>(n) * p.act_dim);
    in.f64s(p.obs, "stored observations");
    in.f64s(p.act, "stored actions");
    return p;
}

}  // namespace

const char* policy_type_name(const PolicyCheckpoint& ckpt) {
    if (std::holds_alternative<BetCheckpoint>(ckpt)) return "bet";
    if (std::holds_alternative<MlpPolicy>(ckpt)) return "mlp";
    return std::get<MemorizedPolicy>(ckpt).lwr ? "lwr" : "nn";
}

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path) {
    Writer out(path);
    out.bytes(kMagic, 4);
    out.u32(kVersion);
    if (const auto* bet = std::get_if<BetCheckpoint>(&ckpt)) {
        out.u32(static_cast<std::uint32_t>(PolicyTag::Bet));
        write_bet(out, *bet);
    } else if (const auto* mlp = std::get_if<MlpPolicy>(&ckpt)) {
        out.u32(static_cast<std::uint32_t>(PolicyTag::Mlp));
        write_mlp(out, *mlp);
    } else {
        const auto& mem = std::get<MemorizedPolicy>(ckpt);
        out.u32(static_cast<std::uint32_t>(mem.lwr ? PolicyTag::Lwr : PolicyTag::NearestNeighbor));
        write_memorized(out, mem);
    }
    out.close();
}

PolicyCheckpoint load_checkpoint(const std::string& path) {
    Reader in(path);
    char magic[4];
    in.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("'" + path + "': bad magic, not a BETC file", 0);
    }
    const std::uint32_t version = in.u32("version");
    if (version != kVersion) {
        throw FormatError("'" + path + "': unsupported BETC version " + std::to_string(version), 4);
    }
    const std::uint32_t tag = in.u32("policy tag");
    switch (static_cast<PolicyTag>(tag)) {
        case PolicyTag::Bet: return read_bet(in);
        case PolicyTag::Mlp: return read_mlp(in);
        case PolicyTag::NearestNeighbor: return read_memorized(in, false);
        case PolicyTag::Lwr: return read_memorized(in, true);
    }
    throw FormatError("'" + path + "': unknown policy tag " + std::to_string(tag), 8);
}

LoadedPolicy make_rollout_policy(const PolicyCheckpoint& ckpt, double temperature) {
    LoadedPolicy out;
    out.type = policy_type_name(ckpt);
    if (const auto* bet = std::get_if<BetCheckpoint>(&ckpt)) {
        out.policy = bet_rollout_policy(*bet, temperature);
        out.obs_dim = bet->cfg.gpt.obs_dim;
        out.act_dim = bet->cfg.gpt.act_dim;
    } else if (const auto* mlp = std::get_if<MlpPolicy>(&ckpt)) {
        out.policy = mlp_rollout_policy(*mlp);
        out.obs_dim = mlp->obs_dim;
        out.act_dim = mlp->act_dim;
    } else {
        const auto& mem = std::get<MemorizedPolicy>(ckpt);
        out.policy = memorized_rollout_policy(mem);
        out.obs_dim = mem.obs_dim;
        out.act_dim = mem.act_dim;
    }
    return out;
}

}  // namespace bet
