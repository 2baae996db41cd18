#include "bet/gpt.hpp"

#include <string>

#include "bet/errors.hpp"

namespace bet {

void GptConfig::validate() const {
    if (n_layers < 1) throw ConfigError("gpt: n_layers must be >= 1");
    if (n_heads < 1) throw ConfigError("gpt: n_heads must be >= 1");
    if (embed_dim < 1 || embed_dim % n_heads != 0) {
        throw ConfigError("gpt: embed_dim " + std::to_string(embed_dim) +
                          " must be a positive multiple of n_heads " + std::to_string(n_heads));
    }
    if (context_len < 1) throw ConfigError("gpt: context_len must be >= 1");
    if (obs_dim < 1 || act_dim < 1) throw ConfigError("gpt: obs_dim and act_dim must be >= 1");
    if (k < 1) throw ConfigError("gpt: k must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("gpt: dropout_p must be in [0,1)");
}

namespace {

constexpr double kInitStd = 0.02;

Tensor weight(Rng& rng, int rows, int cols) {
    return Tensor::randn({rows, cols}, rng, kInitStd, /*requires_grad=*/true);
}

Tensor bias(int n) { return Tensor::zeros({n}, /*requires_grad=*/true); }

}  // namespace

BetModel gpt_init(const GptConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const int e = config.embed_dim;
    BetModel m;
    m.config = config;
    m.input_proj_w = weight(rng, config.obs_dim, e);
    m.input_proj_b = bias(e);
    m.pos_embedding = Tensor::randn({config.context_len, e}, rng, kInitStd, true);
    m.blocks.resize(static_cast<std::size_t>(config.n_layers));
    for (GptBlock& b : m.blocks) {
        b.ln1_gamma = Tensor::full({e}, 1.0, true);
        b.ln1_beta = bias(e);
        b.attn_qkv_w = weight(rng, e, 3 * e);
        b.attn_qkv_b = bias(3 * e);
        b.attn_proj_w = weight(rng, e, e);
        b.attn_proj_b = bias(e);
        b.ln2_gamma = Tensor::full({e}, 1.0, true);
        b.ln2_beta = bias(e);
        b.mlp_fc_w = weight(rng, e, 4 * e);
        b.mlp_fc_b = bias(4 * e);
        b.mlp_proj_w = weight(rng, 4 * e, e);
        b.mlp_proj_b = bias(e);
    }
    m.lnf_gamma = Tensor::full({e}, 1.0, true);
    m.lnf_beta = bias(e);
    m.head_bins_w = weight(rng, e, config.k);
    m.head_bins_b = bias(config.k);
    m.head_offsets_w = weight(rng, e, config.k * config.act_dim);
    m.head_offsets_b = bias(config.k * config.act_dim);
    return m;
}

namespace {
constexpr double kLnEps = 1e-5;
}

GptOutput gpt_forward(const BetModel& model, const Tensor& obs, int batch, int seq_len,
                      bool train_mode, std::uint64_t rng_seed) {
    const GptConfig& cfg = model.config;
    if (seq_len < 1 || seq_len > cfg.context_len) {
        throw InputError("gpt_forward: seq_len " + std::to_string(seq_len) +
                         " must be in [1, " + std::to_string(cfg.context_len) + "]");
    }
    if (obs.rank() != 2 || obs.dim(1) != cfg.obs_dim) {
        throw InputError("gpt_forward: observations must be [rows, " + std::to_string(cfg.obs_dim) + "]");
    }
    if (obs.dim(0) != batch * seq_len) {
        throw InputError("gpt_forward: row count != batch*seq_len");
    }

    Rng rng(rng_seed);
    const bool drop = train_mode && cfg.dropout_p > 0.0;

    // token embedding + learned positional rows, broadcast per window
    Tensor x = add_rowvec(matmul(obs, model.input_proj_w), model.input_proj_b);
    Tensor pos = slice_rows(model.pos_embedding, 0, seq_len);
    if (batch > 1) {
        std::vector<Tensor> reps(static_cast<std::size_t>(batch), pos);
        pos = concat_rows(reps);
    }
    x = add(x, pos);

    for (const GptBlock& b : model.blocks) {
        Tensor h = layer_norm(x, b.ln1_gamma, b.ln1_beta, kLnEps);
        Tensor qkv = add_rowvec(matmul(h, b.attn_qkv_w), b.attn_qkv_b);
        Tensor att = causal_self_attention(qkv, batch, seq_len, cfg.n_heads, cfg.dropout_p,
                                           train_mode, rng);
        Tensor proj = add_rowvec(matmul(att, b.attn_proj_w), b.attn_proj_b);
        x = add(x, proj);

        Tensor h2 = layer_norm(x, b.ln2_gamma, b.ln2_beta, kLnEps);
        Tensor mlp = add_rowvec(matmul(gelu(add_rowvec(matmul(h2, b.mlp_fc_w), b.mlp_fc_b)),
                                       b.mlp_proj_w),
                                b.mlp_proj_b);
        if (drop) mlp = dropout(mlp, cfg.dropout_p, rng);
        x = add(x, mlp);
    }

    Tensor trunk = layer_norm(x, model.lnf_gamma, model.lnf_beta, kLnEps);
    GptOutput out;
    out.logits = add_rowvec(matmul(trunk, model.head_bins_w), model.head_bins_b);
    out.offsets = add_rowvec(matmul(trunk, model.head_offsets_w), model.head_offsets_b);
    return out;
}

GptOutput gpt_forward_seq(const BetModel& model, std::span<const double> obs_seq, int seq_len,
                          bool train_mode, std::uint64_t rng_seed) {
    Tensor obs = Tensor::from_data({seq_len, model.config.obs_dim},
                                   std::vector<double>(obs_seq.begin(), obs_seq.end()));
    return gpt_forward(model, obs, 1, seq_len, train_mode, rng_seed);
}

std::vector<NamedParam> gpt_parameters(const BetModel& model) {
    std::vector<NamedParam> out;
    out.push_back({"input_proj.w", model.input_proj_w, true});
    out.push_back({"input_proj.b", model.input_proj_b, false});
    out.push_back({"pos_embedding", model.pos_embedding, false});
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        const GptBlock& b = model.blocks[i];
        const std::string p = "block" + std::to_string(i) + ".";
        out.push_back({p + "ln1.gamma", b.ln1_gamma, false});
        out.push_back({p + "ln1.beta", b.ln1_beta, false});
        out.push_back({p + "attn.qkv.w", b.attn_qkv_w, true});
        out.push_back({p + "attn.qkv.b", b.attn_qkv_b, false});
        out.push_back({p + "attn.proj.w", b.attn_proj_w, true});
        out.push_back({p + "attn.proj.b", b.attn_proj_b, false});
        out.push_back({p + "ln2.gamma", b.ln2_gamma, false});
        out.push_back({p + "ln2.beta", b.ln2_beta, false});
        out.push_back({p + "mlp.fc.w", b.mlp_fc_w, true});
        out.push_back({p + "mlp.fc.b", b.mlp_fc_b, false});
        out.push_back({p + "mlp.proj.w", b.mlp_proj_w, true});
        out.push_back({p + "mlp.proj.b", b.mlp_proj_b, false});
    }
    out.push_back({"lnf.gamma", model.lnf_gamma, false});
    out.push_back({"lnf.beta", model.lnf_beta, false});
    out.push_back({"head_bins.w", model.head_bins_w, true});
    out.push_back({"head_bins.b", model.head_bins_b, false});
    out.push_back({"head_offsets.w", model.head_offsets_w, true});
    out.push_back({"head_offsets.b", model.head_offsets_b, false});
    return out;
}

std::size_t gpt_param_count(const BetModel& model) {
    std::size_t n = 0;
    for (const NamedParam& p : gpt_parameters(model)) n += p.tensor.numel();
    return n;
}

}  // namespace bet
