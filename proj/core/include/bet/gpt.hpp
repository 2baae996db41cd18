#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bet/tensor.hpp"

namespace bet {

struct GptConfig {
    int n_layers = 1;
    int n_heads = 2;
    int embed_dim = 20;
    int context_len = 2;  // h
    int obs_dim = 2;
    int act_dim = 2;
    int k = 2;
    double dropout_p = 0.1;

    void validate() const;
};

// One minGPT block: pre-norm attention and a 4x-wide GELU MLP, both with
// residual connections.
struct GptBlock {
    Tensor ln1_gamma, ln1_beta;
    Tensor attn_qkv_w, attn_qkv_b;    // embed -> 3*embed
    Tensor attn_proj_w, attn_proj_b;  // embed -> embed
    Tensor ln2_gamma, ln2_beta;
    Tensor mlp_fc_w, mlp_fc_b;        // embed -> 4*embed
    Tensor mlp_proj_w, mlp_proj_b;    // 4*embed -> embed
};

// Causal transformer over observation sequences with a linear input
// projection and two output heads: k bin logits and k*act_dim residual
// offsets per position.
struct BetModel {
    GptConfig config;
    Tensor input_proj_w, input_proj_b;  // obs_dim -> embed
    Tensor pos_embedding;               // context_len x embed, learned
    std::vector<GptBlock> blocks;
    Tensor lnf_gamma, lnf_beta;
    Tensor head_bins_w, head_bins_b;        // embed -> k
    Tensor head_offsets_w, head_offsets_b;  // embed -> k*act_dim
};

struct NamedParam {
    std::string name;
    Tensor tensor;
    bool decay;  // weight-decayed: linear weight matrices only
};

struct GptOutput {
    Tensor logits;   // rows x k, rows = batch*seq_len
    Tensor offsets;  // rows x (k*act_dim)
};

// Weights ~ Normal(0, 0.02), biases zero, layer-norm gamma 1 / beta 0;
// deterministic given seed.
BetModel gpt_init(const GptConfig& config, std::uint64_t seed);

// Forward over `batch` windows of length seq_len stacked row-wise in obs
// ([batch*seq_len, obs_dim]). Dropout is active only in train_mode, drawn
// from rng_seed.
GptOutput gpt_forward(const BetModel& model, const Tensor& obs, int batch, int seq_len,
                      bool train_mode, std::uint64_t rng_seed);

// convenience for a single window
GptOutput gpt_forward_seq(const BetModel& model, std::span<const double> obs_seq, int seq_len,
                          bool train_mode, std::uint64_t rng_seed);

std::vector<NamedParam> gpt_parameters(const BetModel& model);
std::size_t gpt_param_count(const BetModel& model);

}  // namespace bet
