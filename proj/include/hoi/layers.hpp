#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hoi/autodiff.hpp"
#include "hoi/rng.hpp"

namespace hoi {

// Named parameter registry; checkpointing serializes it in insertion order.
class ParamRegistry {
public:
    Var add(const std::string& name, Tensor init);
    const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, Var>> entries_;
};

Tensor xavier_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng);

// Inverted dropout; masks are drawn from the step RNG only while training.
struct Dropout {
    double rate = 0.0;
    bool active = false;
    Rng* rng = nullptr;

    Var operator()(const Var& x) const;
};

struct Linear {
    Var weight;  // in x out
    Var bias;    // 1 x out

    Linear() = default;
    Linear(ParamRegistry& params, const std::string& name, int in, int out, Rng& rng);
    Var apply(const Var& x) const { return add_row(matmul(x, weight), bias); }
    int out_dim() const { return weight->value.cols(); }
};

struct LayerNorm {
    Var gamma, beta;

    LayerNorm() = default;
    LayerNorm(ParamRegistry& params, const std::string& name, int dim);
    Var apply(const Var& x) const { return layer_norm_rows(x, gamma, beta); }
};

// Multi-head attention with an internal head dimension of ceil(d/heads); the
// output projection maps heads*head_dim back to d, so d need not divide by
// the head count.
struct MultiHeadAttention {
    int num_heads = 0;
    int head_dim = 0;
    Linear q_proj, k_proj, v_proj, out_proj;

    MultiHeadAttention() = default;
    MultiHeadAttention(ParamRegistry& params, const std::string& name, int d_model, int heads,
                       Rng& rng);
    // q_input attends over kv_input (same tensor for self-attention).
    Var apply(const Var& q_input, const Var& kv_input) const;
};

struct FeedForward {
    Linear expand, contract;

    FeedForward() = default;
    FeedForward(ParamRegistry& params, const std::string& name, int d_model, int d_ffn, Rng& rng);
    Var apply(const Var& x) const { return contract.apply(gelu(expand.apply(x))); }
};

// Post-norm transformer encoder layer: Add&Norm after self-attention and
// after the feed-forward block.
struct EncoderLayer {
    MultiHeadAttention attn;
    FeedForward ffn;
    LayerNorm norm1, norm2;

    EncoderLayer() = default;
    EncoderLayer(ParamRegistry& params, const std::string& name, int d_model, int d_ffn, int heads,
                 Rng& rng);
    Var apply(const Var& x, const Dropout& dropout) const;
};

// First temporal layer: self-attention over the context window, then
// cross-attention with the pair window as queries, then the feed-forward.
struct CrossEncoderLayer {
    MultiHeadAttention context_attn;
    MultiHeadAttention cross_attn;
    FeedForward ffn;
    LayerNorm norm_context, norm_cross, norm_ffn;

    CrossEncoderLayer() = default;
    CrossEncoderLayer(ParamRegistry& params, const std::string& name, int d_model, int d_ffn,
                      int heads, Rng& rng);
    Var apply(const Var& pair_window, const Var& context_window, const Dropout& dropout) const;
};

// Two 5x5 stride-2 convolutions with a nonlinearity between, global average
// pooling, then a linear map to the embedding width.
struct ConvStack {
    Var conv1_w, conv1_b, conv2_w, conv2_b;
    Linear out;

    ConvStack() = default;
    ConvStack(ParamRegistry& params, const std::string& name, int in_channels, int c1, int c2,
              int out_dim, Rng& rng);
    Var apply(const Var& image) const;  // {C,H,W} -> 1 x out_dim
};

// Alternating sin/cos positional encoding table; every entry in [-1, 1].
Tensor sinusoidal_pe(int length, int dim);

}  // namespace hoi
