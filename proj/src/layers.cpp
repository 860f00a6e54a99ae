#include "hoi/layers.hpp"

#include <cmath>

namespace hoi {

Var ParamRegistry::add(const std::string& name, Tensor init) {
    for (const auto& [existing, _] : entries_)
        if (existing == name) throw ShapeError("duplicate parameter name: " + name);
    Var p = parameter(std::move(init));
    entries_.emplace_back(name, p);
    return p;
}

Tensor xavier_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < t.size(); ++i) t.flat(i) = rng.uniform(-limit, limit);
    return t;
}

Var Dropout::operator()(const Var& x) const {
    if (!active || rate <= 0.0) return x;
    Tensor mask(x->value.shape());
    const double keep = 1.0 - rate;
    for (int i = 0; i < mask.size(); ++i)
        mask.flat(i) = rng->bernoulli(rate) ? 0.0 : 1.0 / keep;
    return mul_mask(x, std::move(mask));
}

Linear::Linear(ParamRegistry& params, const std::string& name, int in, int out, Rng& rng) {
    weight = params.add(name + ".weight", xavier_uniform({in, out}, in, out, rng));
    bias = params.add(name + ".bias", Tensor({1, out}));
}

LayerNorm::LayerNorm(ParamRegistry& params, const std::string& name, int dim) {
    gamma = params.add(name + ".gamma", Tensor({1, dim}, 1.0));
    beta = params.add(name + ".beta", Tensor({1, dim}));
}

MultiHeadAttention::MultiHeadAttention(ParamRegistry& params, const std::string& name, int d_model,
                                       int heads, Rng& rng)
    : num_heads(heads), head_dim((d_model + heads - 1) / heads) {
    if (heads < 1) throw ShapeError("attention needs at least one head");
    const int inner = num_heads * head_dim;
    q_proj = Linear(params, name + ".q", d_model, inner, rng);
    k_proj = Linear(params, name + ".k", d_model, inner, rng);
    v_proj = Linear(params, name + ".v", d_model, inner, rng);
    out_proj = Linear(params, name + ".out", inner, d_model, rng);
}

Var MultiHeadAttention::apply(const Var& q_input, const Var& kv_input) const {
    const Var q = q_proj.apply(q_input);
    const Var k = k_proj.apply(kv_input);
    const Var v = v_proj.apply(kv_input);
    std::vector<Var> head_outputs;
    head_outputs.reserve(static_cast<size_t>(num_heads));
    for (int h = 0; h < num_heads; ++h) {
        const int begin = h * head_dim;
        head_outputs.push_back(attention(slice_cols(q, begin, head_dim),
                                         slice_cols(k, begin, head_dim),
                                         slice_cols(v, begin, head_dim)));
    }
    return out_proj.apply(concat_cols(head_outputs));
}

FeedForward::FeedForward(ParamRegistry& params, const std::string& name, int d_model, int d_ffn,
                         Rng& rng) {
    expand = Linear(params, name + ".expand", d_model, d_ffn, rng);
    contract = Linear(params, name + ".contract", d_ffn, d_model, rng);
}

EncoderLayer::EncoderLayer(ParamRegistry& params, const std::string& name, int d_model, int d_ffn,
                           int heads, Rng& rng) {
    attn = MultiHeadAttention(params, name + ".attn", d_model, heads, rng);
    ffn = FeedForward(params, name + ".ffn", d_model, d_ffn, rng);
    norm1 = LayerNorm(params, name + ".norm1", d_model);
    norm2 = LayerNorm(params, name + ".norm2", d_model);
}

Var EncoderLayer::apply(const Var& x, const Dropout& dropout) const {
    Var h = norm1.apply(add(x, dropout(attn.apply(x, x))));
    return norm2.apply(add(h, dropout(ffn.apply(h))));
}

CrossEncoderLayer::CrossEncoderLayer(ParamRegistry& params, const std::string& name, int d_model,
                                     int d_ffn, int heads, Rng& rng) {
    context_attn = MultiHeadAttention(params, name + ".context_attn", d_model, heads, rng);
    cross_attn = MultiHeadAttention(params, name + ".cross_attn", d_model, heads, rng);
    ffn = FeedForward(params, name + ".ffn", d_model, d_ffn, rng);
    norm_context = LayerNorm(params, name + ".norm_context", d_model);
    norm_cross = LayerNorm(params, name + ".norm_cross", d_model);
    norm_ffn = LayerNorm(params, name + ".norm_ffn", d_model);
}

Var CrossEncoderLayer::apply(const Var& pair_window, const Var& context_window,
                             const Dropout& dropout) const {
    const Var ctx =
        norm_context.apply(add(context_window, dropout(context_attn.apply(context_window, context_window))));
    Var fused = norm_cross.apply(add(pair_window, dropout(cross_attn.apply(pair_window, ctx))));
    return norm_ffn.apply(add(fused, dropout(ffn.apply(fused))));
}

ConvStack::ConvStack(ParamRegistry& params, const std::string& name, int in_channels, int c1,
                     int c2, int out_dim, Rng& rng) {
    const int k = 5;
    conv1_w = params.add(name + ".conv1.weight",
                         xavier_uniform({c1, in_channels, k, k}, in_channels * k * k, c1 * k * k, rng));
    conv1_b = params.add(name + ".conv1.bias", Tensor({1, c1}));
    conv2_w = params.add(name + ".conv2.weight",
                         xavier_uniform({c2, c1, k, k}, c1 * k * k, c2 * k * k, rng));
    conv2_b = params.add(name + ".conv2.bias", Tensor({1, c2}));
    out = Linear(params, name + ".out", c2, out_dim, rng);
}

Var ConvStack::apply(const Var& image) const {
    Var h = gelu(conv2d(image, conv1_w, conv1_b, 2));
    h = conv2d(h, conv2_w, conv2_b, 2);
    return out.apply(global_avg_pool(h));
}

Tensor sinusoidal_pe(int length, int dim) {
    if (dim % 2 != 0) throw ShapeError("sinusoidal positional encoding needs an even dim");
    Tensor pe({length, dim});
    for (int pos = 0; pos < length; ++pos) {
        for (int i = 0; i < dim / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * i / dim);
            pe.at(pos, 2 * i) = std::sin(pos * freq);
            pe.at(pos, 2 * i + 1) = std::cos(pos * freq);
        }
    }
    return pe;
}

}  // namespace hoi
