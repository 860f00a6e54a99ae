#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hoi/tensor.hpp"

namespace hoi {

// Reverse-mode autodiff over a dynamically built graph. Nodes are reference
// counted; a step's graph lives as long as some Var points into it. Graphs
// may be DAGs (shared subexpressions accumulate gradient contributions).
struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

    void accumulate(const Tensor& g);
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var parameter(Tensor value);

// Elementwise (shapes must match).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

// Linear algebra on rank-2 tensors.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add_row(const Var& m, const Var& row);  // broadcast a 1xD row over all rows of m

// Structure.
Var concat_cols(const std::vector<Var>& parts);  // all 1xD_i -> 1x(sum D_i); or NxD_i with equal N
Var stack_rows(const std::vector<Var>& rows);    // k tensors of 1xD -> kxD
Var slice_cols(const Var& a, int begin, int count);
Var row_at(const Var& a, int r);                      // 1xD copy of row r
Var gather_cols(const Var& a, const std::vector<int>& cols);

// Nonlinearities and normalizations.
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var log_of(const Var& a);
Var pow_of(const Var& a, double exponent);
Var clamp(const Var& a, double lo, double hi);
Var l2_normalize_row(const Var& a);  // 1xD; zero rows normalize to zero

// Convolution on {C,H,W} tensors, valid padding.
Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride);
Var global_avg_pool(const Var& input);  // {C,H,W} -> 1xC

// Reductions.
Var mean_all(const Var& a);
Var sum_all(const Var& a);

// Elementwise product with a fixed mask (dropout).
Var mul_mask(const Var& a, Tensor mask);

// Scaled dot-product attention: softmax(Q K^T / sqrt(d_k) + mask) V.
// Q is n x d_k, K is m x d_k, V is m x d_v; mask, when given, is n x m and
// added to the logits before the softmax.
Var attention(const Var& q, const Var& k, const Var& v, const std::optional<Tensor>& mask = std::nullopt);

// Runs reverse-mode accumulation from a scalar (1x1) node.
void backward(const Var& loss);

}  // namespace hoi
