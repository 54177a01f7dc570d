#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
// Graphs are built eagerly; a node only records a backward closure when at
// least one input requires a gradient.

#include <functional>
#include <memory>
#include <vector>

#include "adasti/tensor.hpp"

namespace adasti::ad {

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Tensor&)> backward;

    void accumulate(const Tensor& g);
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Var constant(Tensor t);
    static Var leaf(Tensor t, bool requires_grad = true);

    const Tensor& value() const { return node_->value; }
    /// Empty tensor if nothing flowed back to this node.
    const Tensor& grad() const { return node_->grad; }
    const Shape& shape() const { return node_->value.shape(); }
    Index dim(Index i) const { return node_->value.dim(i); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }
    double item() const;

    /// Seeds d(self)/d(self) = 1; self must hold a single element.
    void backward() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Creates the result node; `bw` is stored only if some input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(const Tensor&)> bw);

// Elementwise
Var add(const Var& a, const Var& b);  // b broadcasts against a (right-aligned, size-1 or equal dims)
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var mul_const(const Var& a, const Tensor& c);
Var add_const(const Var& a, const Tensor& c);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var silu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

/// out = M ? X : H elementwise; entries with M=1 are copied bit-exactly from X.
Var blend_const(const Tensor& x, const Tensor& mask, const Var& h);
/// out = G*a + (1-G)*b.
Var gate_blend(const Var& g, const Var& a, const Var& b);

// Structural
Var reshape(const Var& a, Shape s);
Var permute(const Var& a, const std::vector<int>& perm);  // rank-3 only
Var flip(const Var& a, Index axis);
Var slice(const Var& a, Index axis, Index begin, Index end);
Var concat(const std::vector<Var>& parts, Index axis);

// Linear algebra
Var matmul(const Var& a, const Var& b);  // [M,K] x [K,N]
/// x[..., K] * W[K, O] (+ b[O]).
Var linear(const Var& x, const Var& w, const Var* b = nullptr);
/// Left-multiplies the leading axis by a constant [N, N] matrix: out[n,...] = sum_m A[n,m] x[m,...].
Var node_mix(const Tensor& a, const Var& x);
/// Multi-head scaled dot-product attention over the middle axis of [B, S, C] inputs.
Var attention(const Var& q, const Var& k, const Var& v, Index heads);
/// Normalization over the last axis with affine gamma/beta of that width.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Sequence ops
/// Causal per-channel convolution: y[b,h,t] = sum_{i<=t} K[h,i] u[b,h,t-i]; u is [B,H,L], K is [H,L].
Var causal_conv(const Var& u, const Var& kernel);
/// Zero-padded "same" unfolding along axis 1 of [N, L, C] into [N, L, width*C].
Var temporal_unfold(const Var& x, Index width);

}  // namespace adasti::ad
