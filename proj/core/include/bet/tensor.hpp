#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bet/rng.hpp"

namespace bet {

using Shape = std::vector<int>;

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first needed
    bool requires_grad = false;
    bool is_leaf = true;

    std::size_t numel() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major float64 tensor. Copies are shallow handles onto the same
// storage; ops record their backward rule on the thread-local tape when any
// input requires grad and grad mode is on.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t numel() const { return impl_->numel(); }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }

    std::span<double> data() { return impl_->data; }
    std::span<const double> data() const { return impl_->data; }
    double& at(std::size_t i) { return impl_->data[i]; }
    double at(std::size_t i) const { return impl_->data[i]; }

    bool requires_grad() const { return impl_->requires_grad; }
    bool is_leaf() const { return impl_->is_leaf; }
    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<double> grad();              // allocates zeros on first access
    std::span<const double> grad() const;  // empty span if never populated
    void zero_grad();

    double item() const;  // scalar tensors only

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend Tensor make_op_output(Shape shape, bool requires_grad);
};

// ---- tape -----------------------------------------------------------------

struct TapeNode {
    std::shared_ptr<detail::TensorImpl> out;
    std::function<void()> backward;
    const char* op = "";
};

// Reverse-mode tape. Nodes are recorded in execution order; backward()
// replays them once in reverse. Leaf gradients accumulate across backward
// calls, interior gradients are rebuilt per call.
class Tape {
public:
    void record(TapeNode node) { nodes_.push_back(std::move(node)); }
    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }
    std::span<const TapeNode> nodes() const { return nodes_; }
    std::span<TapeNode> nodes() { return nodes_; }

private:
    std::vector<TapeNode> nodes_;
};

Tape& tape();  // thread-local

bool grad_enabled();
void set_grad_enabled(bool on);

// Disables tape recording for the current scope (evaluation, rollouts).
class NoGradGuard {
public:
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. The loss must be
// a scalar. Gradients of requires_grad leaves accumulate; calling twice
// without zero_grad doubles them.
void backward(const Tensor& loss);

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);    // [m,n]x[n,p] -> [m,p]
Tensor add(const Tensor& a, const Tensor& b);       // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);       // elementwise
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // [r,c] + [c] broadcast over rows
Tensor affine(const Tensor& a, double scale, double shift);  // scale*a + shift
Tensor scale(const Tensor& a, double s);
Tensor pow_scalar(const Tensor& a, double exponent);  // a >= 0 expected; exponent 0 -> ones
Tensor log_clamped(const Tensor& a, double floor = 1e-12);
Tensor gelu(const Tensor& a);                       // tanh approximation
Tensor softmax_lastdim(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps);
Tensor dropout(const Tensor& a, double p, Rng& rng);  // inverted dropout
Tensor sum(const Tensor& a);    // -> [1]
Tensor mean(const Tensor& a);   // -> [1]
Tensor slice_rows(const Tensor& a, int start, int count);  // [r,c] -> [count,c]
Tensor concat_rows(const std::vector<Tensor>& parts);

// out[i] = a[i, idx[i]] for a [n,c]
Tensor take_per_row(const Tensor& a, const std::vector<int>& idx);
// out[i,:] = a[i, idx[i]*seg : (idx[i]+1)*seg] for a [n, groups*seg]
Tensor take_segment_per_row(const Tensor& a, const std::vector<int>& idx, int seg);

// Fused causal multi-head self-attention over `batch` independent windows of
// `seq_len` rows each. qkv is [batch*seq_len, 3*embed] laid out as the usual
// q|k|v column blocks; the mask admits positions <= t only. Attention-weight
// dropout is applied when train_mode is set.
Tensor causal_self_attention(const Tensor& qkv, int batch, int seq_len, int n_heads,
                             double dropout_p, bool train_mode, Rng& rng);

// ---- gradient checking ------------------------------------------------------

struct GradCheckReport {
    bool passed = false;
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_entry = 0;
};

// Compares backward() gradients of f() against central finite differences for
// every entry of every parameter. f must be deterministic (checked by running
// it twice) and must rebuild its graph from the given leaves on each call.
// Relative error uses max(|analytic|, |numeric|, 0.01) as denominator.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double step, double tol);

}  // namespace bet
