#include "bet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bet/errors.hpp"

namespace bet {

namespace {

thread_local Tape g_tape;
thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw InputError("tensor dimension must be positive, got " + std::to_string(d));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
    }
}

// rows = product of leading dims, cols = last dim
std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t) {
    const Shape& s = t.shape();
    std::size_t cols = static_cast<std::size_t>(s.back());
    std::size_t rows = t.numel() / cols;
    return {rows, cols};
}

}  // namespace

Tape& tape() { return g_tape; }
bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Tensor make_op_output(Shape shape, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->data.assign(shape_numel(shape), 0.0);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    impl->is_leaf = false;
    return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->data.assign(shape_numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->ensure_grad();
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw InputError("from_data: shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->ensure_grad();
    return Tensor(std::move(impl));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.data()) v = rng.gaussian(0.0, stddev);
    return t;
}

std::span<double> Tensor::grad() {
    impl_->ensure_grad();
    return impl_->grad;
}

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item(): tensor has " + std::to_string(numel()) + " elements");
    return impl_->data[0];
}

namespace {

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!g_grad_enabled) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

using Impl = std::shared_ptr<detail::TensorImpl>;

}  // namespace

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape of " +
                            std::to_string(loss.numel()) + " elements");
    }
    // interior grads are rebuilt per call so that repeated backward passes
    // accumulate exactly into the leaves
    for (TapeNode& node : g_tape.nodes()) {
        if (!node.out->is_leaf) {
            node.out->grad.assign(node.out->data.size(), 0.0);
        }
    }
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += 1.0;
    auto nodes = g_tape.nodes();
    for (std::size_t i = nodes.size(); i > 0; --i) {
        nodes[i - 1].backward();
    }
}

// ---- op helpers -------------------------------------------------------------

namespace {

void record(const char* op, const Tensor& out, std::function<void()> fn) {
    g_tape.record(TapeNode{out.impl(), std::move(fn), op});
}

}  // namespace

// ---- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw InputError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t m = static_cast<std::size_t>(a.dim(0));
    const std::size_t n = static_cast<std::size_t>(a.dim(1));
    const std::size_t p = static_cast<std::size_t>(b.dim(1));
    const bool rg = should_record({&a, &b});
    Tensor out = make_op_output({static_cast<int>(m), static_cast<int>(p)}, rg);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < n; ++kk) {
            const double av = pa[i * n + kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * p;
            double* crow = pc + i * p;
            for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
    if (rg) {
        Impl ia = a.impl(), ib = b.impl(), io = out.impl();
        record("matmul", out, [ia, ib, io, m, n, p]() {
            const double* go = io->grad.data();
            if (ia->requires_grad) {
                ia->ensure_grad();
                double* ga = ia->grad.data();
                const double* pb2 = ib->data.data();
                // dA = dC * B^T
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t kk = 0; kk < n; ++kk) {
                        double acc = 0.0;
                        const double* gorow = go + i * p;
                        const double* brow = pb2 + kk * p;
                        for (std::size_t j = 0; j < p; ++j) acc += gorow[j] * brow[j];
                        ga[i * n + kk] += acc;
                    }
                }
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                double* gb = ib->grad.data();
                const double* pa2 = ia->data.data();
                // dB = A^T * dC
                for (std::size_t kk = 0; kk < n; ++kk) {
                    for (std::size_t i = 0; i < m; ++i) {
                        const double av = pa2[i * n + kk];
                        if (av == 0.0) continue;
                        const double* gorow = go + i * p;
                        double* gbrow = gb + kk * p;
                        for (std::size_t j = 0; j < p; ++j) gbrow[j] += av * gorow[j];
                    }
                }
            }
        });
    }
    return out;
}

namespace {

Tensor elementwise_binary(const char* op, const Tensor& a, const Tensor& b, double b_sign) {
    if (a.shape() != b.shape()) {
        throw InputError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    const bool rg = should_record({&a, &b});
    Tensor out = make_op_output(a.shape(), rg);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + b_sign * pb[i];
    if (rg) {
        Impl ia = a.impl(), ib = b.impl(), io = out.impl();
        record(op, out, [ia, ib, io, b_sign, n]() {
            const double* go = io->grad.data();
            if (ia->requires_grad) {
                ia->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ia->grad[i] += go[i];
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ib->grad[i] += b_sign * go[i];
            }
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise_binary("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise_binary("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw InputError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const bool rg = should_record({&a, &b});
    Tensor out = make_op_output(a.shape(), rg);
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i);
    if (rg) {
        Impl ia = a.impl(), ib = b.impl(), io = out.impl();
        record("mul", out, [ia, ib, io, n]() {
            const double* go = io->grad.data();
            if (ia->requires_grad) {
                ia->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ia->grad[i] += go[i] * ib->data[i];
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ib->grad[i] += go[i] * ia->data[i];
            }
        });
    }
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    auto [rows, cols] = rows_cols(a);
    if (v.numel() != cols) {
        throw InputError("add_rowvec: vector length " + std::to_string(v.numel()) +
                         " does not match last dim of " + shape_str(a.shape()));
    }
    const bool rg = should_record({&a, &v});
    Tensor out = make_op_output(a.shape(), rg);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.at(r * cols + c) = a.at(r * cols + c) + v.at(c);
    if (rg) {
        Impl ia = a.impl(), iv = v.impl(), io = out.impl();
        record("add_rowvec", out, [ia, iv, io, rows, cols]() {
            const double* go = io->grad.data();
            if (ia->requires_grad) {
                ia->ensure_grad();
                for (std::size_t i = 0; i < rows * cols; ++i) ia->grad[i] += go[i];
            }
            if (iv->requires_grad) {
                iv->ensure_grad();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) iv->grad[c] += go[r * cols + c];
            }
        });
    }
    return out;
}

Tensor affine(const Tensor& a, double s, double shift) {
    const bool rg = should_record({&a});
    Tensor out = make_op_output(a.shape(), rg);
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.at(i) = s * a.at(i) + shift;
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        record("affine", out, [ia, io, s, n]() {
            ia->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) ia->grad[i] += s * io->grad[i];
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s) { return affine(a, s, 0.0); }

Tensor pow_scalar(const Tensor& a, double exponent) {
    const bool rg = should_record({&a});
    Tensor out = make_op_output(a.shape(), rg);
    const std::size_t n = a.numel();
    if (exponent == 0.0) {
        for (std::size_t i = 0; i < n; ++i) out.at(i) = 1.0;
        if (rg) record("pow_scalar", out, []() {});
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double base = std::max(a.at(i), 0.0);
        out.at(i) = std::pow(base, exponent);
    }
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        record("pow_scalar", out, [ia, io, exponent, n]() {
            ia->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const double base = std::max(ia->data[i], 0.0);
                const double d = (base == 0.0 && exponent < 1.0)
                                     ? 0.0
                                     : exponent * std::pow(base, exponent - 1.0);
                ia->grad[i] += io->grad[i] * d;
            }
        });
    }
    return out;
}

Tensor log_clamped(const Tensor& a, double floor) {
    const bool rg = should_record({&a});
    Tensor out = make_op_output(a.shape(), rg);
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.at(i) = std::log(std::max(a.at(i), floor));
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        record("log_clamped", out, [ia, io, floor, n]() {
            ia->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                if (ia->data[i] > floor) ia->grad[i] += io->grad[i] / ia->data[i];
            }
        });
    }
    return out;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
    const bool rg = should_record({&a});
    Tensor out = make_op_output(a.shape(), rg);
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a.at(i);
        const double u = kGeluC * (x + kGeluA * x * x * x);
        out.at(i) = 0.5 * x * (1.0 + std::tanh(u));
    }
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        record("gelu", out, [ia, io, n]() {
            ia->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const double x = ia->data[i];
                const double u = kGeluC * (x + kGeluA * x * x * x);
                const double t = std::tanh(u);
                const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
                const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                ia->grad[i] += io->grad[i] * d;
            }
        });
    }
    return out;
}

Tensor softmax_lastdim(const Tensor& a) {
    check_finite(a, "softmax_lastdim");
    auto [rows, cols] = rows_cols(a);
    const bool rg = should_record({&a});
    Tensor out = make_op_output(a.shape(), rg);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data().data() + r * cols;
        double* y = out.data().data() + r * cols;
        double mx = x[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            y[c] = std::exp(x[c] - mx);
            total += y[c];
        }
        for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
    }
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        record("softmax_lastdim", out, [ia, io, rows, cols]() {
            ia->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* p = io->data.data() + r * cols;
                const double* go = io->grad.data() + r * cols;
                double* ga = ia->grad.data() + r * cols;
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) dot += p[c] * go[c];
                for (std::size_t c = 0; c < cols; ++c) ga[c] += p[c] * (go[c] - dot);
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
    auto [rows, cols] = rows_cols(a);
    if (gamma.numel() != cols || beta.numel() != cols) {
        throw InputError("layer_norm: gamma/beta length must equal last dim " + std::to_string(cols));
    }
    if (eps <= 0.0) throw InputError("layer_norm: eps must be positive");
    const bool rg = should_record({&a, &gamma, &beta});
    Tensor out = make_op_output(a.shape(), rg);
    // stash per-row statistics for backward
    auto mu = std::make_shared<std::vector<double>>(rows);
    auto rstd = std::make_shared<std::vector<double>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data().data() + r * cols;
        double m = 0.0;
        for (std::size_t c = 0; c < cols; ++c) m += x[c];
        m /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) var += (x[c] - m) * (x[c] - m);
        var /= static_cast<double>(cols);  // biased, GPT convention
        const double rs = 1.0 / std::sqrt(var + eps);
        (*mu)[r] = m;
        (*rstd)[r] = rs;
        double* y = out.data().data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            y[c] = (x[c] - m) * rs * gamma.at(c) + beta.at(c);
        }
    }
    if (rg) {
        Impl ia = a.impl(), ig = gamma.impl(), ib = beta.impl(), io = out.impl();
        record("layer_norm", out, [ia, ig, ib, io, mu, rstd, rows, cols]() {
            const double dcols = static_cast<double>(cols);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* x = ia->data.data() + r * cols;
                const double* go = io->grad.data() + r * cols;
                const double m = (*mu)[r];
                const double rs = (*rstd)[r];
                if (ib->requires_grad) {
                    ib->ensure_grad();
                    for (std::size_t c = 0; c < cols; ++c) ib->grad[c] += go[c];
                }
                if (ig->requires_grad) {
                    ig->ensure_grad();
                    for (std::size_t c = 0; c < cols; ++c) ig->grad[c] += go[c] * (x[c] - m) * rs;
                }
                if (ia->requires_grad) {
                    ia->ensure_grad();
                    double* ga = ia->grad.data() + r * cols;
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double xhat = (x[c] - m) * rs;
                        const double dxhat = go[c] * ig->data[c];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    for (std::size_t c = 0; c < cols; ++c) {
                        const double xhat = (x[c] - m) * rs;
                        const double dxhat = go[c] * ig->data[c];
                        ga[c] += rs * (dxhat - sum_dxhat / dcols - xhat * sum_dxhat_xhat / dcols);
                    }
                }
            }
        });
    }
    return out;
}

Tensor dropout(const Tensor& a, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw InputError("dropout: p must be in [0,1)");
    if (p == 0.0) return affine(a, 1.0, 0.0);
    const bool rg = should_record({&a});
    Tensor out = make_op_output(a.shape(), rg);
    const std::size_t n = a.numel();
    const double keep = 1.0 - p;
    auto mask = std::make_shared<std::vector<double>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        (*mask)[i] = rng.uniform() < p ? 0.0 : 1.0 / keep;
        out.at(i) = a.at(i) * (*mask)[i];
    }
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        record("dropout", out, [ia, io, mask, n]() {
            ia->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) ia->grad[i] += io->grad[i] * (*mask)[i];
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    const bool rg = should_record({&a});
    Tensor out = make_op_output({1}, rg);
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    out.at(0) = acc;
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        record("sum", out, [ia, io]() {
            ia->ensure_grad();
            const double g = io->grad[0];
            for (double& gv : ia->grad) gv += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.numel());
    return scale(sum(a), inv);
}

Tensor slice_rows(const Tensor& a, int start, int count) {
    auto [rows, cols] = rows_cols(a);
    if (start < 0 || count <= 0 || static_cast<std::size_t>(start + count) > rows) {
        throw InputError("slice_rows: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + std::to_string(rows) + " rows");
    }
    const bool rg = should_record({&a});
    Tensor out = make_op_output({count, static_cast<int>(cols)}, rg);
    std::copy_n(a.data().data() + static_cast<std::size_t>(start) * cols,
                static_cast<std::size_t>(count) * cols, out.data().data());
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        const std::size_t off = static_cast<std::size_t>(start) * cols;
        const std::size_t len = static_cast<std::size_t>(count) * cols;
        record("slice_rows", out, [ia, io, off, len]() {
            ia->ensure_grad();
            for (std::size_t i = 0; i < len; ++i) ia->grad[off + i] += io->grad[i];
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw InputError("concat_rows: empty input");
    const std::size_t cols = rows_cols(parts.front()).second;
    std::size_t rows = 0;
    bool rgrad = false;
    for (const Tensor& t : parts) {
        if (rows_cols(t).second != cols) {
            throw InputError("concat_rows: mismatched column counts");
        }
        rows += rows_cols(t).first;
        rgrad = rgrad || t.requires_grad();
    }
    const bool rg = g_grad_enabled && rgrad;
    Tensor out = make_op_output({static_cast<int>(rows), static_cast<int>(cols)}, rg);
    std::size_t off = 0;
    std::vector<std::pair<Impl, std::size_t>> spans;
    for (const Tensor& t : parts) {
        std::copy_n(t.data().data(), t.numel(), out.data().data() + off);
        spans.emplace_back(t.impl(), off);
        off += t.numel();
    }
    if (rg) {
        Impl io = out.impl();
        record("concat_rows", out, [io, spans]() {
            for (const auto& [ia, start] : spans) {
                if (!ia->requires_grad) continue;
                ia->ensure_grad();
                for (std::size_t i = 0; i < ia->data.size(); ++i) ia->grad[i] += io->grad[start + i];
            }
        });
    }
    return out;
}

Tensor take_per_row(const Tensor& a, const std::vector<int>& idx) {
    auto [rows, cols] = rows_cols(a);
    if (idx.size() != rows) throw InputError("take_per_row: index count must equal row count");
    const bool rg = should_record({&a});
    Tensor out = make_op_output({static_cast<int>(rows)}, rg);
    for (std::size_t r = 0; r < rows; ++r) {
        const int j = idx[r];
        if (j < 0 || static_cast<std::size_t>(j) >= cols) {
            throw InputError("take_per_row: index " + std::to_string(j) + " out of range [0, " +
                             std::to_string(cols) + ")");
        }
        out.at(r) = a.at(r * cols + static_cast<std::size_t>(j));
    }
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        auto ids = std::make_shared<std::vector<int>>(idx);
        record("take_per_row", out, [ia, io, ids, cols]() {
            ia->ensure_grad();
            for (std::size_t r = 0; r < ids->size(); ++r) {
                ia->grad[r * cols + static_cast<std::size_t>((*ids)[r])] += io->grad[r];
            }
        });
    }
    return out;
}

Tensor take_segment_per_row(const Tensor& a, const std::vector<int>& idx, int seg) {
    auto [rows, cols] = rows_cols(a);
    if (seg <= 0 || cols % static_cast<std::size_t>(seg) != 0) {
        throw InputError("take_segment_per_row: segment " + std::to_string(seg) +
                         " does not divide row width " + std::to_string(cols));
    }
    if (idx.size() != rows) throw InputError("take_segment_per_row: index count must equal row count");
    const std::size_t groups = cols / static_cast<std::size_t>(seg);
    const bool rg = should_record({&a});
    Tensor out = make_op_output({static_cast<int>(rows), seg}, rg);
    for (std::size_t r = 0; r < rows; ++r) {
        const int j = idx[r];
        if (j < 0 || static_cast<std::size_t>(j) >= groups) {
            throw InputError("take_segment_per_row: index " + std::to_string(j) + " out of range [0, " +
                             std::to_string(groups) + ")");
        }
        std::copy_n(a.data().data() + r * cols + static_cast<std::size_t>(j * seg),
                    static_cast<std::size_t>(seg), out.data().data() + r * static_cast<std::size_t>(seg));
    }
    if (rg) {
        Impl ia = a.impl(), io = out.impl();
        auto ids = std::make_shared<std::vector<int>>(idx);
        const std::size_t segsz = static_cast<std::size_t>(seg);
        record("take_segment_per_row", out, [ia, io, ids, cols, segsz]() {
            ia->ensure_grad();
            for (std::size_t r = 0; r < ids->size(); ++r) {
                const std::size_t off = r * cols + static_cast<std::size_t>((*ids)[r]) * segsz;
                for (std::size_t c = 0; c < segsz; ++c) ia->grad[off + c] += io->grad[r * segsz + c];
            }
        });
    }
    return out;
}

Tensor causal_self_attention(const Tensor& qkv, int batch, int seq_len, int n_heads,
                             double dropout_p, bool train_mode, Rng& rng) {
    if (qkv.rank() != 2) throw InputError("causal_self_attention: qkv must be rank 2");
    const std::size_t rows = static_cast<std::size_t>(qkv.dim(0));
    const std::size_t width = static_cast<std::size_t>(qkv.dim(1));
    if (rows != static_cast<std::size_t>(batch) * static_cast<std::size_t>(seq_len)) {
        throw InputError("causal_self_attention: row count " + std::to_string(rows) +
                         " != batch*seq_len");
    }
    if (width % 3 != 0) throw InputError("causal_self_attention: qkv width must be 3*embed");
    const std::size_t embed = width / 3;
    if (n_heads <= 0 || embed % static_cast<std::size_t>(n_heads) != 0) {
        throw InputError("causal_self_attention: heads must divide embed width");
    }
    const std::size_t hd = embed / static_cast<std::size_t>(n_heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    const std::size_t T = static_cast<std::size_t>(seq_len);
    const std::size_t B = static_cast<std::size_t>(batch);
    const std::size_t H = static_cast<std::size_t>(n_heads);

    const bool rg = should_record({&qkv});
    Tensor out = make_op_output({qkv.dim(0), static_cast<int>(embed)}, rg);

    // att[b,h,i,j] softmax weights (pre-dropout) and the dropout multiplier
    auto att = std::make_shared<std::vector<double>>(B * H * T * T, 0.0);
    std::shared_ptr<std::vector<double>> keep;
    const bool use_dropout = train_mode && dropout_p > 0.0;
    if (use_dropout) keep = std::make_shared<std::vector<double>>(B * H * T * T, 0.0);

    const double* px = qkv.data().data();
    double* po = out.data().data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t qoff = h * hd;
            const std::size_t koff = embed + h * hd;
            const std::size_t voff = 2 * embed + h * hd;
            double* a = att->data() + (b * H + h) * T * T;
            for (std::size_t i = 0; i < T; ++i) {
                const double* qi = px + (b * T + i) * width + qoff;
                // scores over visible positions j <= i, max-subtracted softmax
                double mx = -1e300;
                for (std::size_t j = 0; j <= i; ++j) {
                    const double* kj = px + (b * T + j) * width + koff;
                    double s = 0.0;
                    for (std::size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
                    s *= inv_sqrt;
                    a[i * T + j] = s;
                    mx = std::max(mx, s);
                }
                double total = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    a[i * T + j] = std::exp(a[i * T + j] - mx);
                    total += a[i * T + j];
                }
                for (std::size_t j = 0; j <= i; ++j) a[i * T + j] /= total;
                double* orow = po + (b * T + i) * embed + h * hd;
                for (std::size_t j = 0; j <= i; ++j) {
                    double w = a[i * T + j];
                    if (use_dropout) {
                        const double m = rng.uniform() < dropout_p ? 0.0 : 1.0 / (1.0 - dropout_p);
                        (*keep)[(b * H + h) * T * T + i * T + j] = m;
                        w *= m;
                    }
                    if (w == 0.0) continue;
                    const double* vj = px + (b * T + j) * width + voff;
                    for (std::size_t c = 0; c < hd; ++c) orow[c] += w * vj[c];
                }
            }
        }
    }

    if (rg) {
        Impl ix = qkv.impl(), io = out.impl();
        record("causal_self_attention", out,
               [ix, io, att, keep, use_dropout, B, H, T, hd, embed, width, inv_sqrt]() {
                   ix->ensure_grad();
                   const double* px2 = ix->data.data();
                   double* gx = ix->grad.data();
                   const double* go = io->grad.data();
                   std::vector<double> da(T * T);
                   for (std::size_t b = 0; b < B; ++b) {
                       for (std::size_t h = 0; h < H; ++h) {
                           const std::size_t qoff = h * hd;
                           const std::size_t koff = embed + h * hd;
                           const std::size_t voff = 2 * embed + h * hd;
                           const double* a = att->data() + (b * H + h) * T * T;
                           const double* m = use_dropout ? keep->data() + (b * H + h) * T * T : nullptr;
                           std::fill(da.begin(), da.end(), 0.0);
                           for (std::size_t i = 0; i < T; ++i) {
                               const double* gorow = go + (b * T + i) * embed + h * hd;
                               for (std::size_t j = 0; j <= i; ++j) {
                                   const double w = a[i * T + j] * (use_dropout ? m[i * T + j] : 1.0);
                                   const double* vj = px2 + (b * T + j) * width + voff;
                                   double* gv = gx + (b * T + j) * width + voff;
                                   double dot = 0.0;
                                   for (std::size_t c = 0; c < hd; ++c) {
                                       gv[c] += w * gorow[c];  // dV
                                       dot += gorow[c] * vj[c];
                                   }
                                   da[i * T + j] = dot * (use_dropout ? m[i * T + j] : 1.0);
                               }
                               // softmax jacobian within the visible prefix
                               double dsum = 0.0;
                               for (std::size_t j = 0; j <= i; ++j) dsum += da[i * T + j] * a[i * T + j];
                               const double* qi = px2 + (b * T + i) * width + qoff;
                               double* gq = gx + (b * T + i) * width + qoff;
                               for (std::size_t j = 0; j <= i; ++j) {
                                   const double ds = a[i * T + j] * (da[i * T + j] - dsum) * inv_sqrt;
                                   if (ds == 0.0) continue;
                                   const double* kj = px2 + (b * T + j) * width + koff;
                                   double* gk = gx + (b * T + j) * width + koff;
                                   for (std::size_t c = 0; c < hd; ++c) {
                                       gq[c] += ds * kj[c];
                                       gk[c] += ds * qi[c];
                                   }
                               }
                           }
                       }
                   }
               });
    }
    return out;
}

// ---- gradient checking --------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double step, double tol) {
    if (step <= 0.0) throw InputError("grad_check: step must be positive");

    const auto eval = [&f]() {
        NoGradGuard ng;
        Tensor v = f();
        if (v.numel() != 1) throw ContractError("grad_check: f must return a scalar");
        return v.item();
    };
    const double v1 = eval();
    const double v2 = eval();
    if (v1 != v2) {
        throw ContractError("grad_check: f is not deterministic (" + std::to_string(v1) + " vs " +
                            std::to_string(v2) + ")");
    }

    // analytic pass on a fresh tape
    Tape& tp = tape();
    tp.clear();
    for (const auto& [name, p] : params) {
        Tensor handle = p;
        handle.zero_grad();
    }
    Tensor loss = f();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& [name, p] : params) {
        auto g = p.grad();
        analytic.emplace_back(g.begin(), g.end());
    }
    tp.clear();

    GradCheckReport report;
    report.passed = true;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi].second;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double saved = p.at(i);
            p.at(i) = saved + step;
            const double fp = eval();
            p.at(i) = saved - step;
            const double fm = eval();
            p.at(i) = saved;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 0.01});
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = params[pi].first;
                report.worst_entry = i;
            }
        }
    }
    report.passed = report.max_rel_err <= tol;
    return report;
}

}  // namespace bet
