#include "rcdgcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "rcdgcn/error.hpp"

namespace rcdgcn {

namespace {

thread_local std::vector<Tape*> g_tape_stack;

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(what) + ": non-finite value in forward pass");
        }
    }
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data,
                    bool requires_grad) {
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("tensor shape has zero dimension " + shape_str(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("shape " + shape_str(shape) + " does not match buffer of " +
                             std::to_string(data.size()) + " values");
    }
    check_finite(data, "tensor");
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double fill, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), fill);
    return from(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

std::vector<double>& Tensor::mutable_values() {
    if (n_->is_op) {
        throw Error("mutable_values: operation outputs are immutable; only leaves may be updated");
    }
    return n_->value;
}

double Tensor::item() const {
    if (numel() != 1) {
        throw DimensionError("item: tensor of shape " + shape_str(shape()) + " is not scalar");
    }
    return n_->value[0];
}

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) {
        throw Error("grad: no gradient has been populated for this tensor");
    }
    return n_->grad;
}

void Tensor::zero_grad() {
    n_->ensure_grad();
    std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

// ---- Tape ------------------------------------------------------------------

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
    if (!g_tape_stack.empty() && g_tape_stack.back() == this) {
        g_tape_stack.pop_back();
    }
}

Tape* Tape::active() {
    return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void Tape::backward(const Tensor& loss) {
    if (used_) {
        throw TapeError("backward called twice on the same tape; run a fresh forward pass");
    }
    if (nodes_.empty()) {
        throw TapeError("backward on an empty tape");
    }
    if (loss.numel() != 1) {
        throw DimensionError("backward: loss must be scalar, got shape " +
                             shape_str(loss.shape()));
    }
    used_ = true;

    // Everything the loss depends on, found through parent edges.
    std::unordered_set<const detail::Node*> reachable;
    std::vector<const detail::Node*> stack{loss.n_.get()};
    while (!stack.empty()) {
        const detail::Node* n = stack.back();
        stack.pop_back();
        if (!reachable.insert(n).second) continue;
        for (const auto& p : n->parents) stack.push_back(p.get());
    }

    loss.n_->ensure_grad();
    loss.n_->grad[0] += 1.0;

    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        detail::Node& n = **it;
        if (!n.backprop || reachable.find(&n) == reachable.end()) continue;
        n.ensure_grad();
        n.backprop(n);
    }
}

// ---- op construction -------------------------------------------------------

Tensor make_op(std::vector<std::size_t> shape, std::vector<double> value,
               std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backprop, const char* opname) {
    check_finite(value, opname);
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->is_op = true;

    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();

    Tape* tape = Tape::active();
    if (rg && tape != nullptr) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.n_);
        n->backprop = std::move(backprop);
        tape->nodes_.push_back(n);
    }
    return Tensor(std::move(n));
}

// ---- primitives ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> y(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            const double* brow = bv.data() + kk * n;
            double* yrow = y.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) yrow[j] += aik * brow[j];
        }
    }
    return make_op(
        {m, n}, std::move(y), {a, b},
        [m, k, n](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            detail::Node& pb = *self.parents[1];
            const auto& dy = self.grad;
            if (pa.requires_grad) {
                pa.ensure_grad();
                // dA = dY . B^T
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double s = 0.0;
                        const double* dyrow = dy.data() + i * n;
                        const double* brow = pb.value.data() + kk * n;
                        for (std::size_t j = 0; j < n; ++j) s += dyrow[j] * brow[j];
                        pa.grad[i * k + kk] += s;
                    }
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                // dB = A^T . dY
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double aik = pa.value[i * k + kk];
                        const double* dyrow = dy.data() + i * n;
                        double* dbrow = pb.grad.data() + kk * n;
                        for (std::size_t j = 0; j < n; ++j) dbrow[j] += aik * dyrow[j];
                    }
                }
            }
        },
        "matmul");
}

namespace {

enum class BinOp { add, sub, mul };

Tensor binary_elementwise(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
    const bool a_scalar = a.numel() == 1;
    const bool b_scalar = b.numel() == 1;
    if (a.shape() != b.shape() && !a_scalar && !b_scalar) {
        throw DimensionError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    const auto& av = a.values();
    const auto& bv = b.values();
    const std::size_t n = std::max(av.size(), bv.size());
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a_scalar ? av[0] : av[i];
        const double z = b_scalar ? bv[0] : bv[i];
        y[i] = op == BinOp::add ? x + z : op == BinOp::sub ? x - z : x * z;
    }
    auto shape = a_scalar ? b.shape() : a.shape();
    return make_op(
        std::move(shape), std::move(y), {a, b},
        [op, a_scalar, b_scalar, n](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            detail::Node& pb = *self.parents[1];
            const auto& dy = self.grad;
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const double g = op == BinOp::mul
                                         ? dy[i] * (b_scalar ? pb.value[0] : pb.value[i])
                                         : dy[i];
                    pa.grad[a_scalar ? 0 : i] += g;
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    double g = dy[i];
                    if (op == BinOp::sub) g = -g;
                    if (op == BinOp::mul) g = dy[i] * (a_scalar ? pa.value[0] : pa.value[i]);
                    pb.grad[b_scalar ? 0 : i] += g;
                }
            }
        },
        name);
}

Tensor unary_elementwise(const Tensor& a, double (*fwd)(double),
                         double (*dfromy)(double), const char* name) {
    const auto& av = a.values();
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = fwd(av[i]);
    return make_op(
        a.shape(), std::move(y), {a},
        [dfromy](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.value.size(); ++i) {
                pa.grad[i] += self.grad[i] * dfromy(self.value[i]);
            }
        },
        name);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::mul, "mul"); }

Tensor add_scalar(const Tensor& a, double c) {
    const auto& av = a.values();
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] + c;
    return make_op(
        a.shape(), std::move(y), {a},
        [](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.value.size(); ++i) pa.grad[i] += self.grad[i];
        },
        "add_scalar");
}

Tensor mul_scalar(const Tensor& a, double c) {
    const auto& av = a.values();
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] * c;
    return make_op(
        a.shape(), std::move(y), {a},
        [c](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.value.size(); ++i) pa.grad[i] += self.grad[i] * c;
        },
        "mul_scalar");
}

Tensor tanh(const Tensor& a) {
    return unary_elementwise(
        a, [](double x) { return std::tanh(x); },
        [](double y) { return 1.0 - y * y; }, "tanh");
}

Tensor sigmoid(const Tensor& a) {
    return unary_elementwise(
        a, [](double x) { return stable_sigmoid(x); },
        [](double y) { return y * (1.0 - y); }, "sigmoid");
}

Tensor relu(const Tensor& a) {
    return unary_elementwise(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double y) { return y > 0.0 ? 1.0 : 0.0; }, "relu");
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    return make_op(
        {1}, {s}, {a},
        [](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const double g = self.grad[0];
            for (double& d : pa.grad) d += g;
        },
        "sum");
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    const double inv = 1.0 / static_cast<double>(a.numel());
    return make_op(
        {1}, {s * inv}, {a},
        [inv](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const double g = self.grad[0] * inv;
            for (double& d : pa.grad) d += g;
        },
        "mean");
}

namespace {

// Shared core: softmax over the masked entries of one row. Masked outputs
// are exactly zero; unmasked outputs are exp-normalized with max-subtraction.
void masked_softmax_row(const double* x, const std::uint8_t* m, std::size_t n, double* y) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (m[i] && x[i] > mx) mx = x[i];
    }
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = m[i] ? std::exp(x[i] - mx) : 0.0;
        z += y[i];
    }
    const double inv = 1.0 / z;
    for (std::size_t i = 0; i < n; ++i) y[i] *= inv;
}

void masked_softmax_row_backward(const double* y, const double* dy, std::size_t n, double* dx) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += dy[i] * y[i];
    for (std::size_t i = 0; i < n; ++i) dx[i] += y[i] * (dy[i] - s);
}

}  // namespace

Tensor softmax_masked(const Tensor& scores, const std::vector<std::uint8_t>& mask) {
    if (scores.shape().size() != 1 || scores.numel() != mask.size()) {
        throw DimensionError("softmax_masked: scores " + shape_str(scores.shape()) +
                             " vs mask of " + std::to_string(mask.size()) + " entries");
    }
    const std::size_t n = mask.size();
    bool any = false;
    for (auto m : mask) any = any || (m != 0);
    if (!any) {
        throw DegenerateMaskError("softmax_masked: mask admits no entries");
    }
    std::vector<double> y(n);
    masked_softmax_row(scores.values().data(), mask.data(), n, y.data());
    return make_op(
        {n}, std::move(y), {scores},
        [n](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            masked_softmax_row_backward(self.value.data(), self.grad.data(), n, pa.grad.data());
        },
        "softmax_masked");
}

Tensor masked_row_softmax(const Tensor& scores, const BoolMatrix& mask, bool allow_empty_rows) {
    if (scores.shape().size() != 2 || scores.shape()[0] != mask.rows ||
        scores.shape()[1] != mask.cols) {
        throw DimensionError("masked_row_softmax: scores " + shape_str(scores.shape()) +
                             " vs mask " + std::to_string(mask.rows) + "x" +
                             std::to_string(mask.cols));
    }
    const std::size_t m = mask.rows, n = mask.cols;
    std::vector<double> y(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        bool any = false;
        for (std::size_t j = 0; j < n; ++j) any = any || (mask.at(i, j) != 0);
        if (!any) {
            if (!allow_empty_rows) {
                throw DegenerateMaskError("masked_row_softmax: row " + std::to_string(i) +
                                          " admits no entries");
            }
            continue;  // all-zero row
        }
        masked_softmax_row(scores.values().data() + i * n, mask.v.data() + i * n, n,
                           y.data() + i * n);
    }
    return make_op(
        {m, n}, std::move(y), {scores},
        [m, n](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                masked_softmax_row_backward(self.value.data() + i * n,
                                            self.grad.data() + i * n, n,
                                            pa.grad.data() + i * n);
            }
        },
        "masked_row_softmax");
}

Tensor apply_mask(const Tensor& a, const BoolMatrix& mask) {
    if (a.shape().size() != 2 || a.shape()[0] != mask.rows || a.shape()[1] != mask.cols) {
        throw DimensionError("apply_mask: tensor " + shape_str(a.shape()) + " vs mask " +
                             std::to_string(mask.rows) + "x" + std::to_string(mask.cols));
    }
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = mask.v[i] ? a.values()[i] : 0.0;
    }
    auto keep = mask.v;
    return make_op(
        a.shape(), std::move(y), {a},
        [keep = std::move(keep)](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.value.size(); ++i) {
                if (keep[i]) pa.grad[i] += self.grad[i];
            }
        },
        "apply_mask");
}

Tensor causal_dilated_conv(const Tensor& x, const Tensor& taps, std::size_t dilation) {
    const auto& xs = x.shape();
    if (xs.size() != 2 && xs.size() != 3) {
        throw DimensionError("causal_dilated_conv: input must be [Q,C] or [Q,N,C], got " +
                             shape_str(xs));
    }
    if (taps.shape().size() != 3) {
        throw DimensionError("causal_dilated_conv: taps must be [K+1,C_in,C_out], got " +
                             shape_str(taps.shape()));
    }
    if (dilation == 0) {
        throw DimensionError("causal_dilated_conv: dilation must be >= 1");
    }
    const bool rank2 = xs.size() == 2;
    const std::size_t q = xs[0];
    const std::size_t nn = rank2 ? 1 : xs[1];
    const std::size_t cin = rank2 ? xs[1] : xs[2];
    const std::size_t k1 = taps.shape()[0];
    const std::size_t cout = taps.shape()[2];
    if (taps.shape()[1] != cin) {
        throw DimensionError("causal_dilated_conv: input channels " + shape_str(xs) +
                             " vs taps " + shape_str(taps.shape()));
    }

    const auto& xv = x.values();
    const auto& fv = taps.values();
    std::vector<double> y(q * nn * cout, 0.0);
    for (std::size_t t = 0; t < q; ++t) {
        for (std::size_t i = 0; i < k1; ++i) {
            if (t < dilation * i) break;  // earlier taps read the zero padding
            const std::size_t tau = t - dilation * i;
            for (std::size_t node = 0; node < nn; ++node) {
                const double* xrow = xv.data() + (tau * nn + node) * cin;
                double* yrow = y.data() + (t * nn + node) * cout;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double xval = xrow[ci];
                    const double* frow = fv.data() + (i * cin + ci) * cout;
                    for (std::size_t co = 0; co < cout; ++co) yrow[co] += xval * frow[co];
                }
            }
        }
    }

    std::vector<std::size_t> yshape = rank2 ? std::vector<std::size_t>{q, cout}
                                            : std::vector<std::size_t>{q, nn, cout};
    return make_op(
        std::move(yshape), std::move(y), {x, taps},
        [q, nn, cin, cout, k1, dilation](detail::Node& self) {
            detail::Node& px = *self.parents[0];
            detail::Node& pf = *self.parents[1];
            const auto& dy = self.grad;
            const bool need_dx = px.requires_grad;
            const bool need_df = pf.requires_grad;
            if (need_dx) px.ensure_grad();
            if (need_df) pf.ensure_grad();
            if (!need_dx && !need_df) return;
            for (std::size_t t = 0; t < q; ++t) {
                for (std::size_t i = 0; i < k1; ++i) {
                    if (t < dilation * i) break;
                    const std::size_t tau = t - dilation * i;
                    for (std::size_t node = 0; node < nn; ++node) {
                        const double* dyrow = dy.data() + (t * nn + node) * cout;
                        const double* xrow = px.value.data() + (tau * nn + node) * cin;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double* frow = pf.value.data() + (i * cin + ci) * cout;
                            if (need_df) {
                                double* dfrow = pf.grad.data() + (i * cin + ci) * cout;
                                const double xval = xrow[ci];
                                for (std::size_t co = 0; co < cout; ++co) {
                                    dfrow[co] += xval * dyrow[co];
                                }
                            }
                            if (need_dx) {
                                double s = 0.0;
                                for (std::size_t co = 0; co < cout; ++co) {
                                    s += frow[co] * dyrow[co];
                                }
                                px.grad[(tau * nn + node) * cin + ci] += s;
                            }
                        }
                    }
                }
            }
        },
        "causal_dilated_conv");
}

Tensor time_slice(const Tensor& x, std::size_t t) {
    const auto& xs = x.shape();
    if (xs.size() != 3) {
        throw DimensionError("time_slice: expected [Q,N,C], got " + shape_str(xs));
    }
    if (t >= xs[0]) {
        throw DimensionError("time_slice: step " + std::to_string(t) + " out of " +
                             std::to_string(xs[0]));
    }
    const std::size_t n = xs[1], c = xs[2];
    const std::size_t block = n * c;
    std::vector<double> y(x.values().begin() + static_cast<std::ptrdiff_t>(t * block),
                          x.values().begin() + static_cast<std::ptrdiff_t>((t + 1) * block));
    return make_op(
        {n, c}, std::move(y), {x},
        [t, block](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t i = 0; i < block; ++i) pa.grad[t * block + i] += self.grad[i];
        },
        "time_slice");
}

Tensor stack_time(const std::vector<Tensor>& steps) {
    if (steps.empty()) {
        throw DimensionError("stack_time: no steps given");
    }
    const auto& s0 = steps[0].shape();
    if (s0.size() != 2) {
        throw DimensionError("stack_time: steps must be [N,C], got " + shape_str(s0));
    }
    const std::size_t q = steps.size();
    const std::size_t block = steps[0].numel();
    std::vector<double> y;
    y.reserve(q * block);
    for (const auto& s : steps) {
        if (s.shape() != s0) {
            throw DimensionError("stack_time: inconsistent step shapes " + shape_str(s0) +
                                 " vs " + shape_str(s.shape()));
        }
        y.insert(y.end(), s.values().begin(), s.values().end());
    }
    return make_op(
        {q, s0[0], s0[1]}, std::move(y), steps,
        [block](detail::Node& self) {
            for (std::size_t t = 0; t < self.parents.size(); ++t) {
                detail::Node& p = *self.parents[t];
                if (!p.requires_grad) continue;
                p.ensure_grad();
                for (std::size_t i = 0; i < block; ++i) p.grad[i] += self.grad[t * block + i];
            }
        },
        "stack_time");
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[0] != b.shape()[0]) {
        throw DimensionError("concat_cols: incompatible shapes " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    const std::size_t n = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
    std::vector<double> y(n * (p + q));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) y[i * (p + q) + j] = a.values()[i * p + j];
        for (std::size_t j = 0; j < q; ++j) y[i * (p + q) + p + j] = b.values()[i * q + j];
    }
    return make_op(
        {n, p + q}, std::move(y), {a, b},
        [n, p, q](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            detail::Node& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < p; ++j) {
                        pa.grad[i * p + j] += self.grad[i * (p + q) + j];
                    }
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < q; ++j) {
                        pb.grad[i * q + j] += self.grad[i * (p + q) + p + j];
                    }
                }
            }
        },
        "concat_cols");
}

Tensor outer_sum(const Tensor& u, const Tensor& v) {
    const auto col_len = [](const Tensor& t) -> std::size_t {
        const auto& s = t.shape();
        if (s.size() == 1) return s[0];
        if (s.size() == 2 && s[1] == 1) return s[0];
        throw DimensionError("outer_sum: expected a length-N vector, got " + shape_str(s));
    };
    const std::size_t n = col_len(u);
    if (col_len(v) != n) {
        throw DimensionError("outer_sum: length mismatch " + shape_str(u.shape()) + " vs " +
                             shape_str(v.shape()));
    }
    std::vector<double> y(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) y[i * n + j] = u.values()[i] + v.values()[j];
    }
    return make_op(
        {n, n}, std::move(y), {u, v},
        [n](detail::Node& self) {
            detail::Node& pu = *self.parents[0];
            detail::Node& pv = *self.parents[1];
            if (pu.requires_grad) {
                pu.ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += self.grad[i * n + j];
                    pu.grad[i] += s;
                }
            }
            if (pv.requires_grad) {
                pv.ensure_grad();
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < n; ++i) s += self.grad[i * n + j];
                    pv.grad[j] += s;
                }
            }
        },
        "outer_sum");
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape) +
                             " changes element count");
    }
    std::vector<double> y = a.values();
    return make_op(
        std::move(shape), std::move(y), {a},
        [](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.value.size(); ++i) pa.grad[i] += self.grad[i];
        },
        "reshape");
}

Tensor split_horizon(const Tensor& a, std::size_t t_steps, std::size_t p) {
    if (a.shape().size() != 2 || a.shape()[1] != t_steps * p) {
        throw DimensionError("split_horizon: expected [N," + std::to_string(t_steps * p) +
                             "], got " + shape_str(a.shape()));
    }
    const std::size_t n = a.shape()[0];
    std::vector<double> y(t_steps * n * p);
    for (std::size_t node = 0; node < n; ++node) {
        for (std::size_t t = 0; t < t_steps; ++t) {
            for (std::size_t c = 0; c < p; ++c) {
                y[(t * n + node) * p + c] = a.values()[node * t_steps * p + t * p + c];
            }
        }
    }
    return make_op(
        {t_steps, n, p}, std::move(y), {a},
        [t_steps, n, p](detail::Node& self) {
            detail::Node& pa = *self.parents[0];
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (std::size_t node = 0; node < n; ++node) {
                for (std::size_t t = 0; t < t_steps; ++t) {
                    for (std::size_t c = 0; c < p; ++c) {
                        pa.grad[node * t_steps * p + t * p + c] +=
                            self.grad[(t * n + node) * p + c];
                    }
                }
            }
        },
        "split_horizon");
}

Tensor graph_conv(const Tensor& x, const std::vector<Tensor>& attention,
                  const std::vector<Tensor>& weights, Activation act) {
    if (attention.empty() || attention.size() != weights.size()) {
        throw DimensionError("graph_conv: need one weight matrix per attention matrix, got " +
                             std::to_string(attention.size()) + " vs " +
                             std::to_string(weights.size()));
    }
    if (x.shape().size() != 2) {
        throw DimensionError("graph_conv: state must be [N,C], got " + shape_str(x.shape()));
    }
    const std::size_t n = x.shape()[0], cin = x.shape()[1];
    const std::size_t cout = weights[0].shape().size() == 2 ? weights[0].shape()[1] : 0;
    for (const auto& a : attention) {
        if (a.shape() != std::vector<std::size_t>{n, n}) {
            throw DimensionError("graph_conv: attention must be [N,N], got " +
                                 shape_str(a.shape()));
        }
    }
    for (const auto& w : weights) {
        if (w.shape() != std::vector<std::size_t>{cin, cout} || cout == 0) {
            throw DimensionError("graph_conv: weights must be [C_in,C_out], got " +
                                 shape_str(w.shape()) + " for state " + shape_str(x.shape()));
        }
    }

    const std::size_t hops = attention.size();
    const auto mm = [](const double* a, const double* b, std::size_t m, std::size_t k,
                       std::size_t nn, double* y) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = a[i * k + kk];
                const double* brow = b + kk * nn;
                double* yrow = y + i * nn;
                for (std::size_t j = 0; j < nn; ++j) yrow[j] += aik * brow[j];
            }
        }
    };

    std::vector<double> pre(n * cout, 0.0);
    std::vector<double> xw(n * cout);
    for (std::size_t g = 0; g < hops; ++g) {
        std::fill(xw.begin(), xw.end(), 0.0);
        mm(x.values().data(), weights[g].values().data(), n, cin, cout, xw.data());
        mm(attention[g].values().data(), xw.data(), n, n, cout, pre.data());
    }
    std::vector<double> y(n * cout);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = act == Activation::relu ? (pre[i] > 0.0 ? pre[i] : 0.0) : pre[i];
    }

    std::vector<Tensor> parents;
    parents.reserve(1 + 2 * hops);
    parents.push_back(x);
    for (const auto& a : attention) parents.push_back(a);
    for (const auto& w : weights) parents.push_back(w);

    return make_op(
        {n, cout}, std::move(y), std::move(parents),
        [n, cin, cout, hops, act, mm](detail::Node& self) {
            detail::Node& px = *self.parents[0];
            // dPre from the activation; relu derivative read off the output.
            std::vector<double> dpre(self.grad);
            if (act == Activation::relu) {
                for (std::size_t i = 0; i < dpre.size(); ++i) {
                    if (self.value[i] <= 0.0) dpre[i] = 0.0;
                }
            }
            std::vector<double> tmp(n * cout);
            std::vector<double> xw(n * cout);
            for (std::size_t g = 0; g < hops; ++g) {
                detail::Node& pa = *self.parents[1 + g];
                detail::Node& pw = *self.parents[1 + hops + g];
                if (px.requires_grad || pw.requires_grad) {
                    // tmp = A^T . dPre
                    std::fill(tmp.begin(), tmp.end(), 0.0);
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t kk = 0; kk < n; ++kk) {
                            const double a_ki = pa.value[kk * n + i];
                            const double* dr = dpre.data() + kk * cout;
                            double* tr = tmp.data() + i * cout;
                            for (std::size_t j = 0; j < cout; ++j) tr[j] += a_ki * dr[j];
                        }
                    }
                }
                if (pw.requires_grad) {
                    pw.ensure_grad();
                    // dW += X^T . tmp
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double xv = px.value[i * cin + ci];
                            const double* tr = tmp.data() + i * cout;
                            double* dw = pw.grad.data() + ci * cout;
                            for (std::size_t j = 0; j < cout; ++j) dw[j] += xv * tr[j];
                        }
                    }
                }
                if (px.requires_grad) {
                    px.ensure_grad();
                    // dX += tmp . W^T
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            double s = 0.0;
                            const double* tr = tmp.data() + i * cout;
                            const double* wr = pw.value.data() + ci * cout;
                            for (std::size_t j = 0; j < cout; ++j) s += tr[j] * wr[j];
                            px.grad[i * cin + ci] += s;
                        }
                    }
                }
                if (pa.requires_grad) {
                    pa.ensure_grad();
                    // dA += dPre . (X.W)^T
                    std::fill(xw.begin(), xw.end(), 0.0);
                    mm(px.value.data(), pw.value.data(), n, cin, cout, xw.data());
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                            double s = 0.0;
                            const double* dr = dpre.data() + i * cout;
                            const double* xr = xw.data() + j * cout;
                            for (std::size_t c = 0; c < cout; ++c) s += dr[c] * xr[c];
                            pa.grad[i * n + j] += s;
                        }
                    }
                }
            }
        },
        "graph_conv");
}

}  // namespace rcdgcn
