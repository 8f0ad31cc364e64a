#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rcdgcn/mask.hpp"

namespace rcdgcn {

namespace detail {

struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on first use, persists across tapes
    bool requires_grad = false;
    bool is_op = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // pulls this->grad into parents

    std::size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

/**
 * Dense row-major tensor of 64-bit floats participating in a define-by-run
 * autodiff graph. A Tensor is a cheap handle; copies share the underlying
 * node. Values are immutable after creation except through mutable_values()
 * on leaves (the optimizer path) and the grad buffer.
 */
class Tensor {
public:
    Tensor() = default;

    /// Leaf tensor from explicit data. Throws DimensionError when the shape
    /// product disagrees with the buffer and NumericError on NaN/Inf input.
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double fill,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    const std::vector<std::size_t>& shape() const { return n_->shape; }
    std::size_t numel() const { return n_->numel(); }
    bool requires_grad() const { return n_->requires_grad; }
    bool defined() const { return n_ != nullptr; }

    const std::vector<double>& values() const { return n_->value; }

    /// Write access for optimizer updates; leaves only.
    std::vector<double>& mutable_values();

    /// Scalar payload of a one-element tensor.
    double item() const;

    bool has_grad() const { return n_->grad.size() == n_->value.size(); }
    const std::vector<double>& grad() const;
    void zero_grad();

    /// Identity of the underlying node (shared across handle copies).
    const void* node_id() const { return n_.get(); }

private:
    friend class Tape;
    friend Tensor make_op(std::vector<std::size_t>, std::vector<double>,
                          std::vector<Tensor>,
                          std::function<void(detail::Node&)>, const char*);
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::Node> n_;
};

/**
 * Records primitive operations in creation order (a topological order of the
 * data-dependence graph) while alive on the current thread. backward() walks
 * the record once in reverse; a second call without a fresh forward pass
 * throws TapeError. Independent tapes on different threads share nothing.
 */
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Reverse pass from a scalar loss. Populates grad on every
    /// requires_grad tensor reachable from it; grads accumulate additively.
    void backward(const Tensor& loss);

    std::size_t size() const { return nodes_.size(); }

    static Tape* active();

private:
    friend Tensor make_op(std::vector<std::size_t>, std::vector<double>,
                          std::vector<Tensor>,
                          std::function<void(detail::Node&)>, const char*);
    std::vector<std::shared_ptr<detail::Node>> nodes_;
    bool used_ = false;
};

// ---- primitive operations -------------------------------------------------

/// [m,k] x [k,n] -> [m,n]. Backward: dA = dY.B^T, dB = A^T.dY.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise; operand shapes must match exactly except that a one-element
// tensor broadcasts against any shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Masked softmax of a vector: zero where mask is false, exp-normalized with
/// max-subtraction over the true entries. All-false mask throws
/// DegenerateMaskError.
Tensor softmax_masked(const Tensor& scores, const std::vector<std::uint8_t>& mask);

/// Row-wise masked softmax of an [m,n] matrix. Rows whose mask is empty are
/// emitted as all-zero when allow_empty_rows is set, otherwise throw.
Tensor masked_row_softmax(const Tensor& scores, const BoolMatrix& mask,
                          bool allow_empty_rows = false);

/// Zeroes the entries of an [m,n] tensor wherever the mask is unset.
Tensor apply_mask(const Tensor& a, const BoolMatrix& mask);

/**
 * Causal dilated convolution along the leading (time) axis:
 *   y(t) = sum_{i=0..K} f(i) . x(t - d*i),  x(tau) = 0 for tau < 0.
 * x is [Q,N,C_in] (or [Q,C_in], treated as N=1); taps are [K+1,C_in,C_out];
 * output keeps length Q and never reads x beyond t.
 */
Tensor causal_dilated_conv(const Tensor& x, const Tensor& taps, std::size_t dilation);

/// x[t] of a [Q,N,C] tensor -> [N,C].
Tensor time_slice(const Tensor& x, std::size_t t);

/// Stack Q step tensors [N,C] back into [Q,N,C].
Tensor stack_time(const std::vector<Tensor>& steps);

/// [N,p] ++ [N,q] -> [N,p+q] along columns.
Tensor concat_cols(const Tensor& a, const Tensor& b);

/// e[i][j] = u[i] + v[j] for column vectors u,v of length N -> [N,N].
Tensor outer_sum(const Tensor& u, const Tensor& v);

/// Same data, new shape (numel preserved).
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);

/// [N, T*P] row-major per node -> [T,N,P] prediction layout.
Tensor split_horizon(const Tensor& a, std::size_t t_steps, std::size_t p);

enum class Activation { relu, identity };

/**
 * Attention-weighted k-hop mixing for one time step:
 *   H = act( sum_gamma  A_gamma . X . W_gamma )
 * with X [N,C_in], one attention matrix and one weight matrix per hop ring.
 * Gradients flow into X, every W_gamma, and every A_gamma.
 */
Tensor graph_conv(const Tensor& x, const std::vector<Tensor>& attention,
                  const std::vector<Tensor>& weights,
                  Activation act = Activation::relu);

/// Pretty "[a,b,c]" form for error messages.
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace rcdgcn
