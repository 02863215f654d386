#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace microtrip::ad {

/// One value in a computation graph. Row-major rows x cols storage.
/// Parents and the backward closure are kept only when some input needs a
/// gradient, so inference graphs hold no history.
struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad();
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Var constant(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Var leaf(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Var zeros(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }
    std::span<const double> value() const { return node_->value; }
    std::span<double> mutable_value() { return node_->value; }
    /// Empty until backward() has reached this node.
    std::span<const double> grad() const { return node_->grad; }
    double item() const;

    Node& node() const { return *node_; }
    const std::shared_ptr<Node>& ptr() const { return node_; }

    /// Reverse sweep seeded with d(this)/d(this) = 1. Requires a 1x1 value.
    void backward() const;

private:
    std::shared_ptr<Node> node_;
};

// Elementwise (equal shapes).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);

// Broadcasts: b is 1 x cols (added to every row) or rows x 1 (per row).
Var add_row_vector(const Var& x, const Var& b);
Var add_col_vector(const Var& x, const Var& b);
Var mul_col_vector(const Var& x, const Var& g);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var relu(const Var& a);
Var silu(const Var& a);
Var gelu(const Var& a);  ///< tanh approximation
Var square(const Var& a);
/// sqrt(max(a, 0)); the derivative uses max(a, 1e-12) so a zero argument
/// does not produce an infinite gradient.
Var sqrt(const Var& a);

Var sum(const Var& a);   ///< 1x1
Var mean(const Var& a);  ///< 1x1
Var mse(const Var& a, const Var& b);

/// First difference along columns: rows x (cols - 1).
Var diff1(const Var& a);

Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, std::size_t start, std::size_t count);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);

/// x: C_in x L, w: C_out x (C_in * k) with w[o][i * k + j], b: C_out x 1.
/// Zero padding; output length (L + 2 pad - k) / stride + 1.
Var conv1d(const Var& x, const Var& w, const Var& b, std::size_t kernel, std::size_t stride,
           std::size_t pad);

/// Nearest-neighbour 2x upsampling along columns.
Var upsample2(const Var& x);

/// x: C x L normalized over (C / groups) x L blocks; gamma, beta: C x 1.
Var group_norm(const Var& x, std::size_t groups, const Var& gamma, const Var& beta,
               double eps = 1e-5);

/// Row-wise normalization of N x D; gamma, beta: 1 x D.
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Multi-head scaled dot-product attention. q: Lq x D, k and v: Lk x D;
/// head h uses columns [h * D / heads, (h + 1) * D / heads).
Var attention(const Var& q, const Var& k, const Var& v, std::size_t heads);

/// Row-stochastic attention weights of one head, for inspection.
std::vector<double> attention_weights(std::span<const double> q, std::span<const double> k,
                                      std::size_t lq, std::size_t lk, std::size_t d);

} // namespace microtrip::ad
