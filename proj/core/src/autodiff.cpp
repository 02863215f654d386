#include "microtrip/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "microtrip/error.hpp"

namespace microtrip::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

std::string shape_str(const Var& v) {
    return std::to_string(v.rows()) + "x" + std::to_string(v.cols());
}

void require(bool ok, const std::string& what) {
    if (!ok) {
        fail(ErrorCode::InvalidArgument, what);
    }
}

void same_shape(const Var& a, const Var& b, const char* op) {
    require(a.rows() == b.rows() && a.cols() == b.cols(),
            std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Var make(std::size_t rows, std::size_t cols, std::vector<double> value,
         std::initializer_list<Var> inputs, std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(value);
    for (const auto& in : inputs) {
        if (in.requires_grad()) {
            n->requires_grad = true;
        }
    }
    if (n->requires_grad) {
        for (const auto& in : inputs) {
            n->parents.push_back(in.ptr());
        }
        n->backward = std::move(backward);
    }
    return Var(std::move(n));
}

/// Gradient buffer of parent i, or null when it needs none.
double* pgrad(Node& self, std::size_t i) {
    Node& p = *self.parents[i];
    if (!p.requires_grad) {
        return nullptr;
    }
    p.ensure_grad();
    return p.grad.data();
}

template <typename F, typename D>
Var unary(const Var& a, F f, D df) {
    std::vector<double> out(a.size());
    const auto av = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f(av[i]);
    }
    return make(a.rows(), a.cols(), std::move(out), {a}, [df](Node& self) {
        double* ga = pgrad(self, 0);
        if (ga == nullptr) {
            return;
        }
        const auto& x = self.parents[0]->value;
        for (std::size_t i = 0; i < x.size(); ++i) {
            ga[i] += self.grad[i] * df(x[i], self.value[i]);
        }
    });
}

} // namespace

void Node::ensure_grad() {
    if (grad.size() != value.size()) {
        grad.assign(value.size(), 0.0);
    }
}

Var Var::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    require(values.size() == rows * cols, "constant: value count does not match shape");
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(values);
    return Var(std::move(n));
}

Var Var::leaf(std::size_t rows, std::size_t cols, std::vector<double> values) {
    Var v = constant(rows, cols, std::move(values));
    v.node().requires_grad = true;
    return v;
}

Var Var::zeros(std::size_t rows, std::size_t cols) {
    return constant(rows, cols, std::vector<double>(rows * cols, 0.0));
}

double Var::item() const {
    require(size() == 1, "item() on a non-scalar " + shape_str(*this));
    return node_->value[0];
}

void Var::backward() const {
    require(size() == 1, "backward() needs a scalar, got " + shape_str(*this));
    if (!node_->requires_grad) {
        return;
    }
    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) {
            n->backward(*n);
        }
    }
}

Var add(const Var& a, const Var& b) {
    same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.value()[i] + b.value()[i];
    }
    return make(a.rows(), a.cols(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (double* g = pgrad(self, p)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) {
                    g[i] += self.grad[i];
                }
            }
        }
    });
}

Var sub(const Var& a, const Var& b) {
    same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.value()[i] - b.value()[i];
    }
    return make(a.rows(), a.cols(), std::move(out), {a, b}, [](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i] -= self.grad[i];
            }
        }
    });
}

Var mul(const Var& a, const Var& b) {
    same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.value()[i] * b.value()[i];
    }
    return make(a.rows(), a.cols(), std::move(out), {a, b}, [](Node& self) {
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i] += self.grad[i] * bv[i];
            }
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i] += self.grad[i] * av[i];
            }
        }
    });
}

Var scale(const Var& a, double k) {
    return unary(a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Var add_scalar(const Var& a, double k) {
    return unary(a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Var add_row_vector(const Var& x, const Var& b) {
    require(b.rows() == 1 && b.cols() == x.cols(),
            "add_row_vector: " + shape_str(b) + " does not broadcast over " + shape_str(x));
    const std::size_t R = x.rows(), C = x.cols();
    std::vector<double> out(x.value().begin(), x.value().end());
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
            out[r * C + c] += b.value()[c];
        }
    }
    return make(R, C, std::move(out), {x, b}, [R, C](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t r = 0; r < R; ++r) {
                for (std::size_t c = 0; c < C; ++c) {
                    g[c] += self.grad[r * C + c];
                }
            }
        }
    });
}

Var add_col_vector(const Var& x, const Var& b) {
    require(b.cols() == 1 && b.rows() == x.rows(),
            "add_col_vector: " + shape_str(b) + " does not broadcast over " + shape_str(x));
    const std::size_t R = x.rows(), C = x.cols();
    std::vector<double> out(x.value().begin(), x.value().end());
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
            out[r * C + c] += b.value()[r];
        }
    }
    return make(R, C, std::move(out), {x, b}, [R, C](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t r = 0; r < R; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    s += self.grad[r * C + c];
                }
                g[r] += s;
            }
        }
    });
}

Var mul_col_vector(const Var& x, const Var& gvec) {
    require(gvec.cols() == 1 && gvec.rows() == x.rows(),
            "mul_col_vector: " + shape_str(gvec) + " does not broadcast over " + shape_str(x));
    const std::size_t R = x.rows(), C = x.cols();
    std::vector<double> out(R * C);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
            out[r * C + c] = x.value()[r * C + c] * gvec.value()[r];
        }
    }
    return make(R, C, std::move(out), {x, gvec}, [R, C](Node& self) {
        const auto& xv = self.parents[0]->value;
        const auto& gv = self.parents[1]->value;
        if (double* g = pgrad(self, 0)) {
            for (std::size_t r = 0; r < R; ++r) {
                for (std::size_t c = 0; c < C; ++c) {
                    g[r * C + c] += self.grad[r * C + c] * gv[r];
                }
            }
        }
        if (double* g = pgrad(self, 1)) {
            for (std::size_t r = 0; r < R; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    s += self.grad[r * C + c] * xv[r * C + c];
                }
                g[r] += s;
            }
        }
    });
}

Var matmul(const Var& a, const Var& b) {
    require(a.cols() == b.rows(), "matmul: " + shape_str(a) + " times " + shape_str(b));
    const std::size_t M = a.rows(), K = a.cols(), N = b.cols();
    std::vector<double> out(M * N, 0.0);
    const double* A = a.value().data();
    const double* B = b.value().data();
    for (std::size_t i = 0; i < M; ++i) {
        double* o = out.data() + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const double aik = A[i * K + k];
            if (aik == 0.0) {
                continue;
            }
            const double* brow = B + k * N;
            for (std::size_t j = 0; j < N; ++j) {
                o[j] += aik * brow[j];
            }
        }
    }
    return make(M, N, std::move(out), {a, b}, [M, K, N](Node& self) {
        const double* A = self.parents[0]->value.data();
        const double* B = self.parents[1]->value.data();
        const double* G = self.grad.data();
        if (double* ga = pgrad(self, 0)) {
            // dA = G B^T
            for (std::size_t i = 0; i < M; ++i) {
                for (std::size_t k = 0; k < K; ++k) {
                    const double* brow = B + k * N;
                    const double* grow = G + i * N;
                    double s = 0.0;
                    for (std::size_t j = 0; j < N; ++j) {
                        s += grow[j] * brow[j];
                    }
                    ga[i * K + k] += s;
                }
            }
        }
        if (double* gb = pgrad(self, 1)) {
            // dB = A^T G
            for (std::size_t i = 0; i < M; ++i) {
                const double* grow = G + i * N;
                for (std::size_t k = 0; k < K; ++k) {
                    const double aik = A[i * K + k];
                    if (aik == 0.0) {
                        continue;
                    }
                    double* brow = gb + k * N;
                    for (std::size_t j = 0; j < N; ++j) {
                        brow[j] += aik * grow[j];
                    }
                }
            }
        }
    });
}

Var transpose(const Var& a) {
    const std::size_t R = a.rows(), C = a.cols();
    std::vector<double> out(R * C);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
            out[c * R + r] = a.value()[r * C + c];
        }
    }
    return make(C, R, std::move(out), {a}, [R, C](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t r = 0; r < R; ++r) {
                for (std::size_t c = 0; c < C; ++c) {
                    g[r * C + c] += self.grad[c * R + r];
                }
            }
        }
    });
}

Var relu(const Var& a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var silu(const Var& a) {
    return unary(
        a, [](double x) { return x / (1.0 + std::exp(-x)); },
        [](double x, double) {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        });
}

Var gelu(const Var& a) {
    constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
    return unary(
        a,
        [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x))); },
        [](double x, double) {
            const double u = c * (x + 0.044715 * x * x * x);
            const double th = std::tanh(u);
            const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
            return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
        });
}

Var square(const Var& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& a) {
    return unary(
        a, [](double x) { return std::sqrt(std::max(x, 0.0)); },
        [](double x, double) { return 0.5 / std::sqrt(std::max(x, 1e-12)); });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double x : a.value()) {
        s += x;
    }
    return make(1, 1, {s}, {a}, [](Node& self) {
        if (double* g = pgrad(self, 0)) {
            const std::size_t n = self.parents[0]->value.size();
            for (std::size_t i = 0; i < n; ++i) {
                g[i] += self.grad[0];
            }
        }
    });
}

Var mean(const Var& a) {
    require(a.size() > 0, "mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var mse(const Var& a, const Var& b) {
    return mean(square(sub(a, b)));
}

Var diff1(const Var& a) {
    require(a.cols() >= 2, "diff1 needs at least 2 columns, got " + shape_str(a));
    const std::size_t R = a.rows(), C = a.cols();
    std::vector<double> out(R * (C - 1));
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c + 1 < C; ++c) {
            out[r * (C - 1) + c] = a.value()[r * C + c + 1] - a.value()[r * C + c];
        }
    }
    return make(R, C - 1, std::move(out), {a}, [R, C](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t r = 0; r < R; ++r) {
                for (std::size_t c = 0; c + 1 < C; ++c) {
                    const double d = self.grad[r * (C - 1) + c];
                    g[r * C + c + 1] += d;
                    g[r * C + c] -= d;
                }
            }
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows of nothing");
    const std::size_t C = parts.front().cols();
    std::size_t R = 0;
    for (const auto& p : parts) {
        require(p.cols() == C, "concat_rows: column mismatch");
        R += p.rows();
    }
    auto n = std::make_shared<Node>();
    n->rows = R;
    n->cols = C;
    n->value.reserve(R * C);
    for (const auto& p : parts) {
        n->value.insert(n->value.end(), p.value().begin(), p.value().end());
        n->requires_grad = n->requires_grad || p.requires_grad();
    }
    if (n->requires_grad) {
        for (const auto& p : parts) {
            n->parents.push_back(p.ptr());
        }
        n->backward = [](Node& self) {
            std::size_t off = 0;
            for (std::size_t i = 0; i < self.parents.size(); ++i) {
                const std::size_t len = self.parents[i]->value.size();
                if (double* g = pgrad(self, i)) {
                    for (std::size_t j = 0; j < len; ++j) {
                        g[j] += self.grad[off + j];
                    }
                }
                off += len;
            }
        };
    }
    return Var(std::move(n));
}

Var slice_rows(const Var& a, std::size_t start, std::size_t count) {
    require(start + count <= a.rows() && count > 0, "slice_rows out of range");
    const std::size_t C = a.cols();
    std::vector<double> out(a.value().begin() + static_cast<std::ptrdiff_t>(start * C),
                            a.value().begin() + static_cast<std::ptrdiff_t>((start + count) * C));
    return make(count, C, std::move(out), {a}, [start, C](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[start * C + i] += self.grad[i];
            }
        }
    });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
    require(start + count <= a.cols() && count > 0, "slice_cols out of range");
    const std::size_t R = a.rows(), C = a.cols();
    std::vector<double> out(R * count);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < count; ++c) {
            out[r * count + c] = a.value()[r * C + start + c];
        }
    }
    return make(R, count, std::move(out), {a}, [R, C, start, count](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t r = 0; r < R; ++r) {
                for (std::size_t c = 0; c < count; ++c) {
                    g[r * C + start + c] += self.grad[r * count + c];
                }
            }
        }
    });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
    require(rows * cols == a.size(), "reshape: element count mismatch");
    std::vector<double> out(a.value().begin(), a.value().end());
    return make(rows, cols, std::move(out), {a}, [](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
    });
}

Var conv1d(const Var& x, const Var& w, const Var& b, std::size_t kernel, std::size_t stride,
           std::size_t pad) {
    const std::size_t Cin = x.rows(), L = x.cols(), Cout = w.rows();
    require(kernel >= 1 && stride >= 1, "conv1d: kernel and stride must be positive");
    require(w.cols() == Cin * kernel, "conv1d: weight " + shape_str(w) + " does not match input " +
                                          shape_str(x) + " with kernel " + std::to_string(kernel));
    require(b.rows() == Cout && b.cols() == 1, "conv1d: bias must be C_out x 1");
    require(L + 2 * pad >= kernel, "conv1d: input shorter than kernel");
    const std::size_t Lout = (L + 2 * pad - kernel) / stride + 1;
    std::vector<double> out(Cout * Lout);
    const double* X = x.value().data();
    const double* W = w.value().data();
    for (std::size_t o = 0; o < Cout; ++o) {
        double* orow = out.data() + o * Lout;
        std::fill(orow, orow + Lout, b.value()[o]);
        for (std::size_t i = 0; i < Cin; ++i) {
            const double* xrow = X + i * L;
            for (std::size_t j = 0; j < kernel; ++j) {
                const double wv = W[o * Cin * kernel + i * kernel + j];
                for (std::size_t p = 0; p < Lout; ++p) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p * stride + j) -
                                               static_cast<std::ptrdiff_t>(pad);
                    if (src >= 0 && src < static_cast<std::ptrdiff_t>(L)) {
                        orow[p] += wv * xrow[src];
                    }
                }
            }
        }
    }
    return make(Cout, Lout, std::move(out), {x, w, b},
                [Cin, L, Cout, Lout, kernel, stride, pad](Node& self) {
                    const double* X = self.parents[0]->value.data();
                    const double* W = self.parents[1]->value.data();
                    const double* G = self.grad.data();
                    double* gx = pgrad(self, 0);
                    double* gw = pgrad(self, 1);
                    double* gb = pgrad(self, 2);
                    for (std::size_t o = 0; o < Cout; ++o) {
                        const double* grow = G + o * Lout;
                        if (gb != nullptr) {
                            double s = 0.0;
                            for (std::size_t p = 0; p < Lout; ++p) {
                                s += grow[p];
                            }
                            gb[o] += s;
                        }
                        for (std::size_t i = 0; i < Cin; ++i) {
                            for (std::size_t j = 0; j < kernel; ++j) {
                                const std::size_t widx = o * Cin * kernel + i * kernel + j;
                                const double wv = W[widx];
                                double sw = 0.0;
                                for (std::size_t p = 0; p < Lout; ++p) {
                                    const std::ptrdiff_t src =
                                        static_cast<std::ptrdiff_t>(p * stride + j) -
                                        static_cast<std::ptrdiff_t>(pad);
                                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) {
                                        continue;
                                    }
                                    sw += grow[p] * X[i * L + src];
                                    if (gx != nullptr) {
                                        gx[i * L + src] += grow[p] * wv;
                                    }
                                }
                                if (gw != nullptr) {
                                    gw[widx] += sw;
                                }
                            }
                        }
                    }
                });
}

Var upsample2(const Var& x) {
    const std::size_t R = x.rows(), C = x.cols();
    std::vector<double> out(R * C * 2);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < 2 * C; ++c) {
            out[r * 2 * C + c] = x.value()[r * C + c / 2];
        }
    }
    return make(R, 2 * C, std::move(out), {x}, [R, C](Node& self) {
        if (double* g = pgrad(self, 0)) {
            for (std::size_t r = 0; r < R; ++r) {
                for (std::size_t c = 0; c < 2 * C; ++c) {
                    g[r * C + c / 2] += self.grad[r * 2 * C + c];
                }
            }
        }
    });
}

namespace {

// Saved forward state for the normalization backward passes.
struct NormCache {
    std::vector<double> xhat;
    std::vector<double> inv_std;
};

} // namespace

Var group_norm(const Var& x, std::size_t groups, const Var& gamma, const Var& beta, double eps) {
    const std::size_t C = x.rows(), L = x.cols();
    require(groups >= 1 && C % groups == 0,
            "group_norm: " + std::to_string(C) + " channels not divisible into " +
                std::to_string(groups) + " groups");
    require(gamma.rows() == C && gamma.cols() == 1 && beta.rows() == C && beta.cols() == 1,
            "group_norm: gamma and beta must be C x 1");
    const std::size_t cpg = C / groups;
    const std::size_t n = cpg * L;
    auto cache = std::make_shared<NormCache>();
    cache->xhat.resize(C * L);
    cache->inv_std.resize(groups);
    std::vector<double> out(C * L);
    const double* X = x.value().data();
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t base = g * n;
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m += X[base + i];
        }
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = X[base + i] - m;
            v += d * d;
        }
        v /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(v + eps);
        cache->inv_std[g] = is;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = base + i;
            const std::size_t c = idx / L;
            cache->xhat[idx] = (X[idx] - m) * is;
            out[idx] = cache->xhat[idx] * gamma.value()[c] + beta.value()[c];
        }
    }
    return make(C, L, std::move(out), {x, gamma, beta}, [C, L, groups, n, cache](Node& self) {
        const double* G = self.grad.data();
        const auto& gam = self.parents[1]->value;
        double* gx = pgrad(self, 0);
        double* gg = pgrad(self, 1);
        double* gbeta = pgrad(self, 2);
        for (std::size_t idx = 0; idx < C * L; ++idx) {
            const std::size_t c = idx / L;
            if (gg != nullptr) {
                gg[c] += G[idx] * cache->xhat[idx];
            }
            if (gbeta != nullptr) {
                gbeta[c] += G[idx];
            }
        }
        if (gx == nullptr) {
            return;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t base = g * n;
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = base + i;
                const double dxh = G[idx] * gam[idx / L];
                s1 += dxh;
                s2 += dxh * cache->xhat[idx];
            }
            const double is = cache->inv_std[g];
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = base + i;
                const double dxh = G[idx] * gam[idx / L];
                gx[idx] += is * (dxh - inv_n * s1 - cache->xhat[idx] * inv_n * s2);
            }
        }
    });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const std::size_t N = x.rows(), D = x.cols();
    require(gamma.rows() == 1 && gamma.cols() == D && beta.rows() == 1 && beta.cols() == D,
            "layer_norm_rows: gamma and beta must be 1 x D");
    auto cache = std::make_shared<NormCache>();
    cache->xhat.resize(N * D);
    cache->inv_std.resize(N);
    std::vector<double> out(N * D);
    const double* X = x.value().data();
    for (std::size_t r = 0; r < N; ++r) {
        double m = 0.0;
        for (std::size_t c = 0; c < D; ++c) {
            m += X[r * D + c];
        }
        m /= static_cast<double>(D);
        double v = 0.0;
        for (std::size_t c = 0; c < D; ++c) {
            const double d = X[r * D + c] - m;
            v += d * d;
        }
        v /= static_cast<double>(D);
        const double is = 1.0 / std::sqrt(v + eps);
        cache->inv_std[r] = is;
        for (std::size_t c = 0; c < D; ++c) {
            const std::size_t idx = r * D + c;
            cache->xhat[idx] = (X[idx] - m) * is;
            out[idx] = cache->xhat[idx] * gamma.value()[c] + beta.value()[c];
        }
    }
    return make(N, D, std::move(out), {x, gamma, beta}, [N, D, cache](Node& self) {
        const double* G = self.grad.data();
        const auto& gam = self.parents[1]->value;
        double* gx = pgrad(self, 0);
        double* gg = pgrad(self, 1);
        double* gbeta = pgrad(self, 2);
        const double inv_d = 1.0 / static_cast<double>(D);
        for (std::size_t r = 0; r < N; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t c = 0; c < D; ++c) {
                const std::size_t idx = r * D + c;
                if (gg != nullptr) {
                    gg[c] += G[idx] * cache->xhat[idx];
                }
                if (gbeta != nullptr) {
                    gbeta[c] += G[idx];
                }
                const double dxh = G[idx] * gam[c];
                s1 += dxh;
                s2 += dxh * cache->xhat[idx];
            }
            if (gx == nullptr) {
                continue;
            }
            const double is = cache->inv_std[r];
            for (std::size_t c = 0; c < D; ++c) {
                const std::size_t idx = r * D + c;
                const double dxh = G[idx] * gam[c];
                gx[idx] += is * (dxh - inv_d * s1 - cache->xhat[idx] * inv_d * s2);
            }
        }
    });
}

std::vector<double> attention_weights(std::span<const double> q, std::span<const double> k,
                                      std::size_t lq, std::size_t lk, std::size_t d) {
    std::vector<double> p(lq * lk);
    const double sc = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < lq; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < lk; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                s += q[i * d + c] * k[j * d + c];
            }
            p[i * lk + j] = s * sc;
            mx = std::max(mx, p[i * lk + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < lk; ++j) {
            p[i * lk + j] = std::exp(p[i * lk + j] - mx);
            z += p[i * lk + j];
        }
        for (std::size_t j = 0; j < lk; ++j) {
            p[i * lk + j] /= z;
        }
    }
    return p;
}

Var attention(const Var& q, const Var& k, const Var& v, std::size_t heads) {
    const std::size_t Lq = q.rows(), Lk = k.rows(), D = q.cols();
    require(k.cols() == D && v.cols() == D && v.rows() == Lk,
            "attention: q " + shape_str(q) + ", k " + shape_str(k) + ", v " + shape_str(v));
    require(heads >= 1 && D % heads == 0, "attention: width not divisible by head count");
    const std::size_t dh = D / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    auto probs = std::make_shared<std::vector<double>>(heads * Lq * Lk);
    std::vector<double> out(Lq * D, 0.0);
    const double* Q = q.value().data();
    const double* K = k.value().data();
    const double* V = v.value().data();
    for (std::size_t h = 0; h < heads; ++h) {
        double* P = probs->data() + h * Lq * Lk;
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < Lq; ++i) {
            double* prow = P + i * Lk;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < Lk; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                    s += Q[i * D + off + c] * K[j * D + off + c];
                }
                prow[j] = s * sc;
                mx = std::max(mx, prow[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < Lk; ++j) {
                prow[j] = std::exp(prow[j] - mx);
                z += prow[j];
            }
            const double iz = 1.0 / z;
            double* orow = out.data() + i * D + off;
            for (std::size_t j = 0; j < Lk; ++j) {
                prow[j] *= iz;
                const double pj = prow[j];
                const double* vrow = V + j * D + off;
                for (std::size_t c = 0; c < dh; ++c) {
                    orow[c] += pj * vrow[c];
                }
            }
        }
    }
    return make(Lq, D, std::move(out), {q, k, v}, [Lq, Lk, D, heads, dh, sc, probs](Node& self) {
        const double* Q = self.parents[0]->value.data();
        const double* K = self.parents[1]->value.data();
        const double* V = self.parents[2]->value.data();
        const double* G = self.grad.data();
        double* gq = pgrad(self, 0);
        double* gk = pgrad(self, 1);
        double* gv = pgrad(self, 2);
        std::vector<double> dp(Lk);
        for (std::size_t h = 0; h < heads; ++h) {
            const double* P = probs->data() + h * Lq * Lk;
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < Lq; ++i) {
                const double* prow = P + i * Lk;
                const double* grow = G + i * D + off;
                double dot = 0.0;
                for (std::size_t j = 0; j < Lk; ++j) {
                    const double* vrow = V + j * D + off;
                    double s = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) {
                        s += grow[c] * vrow[c];
                    }
                    dp[j] = s;
                    dot += s * prow[j];
                    if (gv != nullptr) {
                        double* gvrow = gv + j * D + off;
                        for (std::size_t c = 0; c < dh; ++c) {
                            gvrow[c] += prow[j] * grow[c];
                        }
                    }
                }
                for (std::size_t j = 0; j < Lk; ++j) {
                    const double ds = prow[j] * (dp[j] - dot) * sc;
                    if (ds == 0.0) {
                        continue;
                    }
                    if (gq != nullptr) {
                        const double* krow = K + j * D + off;
                        double* gqrow = gq + i * D + off;
                        for (std::size_t c = 0; c < dh; ++c) {
                            gqrow[c] += ds * krow[c];
                        }
                    }
                    if (gk != nullptr) {
                        const double* qrow = Q + i * D + off;
                        double* gkrow = gk + j * D + off;
                        for (std::size_t c = 0; c < dh; ++c) {
                            gkrow[c] += ds * qrow[c];
                        }
                    }
                }
            }
        }
    });
}

} // namespace microtrip::ad
