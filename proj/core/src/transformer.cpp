#include "microtrip/network.hpp"
#include "network_detail.hpp"

namespace microtrip {

namespace {

std::string layer_name(std::size_t l) {
    return "layer" + std::to_string(l);
}

void declare_attention(detail::Initializer& init, const std::string& name, std::size_t d) {
    init.weight(name + ".q", d, d, d);
    init.weight(name + ".k", d, d, d);
    init.weight(name + ".v", d, d, d);
    init.linear(name + ".o", d, d);
}

void declare_norm(detail::Initializer& init, const std::string& name, std::size_t d) {
    init.fill(name + ".g", 1, d, 1.0);
    init.fill(name + ".b", 1, d, 0.0);
}

ad::Var mha(const Binder& p, const std::string& name, const ad::Var& x, const ad::Var& ctx,
            std::size_t heads) {
    auto q = ad::matmul(x, p(name + ".q"));
    auto k = ad::matmul(ctx, p(name + ".k"));
    auto v = ad::matmul(ctx, p(name + ".v"));
    return layers::linear(p, name + ".o", ad::attention(q, k, v, heads));
}

ad::Var norm(const Binder& p, const std::string& name, const ad::Var& x) {
    return ad::layer_norm_rows(x, p(name + ".g"), p(name + ".b"));
}

} // namespace

namespace detail {

void declare_transformer(const ArchConfig& a, Initializer& init) {
    const std::size_t d = a.d_model;
    const std::size_t nc = a.cond_dim();
    init.linear("in", 1, d);
    init.weight("pos", a.length, d, d);
    init.time_mlp("temb", d);
    // Condition entry j becomes token c_j * w_j + b_j.
    init.weight("cond.w", nc, d, 1);
    init.fill("cond.b", nc, d, 0.0);
    init.weight("cond.null", nc, d, d);
    for (std::size_t l = 0; l < a.layers; ++l) {
        const auto n = layer_name(l);
        declare_attention(init, n + ".self", d);
        declare_norm(init, n + ".ln1", d);
        declare_attention(init, n + ".cross", d);
        declare_norm(init, n + ".ln2", d);
        init.linear(n + ".ff1", d, a.d_ff);
        init.linear(n + ".ff2", a.d_ff, d);
        declare_norm(init, n + ".ln3", d);
    }
    init.linear("out", d, 1);
}

} // namespace detail

ad::Var transformer_forward(const ArchConfig& a, const Binder& p, const ad::Var& xt,
                            std::size_t t, const ConditionVector* c) {
    const std::size_t d = a.d_model;
    auto h = layers::linear(p, "in", ad::transpose(xt));
    h = ad::add(h, p("pos"));
    h = ad::add_row_vector(h, layers::time_embedding(p, "temb", t, d));

    ad::Var ctx;
    if (c != nullptr) {
        auto cv = ad::Var::constant(c->entries.size(), 1, c->entries);
        ctx = ad::add(ad::mul_col_vector(p("cond.w"), cv), p("cond.b"));
    } else {
        ctx = p("cond.null");
    }

    for (std::size_t l = 0; l < a.layers; ++l) {
        const auto n = layer_name(l);
        h = norm(p, n + ".ln1", ad::add(h, mha(p, n + ".self", h, h, a.heads)));
        h = norm(p, n + ".ln2", ad::add(h, mha(p, n + ".cross", h, ctx, a.heads)));
        auto ff = layers::linear(p, n + ".ff2", ad::gelu(layers::linear(p, n + ".ff1", h)));
        h = norm(p, n + ".ln3", ad::add(h, ff));
    }
    return ad::transpose(layers::linear(p, "out", h));
}

} // namespace microtrip
