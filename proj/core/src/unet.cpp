#include <numeric>

#include "microtrip/network.hpp"
#include "network_detail.hpp"

namespace microtrip {

namespace {

constexpr std::size_t kLevels = 4;

std::size_t emb_dim(const ArchConfig& a) {
    return 4 * a.widths[0];
}

bool has_attention(std::size_t level) {
    // Two coarsest levels: 128 and 64 samples at length 512.
    return level >= 2;
}

std::string lvl(const char* prefix, std::size_t l) {
    return prefix + std::to_string(l);
}

void declare_resblock(detail::Initializer& init, const std::string& name, std::size_t cin,
                      std::size_t cout, std::size_t emb) {
    init.fill(name + ".gn1.g", cin, 1, 1.0);
    init.fill(name + ".gn1.b", cin, 1, 0.0);
    init.conv(name + ".conv1", cin, cout, 3);
    init.weight(name + ".film.w", emb, 2 * cout, emb);
    std::vector<double> film_bias(2 * cout, 0.0);
    std::fill(film_bias.begin(), film_bias.begin() + static_cast<std::ptrdiff_t>(cout), 1.0);
    init.store.add(name + ".film.b", 1, 2 * cout, std::move(film_bias));
    init.fill(name + ".gn2.g", cout, 1, 1.0);
    init.fill(name + ".gn2.b", cout, 1, 0.0);
    init.conv(name + ".conv2", cout, cout, 3);
    if (cin != cout) {
        init.conv(name + ".skip", cin, cout, 1);
    }
}

void declare_attn(detail::Initializer& init, const std::string& name, std::size_t c) {
    init.fill(name + ".gn.g", c, 1, 1.0);
    init.fill(name + ".gn.b", c, 1, 0.0);
    init.linear(name + ".q", c, c);
    init.linear(name + ".k", c, c);
    init.linear(name + ".v", c, c);
    init.linear(name + ".o", c, c);
}

ad::Var gn(const Binder& p, const std::string& name, const ad::Var& x) {
    return ad::group_norm(x, layers::norm_groups(x.rows()), p(name + ".g"), p(name + ".b"));
}

ad::Var conv(const Binder& p, const std::string& name, const ad::Var& x, std::size_t k,
             std::size_t stride = 1) {
    return ad::conv1d(x, p(name + ".w"), p(name + ".b"), k, stride, k / 2);
}

ad::Var resblock(const Binder& p, const std::string& name, const ad::Var& x, const ad::Var& emb,
                 std::size_t cout) {
    auto h = conv(p, name + ".conv1", ad::silu(gn(p, name + ".gn1", x)), 3);
    h = gn(p, name + ".gn2", h);
    auto fe = layers::linear(p, name + ".film", ad::silu(emb));
    auto gamma = ad::reshape(ad::slice_cols(fe, 0, cout), cout, 1);
    auto beta = ad::reshape(ad::slice_cols(fe, cout, cout), cout, 1);
    h = conv(p, name + ".conv2", ad::silu(film_modulate(h, gamma, beta)), 3);
    const auto skip = x.rows() == cout ? x : conv(p, name + ".skip", x, 1);
    return ad::add(skip, h);
}

ad::Var attn_block(const Binder& p, const std::string& name, const ad::Var& x, std::size_t heads) {
    auto tok = ad::transpose(gn(p, name + ".gn", x));
    auto q = layers::linear(p, name + ".q", tok);
    auto k = layers::linear(p, name + ".k", tok);
    auto v = layers::linear(p, name + ".v", tok);
    auto a = ad::attention(q, k, v, std::gcd(x.rows(), heads));
    return ad::add(x, ad::transpose(layers::linear(p, name + ".o", a)));
}

} // namespace

namespace detail {

void declare_unet(const ArchConfig& a, Initializer& init) {
    const auto& w = a.widths;
    const std::size_t e = emb_dim(a);
    init.time_mlp("temb", e);
    init.linear("cond", a.cond_dim(), e);
    init.weight("cond.null", 1, e, e);
    init.conv("in", a.channels(), w[0], 3);
    for (std::size_t l = 0; l < kLevels; ++l) {
        declare_resblock(init, lvl("down", l) + ".res", w[l], w[l], e);
        if (has_attention(l)) {
            declare_attn(init, lvl("down", l) + ".attn", w[l]);
        }
        if (l + 1 < kLevels) {
            init.conv(lvl("down", l) + ".pool", w[l], w[l + 1], 3);
        }
    }
    declare_resblock(init, "mid.res", w[3], w[3], e);
    for (std::size_t l = kLevels; l-- > 0;) {
        declare_resblock(init, lvl("up", l) + ".res", 2 * w[l], w[l], e);
        if (has_attention(l)) {
            declare_attn(init, lvl("up", l) + ".attn", w[l]);
        }
        if (l > 0) {
            init.conv(lvl("up", l) + ".up", w[l], w[l - 1], 3);
        }
    }
    init.fill("out.gn.g", w[0], 1, 1.0);
    init.fill("out.gn.b", w[0], 1, 0.0);
    init.conv("out.conv", w[0], a.channels(), 3);
}

} // namespace detail

ad::Var unet_forward(const ArchConfig& a, const Binder& p, const ad::Var& xt, std::size_t t,
                     const ConditionVector* c) {
    const auto& w = a.widths;
    const std::size_t e = emb_dim(a);
    auto emb = layers::time_embedding(p, "temb", t, e);
    if (c != nullptr) {
        auto cv = ad::Var::constant(1, c->entries.size(), c->entries);
        emb = ad::add(emb, layers::linear(p, "cond", cv));
    } else {
        emb = ad::add(emb, p("cond.null"));
    }

    auto h = conv(p, "in", xt, 3);
    std::vector<ad::Var> skips;
    for (std::size_t l = 0; l < kLevels; ++l) {
        h = resblock(p, lvl("down", l) + ".res", h, emb, w[l]);
        if (has_attention(l)) {
            h = attn_block(p, lvl("down", l) + ".attn", h, a.unet_heads);
        }
        skips.push_back(h);
        if (l + 1 < kLevels) {
            h = conv(p, lvl("down", l) + ".pool", h, 3, 2);
        }
    }
    h = resblock(p, "mid.res", h, emb, w[3]);
    for (std::size_t l = kLevels; l-- > 0;) {
        h = resblock(p, lvl("up", l) + ".res", ad::concat_rows({h, skips[l]}), emb, w[l]);
        if (has_attention(l)) {
            h = attn_block(p, lvl("up", l) + ".attn", h, a.unet_heads);
        }
        if (l > 0) {
            h = conv(p, lvl("up", l) + ".up", ad::upsample2(h), 3);
        }
    }
    h = ad::silu(gn(p, "out.gn", h));
    return conv(p, "out.conv", h, 3);
}

} // namespace microtrip
