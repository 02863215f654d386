#include <algorithm>
#include <cmath>
#include <numeric>

#include "microtrip/error.hpp"
#include "microtrip/network.hpp"
#include "network_detail.hpp"

namespace microtrip {

std::size_t ParamStore::add(std::string name, std::size_t rows, std::size_t cols,
                            std::vector<double> init) {
    if (init.size() != rows * cols) {
        fail(ErrorCode::InvalidArgument, "parameter '" + name + "': value count does not match shape");
    }
    if (by_name_.count(name) != 0) {
        fail(ErrorCode::InvalidArgument, "parameter '" + name + "' declared twice");
    }
    const std::size_t idx = entries_.size();
    entries_.push_back({name, rows, cols, flat_.size()});
    by_name_.emplace(std::move(name), idx);
    flat_.insert(flat_.end(), init.begin(), init.end());
    return idx;
}

std::size_t ParamStore::index(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) {
        fail(ErrorCode::InvalidArgument, "no parameter named '" + std::string(name) + "'");
    }
    return it->second;
}

bool ParamStore::contains(std::string_view name) const {
    return by_name_.count(std::string(name)) != 0;
}

std::span<const double> ParamStore::values(std::size_t index) const {
    const auto& e = entries_.at(index);
    return std::span<const double>(flat_).subspan(e.offset, e.rows * e.cols);
}

std::span<double> ParamStore::values(std::size_t index) {
    const auto& e = entries_.at(index);
    return std::span<double>(flat_).subspan(e.offset, e.rows * e.cols);
}

Binder::Binder(const ParamStore& store, bool trainable) : store_(&store), trainable_(trainable) {
    vars_.reserve(store.entries().size());
    for (std::size_t i = 0; i < store.entries().size(); ++i) {
        const auto& e = store.entries()[i];
        auto v = store.values(i);
        std::vector<double> copy(v.begin(), v.end());
        vars_.push_back(trainable ? ad::Var::leaf(e.rows, e.cols, std::move(copy))
                                  : ad::Var::constant(e.rows, e.cols, std::move(copy)));
    }
}

const ad::Var& Binder::operator()(std::string_view name) const {
    return vars_[store_->index(name)];
}

void Binder::gather_grads(std::span<double> out) const {
    if (out.size() != store_->scalar_count()) {
        fail(ErrorCode::InvalidArgument, "gradient buffer size does not match parameter count");
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        const auto g = vars_[i].grad();
        const std::size_t off = store_->entries()[i].offset;
        for (std::size_t j = 0; j < g.size(); ++j) {
            out[off + j] += g[j];
        }
    }
}

std::vector<double> sinusoidal_embed(double t, std::size_t d) {
    if (d == 0 || d % 2 != 0) {
        fail(ErrorCode::InvalidArgument, "sinusoidal embedding dimension must be even and positive");
    }
    std::vector<double> pe(d);
    for (std::size_t i = 0; i < d; i += 2) {
        const double freq = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
        pe[i] = std::sin(t / freq);
        pe[i + 1] = std::cos(t / freq);
    }
    return pe;
}

ad::Var film_modulate(const ad::Var& h, const ad::Var& gamma, const ad::Var& beta) {
    return ad::add_col_vector(ad::mul_col_vector(h, gamma), beta);
}

namespace layers {

ad::Var linear(const Binder& p, const std::string& name, const ad::Var& x) {
    return ad::add_row_vector(ad::matmul(x, p(name + ".w")), p(name + ".b"));
}

ad::Var time_embedding(const Binder& p, const std::string& name, std::size_t t, std::size_t d) {
    auto pe = ad::Var::constant(1, d, sinusoidal_embed(static_cast<double>(t), d));
    return linear(p, name + ".l2", ad::silu(linear(p, name + ".l1", pe)));
}

std::size_t norm_groups(std::size_t channels) {
    return std::gcd(channels, std::size_t{8});
}

} // namespace layers

std::string to_string(Architecture a) {
    return a == Architecture::Unet ? "unet" : "transformer";
}

Architecture parse_architecture(const std::string& name) {
    if (name == "unet") {
        return Architecture::Unet;
    }
    if (name == "transformer" || name == "csdi") {
        return Architecture::Transformer;
    }
    fail(ErrorCode::InvalidArgument, "unknown architecture '" + name + "' (unet|transformer)");
}

nlohmann::json ArchConfig::to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind);
    j["length"] = length;
    if (kind == Architecture::Unet) {
        j["widths"] = widths;
        j["unet_heads"] = unet_heads;
    } else {
        j["layers"] = layers;
        j["d_model"] = d_model;
        j["heads"] = heads;
        j["d_ff"] = d_ff;
    }
    return j;
}

ArchConfig ArchConfig::from_json(const nlohmann::json& j) {
    ArchConfig a;
    try {
        a.kind = parse_architecture(j.at("kind").get<std::string>());
        a.length = j.value("length", a.length);
        if (a.kind == Architecture::Unet) {
            a.widths = j.value("widths", a.widths);
            a.unet_heads = j.value("unet_heads", a.unet_heads);
        } else {
            a.layers = j.value("layers", a.layers);
            a.d_model = j.value("d_model", a.d_model);
            a.heads = j.value("heads", a.heads);
            a.d_ff = j.value("d_ff", a.d_ff);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("architecture descriptor: ") + e.what());
    }
    a.validate();
    return a;
}

void ArchConfig::validate() const {
    auto bad = [](const std::string& m) { fail(ErrorCode::Config, "architecture: " + m); };
    if (kind == Architecture::Unet) {
        if (widths.size() != 4) {
            bad("U-Net needs exactly 4 widths");
        }
        if (length < 16 || length % 8 != 0) {
            bad("U-Net length must be a multiple of 8 and at least 16");
        }
        for (auto w : widths) {
            if (w == 0) {
                bad("widths must be positive");
            }
        }
        if (unet_heads == 0) {
            bad("unet_heads must be positive");
        }
    } else {
        if (layers == 0 || d_model == 0 || heads == 0 || d_ff == 0) {
            bad("transformer sizes must be positive");
        }
        if (d_model % heads != 0) {
            bad("d_model must be divisible by heads");
        }
        if (d_model % 2 != 0) {
            bad("d_model must be even");
        }
        if (length < 3) {
            bad("length must be at least 3");
        }
    }
}

ArchConfig arch_preset(const std::string& name) {
    ArchConfig a;
    if (name == "unet-tiny") {
        a.kind = Architecture::Unet;
        a.widths = {4, 8, 8, 8};
        a.unet_heads = 2;
    } else if (name == "unet-desk") {
        a.kind = Architecture::Unet;
    } else if (name == "unet-full") {
        a.kind = Architecture::Unet;
        a.widths = {64, 128, 256, 512};
        a.unet_heads = 8;
    } else if (name == "csdi-tiny") {
        a.layers = 1;
        a.d_model = 8;
        a.heads = 2;
        a.d_ff = 16;
    } else if (name == "csdi-desk") {
        // defaults
    } else if (name == "csdi-full") {
        a.layers = 6;
        a.d_model = 256;
        a.heads = 8;
        a.d_ff = 1024;
    } else {
        fail(ErrorCode::Config, "unknown architecture preset '" + name + "'");
    }
    return a;
}

ParamStore init_params(const ArchConfig& arch, std::uint64_t seed) {
    arch.validate();
    ParamStore store;
    Rng rng(seed, {0x6e6e});
    detail::Initializer init{store, rng};
    if (arch.kind == Architecture::Unet) {
        detail::declare_unet(arch, init);
    } else {
        detail::declare_transformer(arch, init);
    }
    return store;
}

DenoiserNet::DenoiserNet(ArchConfig arch, std::uint64_t seed)
    : arch_(std::move(arch)), params_(init_params(arch_, seed)) {}

DenoiserNet::DenoiserNet(ArchConfig arch, ParamStore params)
    : arch_(std::move(arch)), params_(std::move(params)) {
    arch_.validate();
    const auto reference = init_params(arch_, 0);
    if (reference.entries().size() != params_.entries().size()) {
        fail(ErrorCode::Config, "parameter set does not match the architecture");
    }
    for (std::size_t i = 0; i < reference.entries().size(); ++i) {
        const auto& a = reference.entries()[i];
        const auto& b = params_.entries()[i];
        if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) {
            fail(ErrorCode::Config, "parameter '" + b.name + "' does not match the architecture");
        }
    }
}

ad::Var DenoiserNet::forward(const Binder& p, const ad::Var& xt, std::size_t t,
                             const ConditionVector* c) const {
    if (xt.rows() != arch_.channels() || xt.cols() != arch_.length) {
        fail(ErrorCode::InvalidArgument, "denoiser input must be " +
                                             std::to_string(arch_.channels()) + "x" +
                                             std::to_string(arch_.length));
    }
    if (c != nullptr && c->entries.size() != arch_.cond_dim()) {
        fail(ErrorCode::InvalidArgument, "condition has " + std::to_string(c->entries.size()) +
                                             " entries, expected " +
                                             std::to_string(arch_.cond_dim()));
    }
    auto out = arch_.kind == Architecture::Unet ? unet_forward(arch_, p, xt, t, c)
                                                : transformer_forward(arch_, p, xt, t, c);
    for (double v : out.value()) {
        if (!std::isfinite(v)) {
            fail(ErrorCode::Numerical, "non-finite denoiser activation at step " + std::to_string(t));
        }
    }
    return out;
}

std::vector<double> DenoiserNet::predict(std::span<const double> xt, std::size_t t,
                                         const ConditionVector* c) const {
    Binder p(params_, false);
    auto x = ad::Var::constant(arch_.channels(), arch_.length,
                               std::vector<double>(xt.begin(), xt.end()));
    auto out = forward(p, x, t, c);
    return std::vector<double>(out.value().begin(), out.value().end());
}

} // namespace microtrip
