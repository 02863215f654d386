#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "microtrip/autodiff.hpp"
#include "microtrip/diffusion.hpp"
#include "microtrip/rng.hpp"

namespace microtrip {

struct ParamEntry {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
};

/// Named parameter tensors stored back to back in one flat vector, in
/// declaration order. The optimizer works on the flat vector directly.
class ParamStore {
public:
    std::size_t add(std::string name, std::size_t rows, std::size_t cols,
                    std::vector<double> init);
    std::size_t index(std::string_view name) const;
    bool contains(std::string_view name) const;

    const std::vector<ParamEntry>& entries() const { return entries_; }
    std::span<const double> values(std::size_t index) const;
    std::span<double> values(std::size_t index);

    std::vector<double>& flat() { return flat_; }
    const std::vector<double>& flat() const { return flat_; }
    std::size_t scalar_count() const { return flat_.size(); }

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_name_;
    std::vector<double> flat_;
};

/// Graph leaves for one forward pass. Trainable binders collect gradients
/// back into a flat buffer laid out like the store.
class Binder {
public:
    Binder(const ParamStore& store, bool trainable);
    const ad::Var& operator()(std::string_view name) const;
    bool trainable() const { return trainable_; }
    /// Adds each leaf gradient into out (size = store.scalar_count()).
    void gather_grads(std::span<double> out) const;

private:
    const ParamStore* store_;
    bool trainable_;
    std::vector<ad::Var> vars_;
};

/// PE_i(t) = sin(t / 10000^(i/d)) for even i, cos(t / 10000^((i-1)/d)) for odd i.
std::vector<double> sinusoidal_embed(double t, std::size_t d);

/// h' = gamma (.) h + beta with per-row (channel) gamma, beta of shape C x 1.
ad::Var film_modulate(const ad::Var& h, const ad::Var& gamma, const ad::Var& beta);

enum class Architecture { Unet, Transformer };

std::string to_string(Architecture a);
Architecture parse_architecture(const std::string& name);

struct ArchConfig {
    Architecture kind = Architecture::Transformer;
    std::size_t length = kWindowLength;
    // U-Net
    std::vector<std::size_t> widths{16, 32, 64, 128};
    std::size_t unet_heads = 4;
    // Transformer
    std::size_t layers = 2;
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t d_ff = 128;

    std::size_t channels() const { return kind == Architecture::Unet ? 2 : 1; }
    std::size_t cond_dim() const { return kind == Architecture::Unet ? 2 : 4; }
    nlohmann::json to_json() const;
    static ArchConfig from_json(const nlohmann::json& j);
    void validate() const;
};

/// Named presets: unet-tiny, unet-desk, unet-full, csdi-tiny, csdi-desk, csdi-full.
ArchConfig arch_preset(const std::string& name);

/// Either denoiser network with its parameters.
class DenoiserNet : public Denoiser {
public:
    DenoiserNet(ArchConfig arch, std::uint64_t seed);
    DenoiserNet(ArchConfig arch, ParamStore params);

    const ArchConfig& arch() const { return arch_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    /// x_t: channels x length. Returns eps_hat with the same shape.
    ad::Var forward(const Binder& p, const ad::Var& xt, std::size_t t,
                    const ConditionVector* c) const;

    int channels() const override { return static_cast<int>(arch_.channels()); }
    std::vector<double> predict(std::span<const double> xt, std::size_t t,
                                const ConditionVector* c) const override;

private:
    ArchConfig arch_;
    ParamStore params_;
};

/// Declares every parameter of the architecture with its initial value:
/// weights uniform in +-1/sqrt(fan_in), biases 0, norm gains 1, FiLM
/// gamma-projection bias 1.
ParamStore init_params(const ArchConfig& arch, std::uint64_t seed);

ad::Var unet_forward(const ArchConfig& arch, const Binder& p, const ad::Var& xt, std::size_t t,
                     const ConditionVector* c);
ad::Var transformer_forward(const ArchConfig& arch, const Binder& p, const ad::Var& xt,
                            std::size_t t, const ConditionVector* c);

namespace layers {

/// x: N x in, weight "<name>.w" in x out, bias "<name>.b" 1 x out.
ad::Var linear(const Binder& p, const std::string& name, const ad::Var& x);

/// Time embedding MLP over the sinusoidal code: 1 x d.
ad::Var time_embedding(const Binder& p, const std::string& name, std::size_t t, std::size_t d);

std::size_t norm_groups(std::size_t channels);

} // namespace layers

} // namespace microtrip
