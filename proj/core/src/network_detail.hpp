#pragma once

#include <cmath>
#include <string>

#include "microtrip/network.hpp"

namespace microtrip::detail {

struct Initializer {
    ParamStore& store;
    Rng& rng;

    void weight(const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> v(rows * cols);
        for (double& x : v) {
            x = rng.uniform(-bound, bound);
        }
        store.add(name, rows, cols, std::move(v));
    }

    void fill(const std::string& name, std::size_t rows, std::size_t cols, double value) {
        store.add(name, rows, cols, std::vector<double>(rows * cols, value));
    }

    /// in x out weight plus 1 x out bias.
    void linear(const std::string& name, std::size_t in, std::size_t out, double bias = 0.0) {
        weight(name + ".w", in, out, in);
        fill(name + ".b", 1, out, bias);
    }

    void conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k) {
        weight(name + ".w", cout, cin * k, cin * k);
        fill(name + ".b", cout, 1, 0.0);
    }

    void time_mlp(const std::string& name, std::size_t d) {
        linear(name + ".l1", d, d);
        linear(name + ".l2", d, d);
    }
};

void declare_unet(const ArchConfig& arch, Initializer& init);
void declare_transformer(const ArchConfig& arch, Initializer& init);

} // namespace microtrip::detail
