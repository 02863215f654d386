#include "microtrip/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "microtrip/error.hpp"

namespace microtrip {

namespace {

std::vector<double> diff(std::span<const double> v) {
    std::vector<double> d(v.size() > 0 ? v.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        d[i] = v[i + 1] - v[i];
    }
    return d;
}

double relu(double x) {
    return x > 0.0 ? x : 0.0;
}

double cap_penalty(std::span<const double> a, double up, double down) {
    double s = 0.0;
    for (double x : a) {
        const double hi = relu(x - up);
        const double lo = relu(-x - down);
        s += hi * hi + lo * lo;
    }
    return s;
}

ad::Var cap_penalty(const ad::Var& a, double up, double down) {
    auto hi = ad::relu(ad::add_scalar(a, -up));
    auto lo = ad::relu(ad::add_scalar(ad::scale(a, -1.0), -down));
    return ad::add(ad::sum(ad::square(hi)), ad::sum(ad::square(lo)));
}

} // namespace

nlohmann::json PhysicsConfig::to_json() const {
    return {{"w_smooth", w_smooth},       {"w_accel", w_accel},
            {"w_jerk", w_jerk},           {"w_accel_dist", w_accel_dist},
            {"accel_cap", accel_cap},     {"brake_cap", brake_cap},
            {"jerk_cap", jerk_cap},       {"sigma_a_target", sigma_a_target}};
}

PhysicsConfig PhysicsConfig::from_json(const nlohmann::json& j) {
    PhysicsConfig c;
    for (const auto& [key, value] : j.items()) {
        double* slot = key == "w_smooth"         ? &c.w_smooth
                       : key == "w_accel"        ? &c.w_accel
                       : key == "w_jerk"         ? &c.w_jerk
                       : key == "w_accel_dist"   ? &c.w_accel_dist
                       : key == "accel_cap"      ? &c.accel_cap
                       : key == "brake_cap"      ? &c.brake_cap
                       : key == "jerk_cap"       ? &c.jerk_cap
                       : key == "sigma_a_target" ? &c.sigma_a_target
                                                 : nullptr;
        if (slot == nullptr) {
            fail(ErrorCode::Config, "physics: unknown key '" + key + "'");
        }
        if (!value.is_number()) {
            fail(ErrorCode::Config, "physics: '" + key + "' must be a number");
        }
        *slot = value.get<double>();
    }
    c.validate();
    return c;
}

void PhysicsConfig::validate() const {
    if (w_smooth < 0 || w_accel < 0 || w_jerk < 0 || w_accel_dist < 0) {
        fail(ErrorCode::Config, "physics weights must be >= 0");
    }
    if (accel_cap <= 0 || brake_cap <= 0 || jerk_cap <= 0) {
        fail(ErrorCode::Config, "physics caps must be > 0");
    }
    if (sigma_a_target < 0) {
        fail(ErrorCode::Config, "sigma_a_target must be >= 0");
    }
}

double loss_simple(std::span<const double> eps, std::span<const double> eps_hat) {
    if (eps.size() != eps_hat.size() || eps.empty()) {
        fail(ErrorCode::InvalidArgument, "loss_simple: size mismatch or empty input");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = eps[i] - eps_hat[i];
        s += d * d;
    }
    return s / static_cast<double>(eps.size());
}

double loss_smooth(std::span<const double> v) {
    double s = 0.0;
    for (std::size_t t = 0; t + 2 < v.size(); ++t) {
        const double d = v[t + 2] - 2.0 * v[t + 1] + v[t];
        s += d * d;
    }
    return s;
}

double loss_accel(std::span<const double> v, double accel_cap, double brake_cap) {
    return cap_penalty(diff(v), accel_cap, brake_cap);
}

double loss_jerk(std::span<const double> v, double jerk_cap) {
    const auto a = diff(v);
    return cap_penalty(diff(a), jerk_cap, jerk_cap);
}

double loss_accel_dist(std::span<const double> v, double sigma_target) {
    const auto a = diff(v);
    if (a.empty()) {
        return sigma_target * sigma_target;
    }
    double m = 0.0;
    for (double x : a) {
        m += x;
    }
    m /= static_cast<double>(a.size());
    double var = 0.0;
    for (double x : a) {
        var += (x - m) * (x - m);
    }
    const double sd = std::sqrt(var / static_cast<double>(a.size()));
    return (sd - sigma_target) * (sd - sigma_target);
}

ad::Var loss_smooth(const ad::Var& v) {
    if (v.cols() < 3) {
        return ad::Var::zeros(1, 1);
    }
    return ad::sum(ad::square(ad::diff1(ad::diff1(v))));
}

ad::Var loss_accel(const ad::Var& v, double accel_cap, double brake_cap) {
    return cap_penalty(ad::diff1(v), accel_cap, brake_cap);
}

ad::Var loss_jerk(const ad::Var& v, double jerk_cap) {
    if (v.cols() < 3) {
        return ad::Var::zeros(1, 1);
    }
    return cap_penalty(ad::diff1(ad::diff1(v)), jerk_cap, jerk_cap);
}

ad::Var loss_accel_dist(const ad::Var& v, double sigma_target) {
    auto a = ad::diff1(v);
    const double n = static_cast<double>(a.size());
    auto mean = ad::scale(ad::sum(a), 1.0 / n);
    auto centered = ad::sub(a, ad::matmul(mean, ad::Var::constant(1, a.size(),
                                                                std::vector<double>(a.size(), 1.0))));
    auto sd = ad::sqrt(ad::mean(ad::square(centered)));
    return ad::square(ad::add_scalar(sd, -sigma_target));
}

double weighted_total(const LossTerms& t, const PhysicsConfig& cfg) {
    return t.mse + cfg.w_smooth * t.smooth + cfg.w_accel * t.accel + cfg.w_jerk * t.jerk +
           cfg.w_accel_dist * t.accel_dist;
}

CsdiLoss loss_csdi(const ad::Var& eps, const ad::Var& eps_hat, const ad::Var& v0_hat,
                   const PhysicsConfig& cfg, double physics_scale, bool mean_reduction) {
    CsdiLoss out;
    const double n = static_cast<double>(v0_hat.size());
    auto per = [&](const ad::Var& v, double terms) {
        return mean_reduction && terms > 0 ? ad::scale(v, 1.0 / terms) : v;
    };
    auto mse = ad::mse(eps_hat, eps);
    auto smooth = per(loss_smooth(v0_hat), n - 2);
    auto accel = per(loss_accel(v0_hat, cfg.accel_cap, cfg.brake_cap), n - 1);
    auto jerk = per(loss_jerk(v0_hat, cfg.jerk_cap), n - 2);
    auto dist = loss_accel_dist(v0_hat, cfg.sigma_a_target);
    out.terms.mse = mse.item();
    out.terms.smooth = physics_scale * smooth.item();
    out.terms.accel = physics_scale * accel.item();
    out.terms.jerk = physics_scale * jerk.item();
    out.terms.accel_dist = physics_scale * dist.item();
    out.terms.total = weighted_total(out.terms, cfg);
    auto phys = ad::add(ad::add(ad::scale(smooth, cfg.w_smooth), ad::scale(accel, cfg.w_accel)),
                        ad::add(ad::scale(jerk, cfg.w_jerk), ad::scale(dist, cfg.w_accel_dist)));
    out.total = ad::add(mse, ad::scale(phys, physics_scale));
    return out;
}

} // namespace microtrip
