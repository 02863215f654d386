#include "microtrip/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "microtrip/error.hpp"
#include "microtrip/parallel.hpp"

namespace microtrip {

namespace {

constexpr std::uint64_t kPermStream = 0x7065726d;
constexpr std::uint64_t kNoiseStream = 0;
constexpr std::uint64_t kDropStream = 1;

} // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
    if (params.size() != grads.size()) {
        fail(ErrorCode::InvalidArgument, "adam_step: parameter and gradient sizes differ");
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", adam.lr},
            {"adam_beta1", adam.beta1},
            {"adam_beta2", adam.beta2},
            {"adam_eps", adam.eps},
            {"cond_dropout", cond_dropout},
            {"physics", physics.to_json()},
            {"mse_only", mse_only},
            {"physics_reduction", physics_reduction},
            {"physics_weighting", physics_weighting},
            {"schedule", to_string(schedule)},
            {"diffusion_steps", diffusion_steps},
            {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "epochs") {
                c.epochs = value.get<std::size_t>();
            } else if (key == "batch_size") {
                c.batch_size = value.get<std::size_t>();
            } else if (key == "learning_rate") {
                c.adam.lr = value.get<double>();
            } else if (key == "adam_beta1") {
                c.adam.beta1 = value.get<double>();
            } else if (key == "adam_beta2") {
                c.adam.beta2 = value.get<double>();
            } else if (key == "adam_eps") {
                c.adam.eps = value.get<double>();
            } else if (key == "cond_dropout") {
                c.cond_dropout = value.get<double>();
            } else if (key == "physics") {
                c.physics = PhysicsConfig::from_json(value);
            } else if (key == "mse_only") {
                c.mse_only = value.get<bool>();
            } else if (key == "physics_reduction") {
                c.physics_reduction = value.get<std::string>();
            } else if (key == "physics_weighting") {
                c.physics_weighting = value.get<std::string>();
            } else if (key == "schedule") {
                c.schedule = parse_schedule_kind(value.get<std::string>());
            } else if (key == "diffusion_steps") {
                c.diffusion_steps = value.get<std::size_t>();
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else {
                fail(ErrorCode::Config, "train: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("train: ") + e.what());
    }
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (batch_size == 0) {
        fail(ErrorCode::Config, "train: batch_size must be positive");
    }
    if (!(adam.lr > 0) || adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 ||
        adam.beta2 >= 1 || !(adam.eps > 0)) {
        fail(ErrorCode::Config, "train: invalid Adam settings");
    }
    if (cond_dropout < 0 || cond_dropout > 1) {
        fail(ErrorCode::Config, "train: cond_dropout must lie in [0, 1]");
    }
    if (diffusion_steps < 2) {
        fail(ErrorCode::Config, "train: diffusion_steps must be at least 2");
    }
    if (physics_reduction != "sum" && physics_reduction != "mean") {
        fail(ErrorCode::Config, "train: physics_reduction must be sum or mean");
    }
    if (physics_weighting != "none" && physics_weighting != "alpha_bar") {
        fail(ErrorCode::Config, "train: physics_weighting must be none or alpha_bar");
    }
    physics.validate();
}

TrainingItem make_training_item(const MicroTrip& trip, const ArchConfig& arch) {
    if (arch.length != kWindowLength) {
        fail(ErrorCode::InvalidArgument, "training items need a window length of 512");
    }
    const auto speeds = trip.speeds();
    const auto stats = trip.stats();
    const auto state = to_diffusion_state(speeds, static_cast<int>(arch.channels()));
    TrainingItem item;
    item.x0 = state.values;
    item.valid_length = state.valid_length;
    item.cond = arch.kind == Architecture::Unet
                    ? unet_condition(stats.avg_speed_mps, stats.duration_s)
                    : csdi_condition(stats.avg_speed_mps, stats.duration_s, stats.max_speed_mps,
                                     vehicle_dynamics_index(speeds));
    return item;
}

std::vector<bool> condition_dropout_mask(std::uint64_t seed, std::size_t epoch, std::size_t batch,
                                         std::size_t batch_size, double p) {
    std::vector<bool> mask(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        Rng r(seed, {epoch, batch, i, kDropStream});
        mask[i] = r.uniform() < p;
    }
    return mask;
}

CsdiLoss item_loss(const DenoiserNet& net, const Binder& p, const TrainingItem& item,
                   std::size_t t, std::span<const double> eps, bool drop_condition,
                   const NoiseSchedule& sched, const TrainConfig& cfg) {
    const auto& arch = net.arch();
    const std::size_t C = arch.channels(), L = arch.length;
    const auto xt = forward_sample(item.x0, t, eps, sched);
    auto xt_var = ad::Var::constant(C, L, xt);
    auto eps_var = ad::Var::constant(C, L, std::vector<double>(eps.begin(), eps.end()));
    auto eps_hat = net.forward(p, xt_var, t, drop_condition ? nullptr : &item.cond);
    if (arch.kind == Architecture::Unet || cfg.mse_only) {
        CsdiLoss out;
        out.total = ad::mse(eps_hat, eps_var);
        out.terms.mse = out.total.item();
        out.terms.total = out.terms.mse;
        return out;
    }
    const double a = std::sqrt(sched.alpha_bar[t]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
    auto x0_hat = ad::scale(ad::sub(xt_var, ad::scale(eps_hat, b)), 1.0 / a);
    auto v0_hat = ad::scale(ad::slice_cols(x0_hat, 0, item.valid_length), kSpeedScale);
    const double scale = cfg.physics_weighting == "alpha_bar" ? sched.alpha_bar[t] : 1.0;
    return loss_csdi(eps_var, eps_hat, v0_hat, cfg.physics, scale,
                     cfg.physics_reduction == "mean");
}

TrainResult train(DenoiserNet& net, const std::vector<TrainingItem>& items,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    if (items.empty()) {
        fail(ErrorCode::DegenerateInput, "training set is empty");
    }
    const auto& arch = net.arch();
    const std::size_t n_values = arch.channels() * arch.length;
    for (const auto& it : items) {
        if (it.x0.size() != n_values) {
            fail(ErrorCode::InvalidArgument, "training item does not match the architecture");
        }
    }
    const auto sched = make_schedule(cfg.schedule, cfg.diffusion_steps);
    const std::size_t n = items.size();
    const std::size_t B = cfg.batch_size;
    const std::size_t batches = std::max<std::size_t>(1, (n + B - 1) / B);
    const std::size_t P = net.params().scalar_count();

    TrainResult result;
    AdamState adam;
    std::vector<double> grad(P);
    std::size_t global_batch = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        Rng perm_rng(cfg.seed, {epoch, kPermStream});
        perm_rng.shuffle(perm.begin(), perm.end());

        LossTerms sums;
        for (std::size_t b = 0; b < batches; ++b, ++global_batch) {
            const auto drop = condition_dropout_mask(cfg.seed, epoch, b, B, cfg.cond_dropout);
            std::vector<std::vector<double>> item_grads(B);
            std::vector<LossTerms> item_terms(B);
            const ParamStore& store = net.params();
            parallel_for(B, [&](std::size_t i) {
                const auto& item = items[perm[(b * B + i) % n]];
                Rng r(cfg.seed, {epoch, b, i, kNoiseStream});
                const std::size_t t = 1 + static_cast<std::size_t>(r.below(sched.steps));
                const auto eps = r.normals(n_values);
                Binder p(store, true);
                CsdiLoss loss;
                try {
                    loss = item_loss(net, p, item, t, eps, drop[i], sched, cfg);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::Numerical) {
                        throw;
                    }
                    item_terms[i].total = std::numeric_limits<double>::quiet_NaN();
                    return;
                }
                item_terms[i] = loss.terms;
                if (!std::isfinite(loss.terms.total)) {
                    return;
                }
                ad::scale(loss.total, 1.0 / static_cast<double>(B)).backward();
                item_grads[i].assign(P, 0.0);
                p.gather_grads(item_grads[i]);
            });
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = 0; i < B; ++i) {
                if (!std::isfinite(item_terms[i].total)) {
                    fail(ErrorCode::Numerical, "non-finite loss in epoch " + std::to_string(epoch) +
                                                   ", batch " + std::to_string(global_batch));
                }
                for (std::size_t k = 0; k < P; ++k) {
                    grad[k] += item_grads[i][k];
                }
                sums.mse += item_terms[i].mse;
                sums.smooth += item_terms[i].smooth;
                sums.accel += item_terms[i].accel;
                sums.jerk += item_terms[i].jerk;
                sums.accel_dist += item_terms[i].accel_dist;
                sums.total += item_terms[i].total;
            }
            adam_step(net.params().flat(), grad, adam, cfg.adam);
        }
        const double count = static_cast<double>(batches * B);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean = {sums.mse / count,  sums.smooth / count,     sums.accel / count,
                    sums.jerk / count, sums.accel_dist / count, sums.total / count};
        result.history.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }
    }
    return result;
}

void write_loss_csv(const std::vector<EpochRecord>& history, const PhysicsConfig& physics,
                    std::ostream& out) {
    out << "epoch,total,mse,smooth,accel,jerk,accel_dist,"
           "w_smooth_term,w_accel_term,w_jerk_term,w_accel_dist_term\n";
    out.precision(17);
    for (const auto& r : history) {
        const auto& m = r.mean;
        out << r.epoch << ',' << m.total << ',' << m.mse << ',' << m.smooth << ',' << m.accel << ','
            << m.jerk << ',' << m.accel_dist << ',' << physics.w_smooth * m.smooth << ','
            << physics.w_accel * m.accel << ',' << physics.w_jerk * m.jerk << ','
            << physics.w_accel_dist * m.accel_dist << '\n';
    }
}

GradCheckResult grad_check(const std::function<ad::Var(const Binder&)>& loss, ParamStore& params,
                           std::size_t coords, std::uint64_t seed, double h) {
    GradCheckResult res;
    std::vector<double> analytic(params.scalar_count(), 0.0);
    {
        Binder p(params, true);
        loss(p).backward();
        p.gather_grads(analytic);
    }
    auto eval = [&]() {
        Binder p(params, false);
        return loss(p).item();
    };
    auto& flat = params.flat();
    const double f0 = eval();
    Rng rng(seed);
    const std::size_t n = std::min(coords, flat.size());
    std::vector<std::size_t> idx(flat.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx.begin(), idx.end());
    constexpr double kFloor = 1e-6;
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t i = idx[c];
        const double saved = flat[i];
        flat[i] = saved + h;
        const double fp = eval();
        flat[i] = saved - h;
        const double fm = eval();
        flat[i] = saved;
        const double fwd = (fp - f0) / h;
        const double bwd = (f0 - fm) / h;
        if (std::abs(fwd - bwd) > 1e-2 * std::max({std::abs(fwd), std::abs(bwd), 1e-3})) {
            ++res.skipped_kinks;
            continue;
        }
        const double fd = (fp - fm) / (2.0 * h);
        const double rel = std::abs(analytic[i] - fd) /
                           std::max({std::abs(analytic[i]), std::abs(fd), kFloor});
        res.max_rel_error = std::max(res.max_rel_error, rel);
        ++res.checked;
    }
    return res;
}

} // namespace microtrip
