#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "foregan/gan.hpp"
#include "foregan/ops.hpp"

namespace foregan {

enum class InversionOptimizer { PlainGradient, Adam };

struct InversionConfig {
    int steps = 2000;
    float lr = 0.01f;
    InversionOptimizer optimizer = InversionOptimizer::Adam;
    int restarts = 1;
    std::uint64_t seed = 0;
    bool clip_z = false;                       // clamp iterates to [-1,1]
    std::optional<std::vector<float>> init_z;  // first restart starts here when set
};

struct InversionResult {
    LatentCode best_z;
    Tensor background; // generator output at best_z
    float best_loss = std::numeric_limits<float>::infinity();
    std::vector<float> trajectory; // per-step loss, restarts concatenated
};

// Sum of absolute elementwise differences between a test frame and a
// generated background candidate.
inline Tensor residual_loss(const Tensor& x, const Tensor& gz) {
    if (x.shape() != gz.shape())
        throw DimensionError("residual_loss: shape mismatch x=" + shape_str(x.shape()) +
                             ", gz=" + shape_str(gz.shape()));
    return l1_sum(x, gz);
}

// Gradient-descent recovery of the latent code whose decoded image best
// reconstructs x; `gen` maps a [1,latent_dim] tensor to an image tensor and
// must be differentiable through the active tape. Only z is updated.
template <class Gen>
inline InversionResult invert_with(Gen&& gen, int latent_dim, const Tensor& x,
                                   const InversionConfig& cfg) {
    if (cfg.steps < 1) throw ContractError("invert: steps must be >= 1");
    if (!(cfg.lr > 0.0f)) throw ContractError("invert: lr must be > 0");
    if (cfg.restarts < 1) throw ContractError("invert: restarts must be >= 1");
    if (cfg.init_z && static_cast<int>(cfg.init_z->size()) != latent_dim)
        throw DimensionError("invert: init_z length " + std::to_string(cfg.init_z->size()) +
                             " does not match latent_dim " + std::to_string(latent_dim));

    Rng rng(cfg.seed);
    InversionResult result;
    result.trajectory.reserve(static_cast<std::size_t>(cfg.steps) *
                              static_cast<std::size_t>(cfg.restarts));

    const std::size_t dim = static_cast<std::size_t>(latent_dim);
    for (int restart = 0; restart < cfg.restarts; ++restart) {
        std::vector<float> zv;
        if (restart == 0 && cfg.init_z) {
            zv = *cfg.init_z;
            // Keep the draw so later restarts see the same stream prefix
            // whether or not an explicit start was given.
            sample_latent(rng, latent_dim);
        } else {
            zv = sample_latent(rng, latent_dim);
        }
        Tensor z = Tensor::from_data({1, latent_dim}, zv);
        z.set_requires_grad(true);

        std::vector<float> m(dim, 0.0f), v(dim, 0.0f);
        constexpr float kBeta1 = 0.9f, kBeta2 = 0.999f, kEps = 1e-8f;
        Tape tape;
        for (int step = 0; step < cfg.steps; ++step) {
            tape.clear();
            z.zero_grad();
            float loss_value = 0.0f;
            {
                Tape::Scope scope(tape);
                Tensor gz = gen(z);
                Tensor loss = residual_loss(x, gz);
                loss_value = loss.item();
                if (!std::isfinite(loss_value))
                    throw NumericError("invert: non-finite loss at step " +
                                       std::to_string(result.trajectory.size()));
                backward(loss);
            }
            result.trajectory.push_back(loss_value);
            if (loss_value < result.best_loss) {
                result.best_loss = loss_value;
                result.best_z.assign(z.data().begin(), z.data().end());
            }
            auto g = z.grad();
            auto vals = z.mutable_data();
            if (cfg.optimizer == InversionOptimizer::Adam) {
                // Cosine-annealed step size over the fixed budget; constant
                // lr leaves the L1 iteration in a limit cycle of radius
                // proportional to lr instead of converging.
                const float anneal =
                    0.5f * (1.0f + std::cos(3.14159265358979323846f * static_cast<float>(step) /
                                            static_cast<float>(cfg.steps)));
                const float lr = cfg.lr * anneal;
                const float bc1 = 1.0f - std::pow(kBeta1, static_cast<float>(step + 1));
                const float bc2 = 1.0f - std::pow(kBeta2, static_cast<float>(step + 1));
                for (std::size_t i = 0; i < dim; ++i) {
                    m[i] = kBeta1 * m[i] + (1.0f - kBeta1) * g[i];
                    v[i] = kBeta2 * v[i] + (1.0f - kBeta2) * g[i] * g[i];
                    vals[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
                }
            } else {
                for (std::size_t i = 0; i < dim; ++i) vals[i] -= cfg.lr * g[i];
            }
            if (cfg.clip_z)
                for (std::size_t i = 0; i < dim; ++i)
                    vals[i] = std::min(std::max(vals[i], -1.0f), 1.0f);
        }
    }

    {
        Tape::NoGradScope no_grad;
        result.background = gen(Tensor::from_data(
            {1, latent_dim}, std::vector<float>(result.best_z.begin(), result.best_z.end())));
    }
    return result;
}

// Inversion against a trained model; generator parameters are frozen and
// bit-identical before and after.
inline InversionResult invert(const GanModel& model, const Tensor& x, const InversionConfig& cfg) {
    if (x.rank() != 4 || x.dim(0) != 1 || x.dim(1) != model.channels ||
        x.dim(2) != model.image_size || x.dim(3) != model.image_size)
        throw DimensionError("invert: frame shape " + shape_str(x.shape()) +
                             " does not match model image shape [1," +
                             std::to_string(model.channels) + "," +
                             std::to_string(model.image_size) + "," +
                             std::to_string(model.image_size) + "]");
    model.freeze();
    return invert_with([&model](const Tensor& z) { return model.generator_forward(z); },
                       model.latent_dim, x, cfg);
}

// step,loss rows; one line per recorded step, LF endings.
inline std::string trajectory_csv(const std::vector<float>& trajectory) {
    std::string out = "step,loss\n";
    for (std::size_t i = 0; i < trajectory.size(); ++i)
        out += std::to_string(i) + "," + std::to_string(trajectory[i]) + "\n";
    return out;
}

} // namespace foregan
