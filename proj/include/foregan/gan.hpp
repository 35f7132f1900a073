#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "foregan/data.hpp"
#include "foregan/ops.hpp"
#include "foregan/rng.hpp"

namespace foregan {

// 1-D point in latent space Z.
using LatentCode = std::vector<float>;

struct TrainConfig {
    int latent_dim = 100;
    int batch_size = 32;
    int steps = 0;
    float lr = 2e-4f;
    float adam_beta1 = 0.5f;
    float adam_beta2 = 0.999f;
    std::uint64_t seed = 0;
};

// Generator + discriminator parameter sets. The generator projects the
// latent vector to a (size/8)^2 x 128 feature map and upsamples through
// three stride-2 transposed convolutions to a tanh image head; the
// discriminator mirrors it with stride-2 convolutions, leaky-relu(0.2) and
// a sigmoid head.
struct GanModel {
    std::map<std::string, Tensor> gen_params;
    std::map<std::string, Tensor> disc_params;
    int latent_dim = 100;
    int image_size = 64;
    int channels = 1;

    static constexpr float kNormEps = 1e-5f;

    static GanModel init(int latent_dim, int image_size, int channels, Rng& rng) {
        if (latent_dim < 1) throw ContractError("GanModel: latent_dim must be >= 1");
        if (image_size < 8 || image_size % 8 != 0)
            throw ContractError("GanModel: image_size must be a positive multiple of 8");
        if (channels < 1) throw ContractError("GanModel: channels must be >= 1");
        GanModel m;
        m.latent_dim = latent_dim;
        m.image_size = image_size;
        m.channels = channels;
        const std::int64_t b = image_size / 8;

        auto normal_tensor = [&rng](Shape shape, float stddev, float mean = 0.0f) {
            Tensor t = Tensor::zeros(std::move(shape));
            for (auto& v : t.mutable_data()) v = rng.normal(mean, stddev);
            t.set_requires_grad(true);
            return t;
        };
        auto const_tensor = [](Shape shape, float v) {
            Tensor t = Tensor::full(std::move(shape), v);
            t.set_requires_grad(true);
            return t;
        };

        // Dense layers start at 1/fan_in so fresh heads sit near zero;
        // convolutions use the DCGAN 0.02 convention.
        m.gen_params["proj.w"] =
            normal_tensor({latent_dim, 128 * b * b}, 1.0f / static_cast<float>(latent_dim));
        m.gen_params["proj.b"] = const_tensor({128 * b * b}, 0.0f);
        m.gen_params["norm0.gamma"] = normal_tensor({128}, 0.02f, 1.0f);
        m.gen_params["norm0.beta"] = const_tensor({128}, 0.0f);
        m.gen_params["up1.k"] = normal_tensor({128, 64, 4, 4}, 0.02f);
        m.gen_params["norm1.gamma"] = normal_tensor({64}, 0.02f, 1.0f);
        m.gen_params["norm1.beta"] = const_tensor({64}, 0.0f);
        m.gen_params["up2.k"] = normal_tensor({64, 32, 4, 4}, 0.02f);
        m.gen_params["norm2.gamma"] = normal_tensor({32}, 0.02f, 1.0f);
        m.gen_params["norm2.beta"] = const_tensor({32}, 0.0f);
        m.gen_params["up3.k"] = normal_tensor({32, channels, 4, 4}, 0.02f);

        const std::int64_t head_in = 128 * b * b;
        m.disc_params["conv1.k"] = normal_tensor({32, channels, 4, 4}, 0.02f);
        m.disc_params["conv2.k"] = normal_tensor({64, 32, 4, 4}, 0.02f);
        m.disc_params["norm2.gamma"] = normal_tensor({64}, 0.02f, 1.0f);
        m.disc_params["norm2.beta"] = const_tensor({64}, 0.0f);
        m.disc_params["conv3.k"] = normal_tensor({128, 64, 4, 4}, 0.02f);
        m.disc_params["norm3.gamma"] = normal_tensor({128}, 0.02f, 1.0f);
        m.disc_params["norm3.beta"] = const_tensor({128}, 0.0f);
        m.disc_params["head.w"] =
            normal_tensor({head_in, 1}, 1.0f / static_cast<float>(head_in));
        m.disc_params["head.b"] = const_tensor({1}, 0.0f);
        return m;
    }

    const Tensor& gp(const std::string& name) const {
        const auto it = gen_params.find(name);
        if (it == gen_params.end()) throw ContractError("missing generator parameter: " + name);
        return it->second;
    }
    const Tensor& dp(const std::string& name) const {
        const auto it = disc_params.find(name);
        if (it == disc_params.end())
            throw ContractError("missing discriminator parameter: " + name);
        return it->second;
    }

    // z: [N, latent_dim] -> [N, channels, image_size, image_size] in [-1,1].
    Tensor generator_forward(const Tensor& z) const {
        if (z.rank() != 2 || z.dim(1) != latent_dim)
            throw DimensionError("generator: latent shape " + shape_str(z.shape()) +
                                 " does not match latent_dim " + std::to_string(latent_dim));
        const std::int64_t n = z.dim(0);
        const std::int64_t b = image_size / 8;
        Tensor h = dense(z, gp("proj.w"), gp("proj.b"));
        h = reshape(h, {n, 128, b, b});
        h = relu(channel_norm(h, gp("norm0.gamma"), gp("norm0.beta"), kNormEps));
        h = conv_transpose2d(h, gp("up1.k"), 2, 1);
        h = relu(channel_norm(h, gp("norm1.gamma"), gp("norm1.beta"), kNormEps));
        h = conv_transpose2d(h, gp("up2.k"), 2, 1);
        h = relu(channel_norm(h, gp("norm2.gamma"), gp("norm2.beta"), kNormEps));
        h = conv_transpose2d(h, gp("up3.k"), 2, 1);
        return tanh(h);
    }

    // x: [N, channels, image_size, image_size] -> [N,1] in (0,1).
    Tensor discriminator_forward(const Tensor& x) const {
        if (x.rank() != 4 || x.dim(1) != channels || x.dim(2) != image_size ||
            x.dim(3) != image_size)
            throw DimensionError("discriminator: input shape " + shape_str(x.shape()) +
                                 " does not match model image shape [N," +
                                 std::to_string(channels) + "," + std::to_string(image_size) +
                                 "," + std::to_string(image_size) + "]");
        const std::int64_t n = x.dim(0);
        const std::int64_t b = image_size / 8;
        Tensor h = leaky_relu(conv2d(x, dp("conv1.k"), 2, 1), 0.2f);
        h = conv2d(h, dp("conv2.k"), 2, 1);
        h = leaky_relu(channel_norm(h, dp("norm2.gamma"), dp("norm2.beta"), kNormEps), 0.2f);
        h = conv2d(h, dp("conv3.k"), 2, 1);
        h = leaky_relu(channel_norm(h, dp("norm3.gamma"), dp("norm3.beta"), kNormEps), 0.2f);
        h = reshape(h, {n, 128 * b * b});
        h = dense(h, dp("head.w"), dp("head.b"));
        return sigmoid(h);
    }

    void set_gen_trainable(bool v) const {
        for (const auto& [name, t] : gen_params) t.impl()->requires_grad = v;
    }
    void set_disc_trainable(bool v) const {
        for (const auto& [name, t] : disc_params) t.impl()->requires_grad = v;
    }
    // Idempotent; parallel readers of an already-frozen model never write.
    void freeze() const {
        for (const auto& [name, t] : gen_params)
            if (t.impl()->requires_grad) t.impl()->requires_grad = false;
        for (const auto& [name, t] : disc_params)
            if (t.impl()->requires_grad) t.impl()->requires_grad = false;
    }

    GanModel clone() const {
        GanModel m;
        m.latent_dim = latent_dim;
        m.image_size = image_size;
        m.channels = channels;
        for (const auto& [name, t] : gen_params) m.gen_params[name] = t.clone();
        for (const auto& [name, t] : disc_params) m.disc_params[name] = t.clone();
        return m;
    }
};

// Uniform [-1,1] latent sample.
inline LatentCode sample_latent(Rng& rng, int latent_dim) {
    if (latent_dim < 1) throw ContractError("sample_latent: latent_dim must be >= 1");
    LatentCode z(static_cast<std::size_t>(latent_dim));
    for (auto& v : z) v = rng.uniform(-1.0f, 1.0f);
    return z;
}

inline Tensor latent_to_tensor(const LatentCode& z) {
    return Tensor::from_data({1, static_cast<std::int64_t>(z.size())},
                             std::vector<float>(z.begin(), z.end()));
}

// Plain inference forward; never records on a tape.
inline Tensor generate(const GanModel& model, const LatentCode& z) {
    if (static_cast<int>(z.size()) != model.latent_dim)
        throw DimensionError("generate: latent length " + std::to_string(z.size()) +
                             " does not match latent_dim " + std::to_string(model.latent_dim));
    Tape::NoGradScope no_grad;
    return model.generator_forward(latent_to_tensor(z));
}

inline float discriminate(const GanModel& model, const Tensor& x) {
    Tape::NoGradScope no_grad;
    return model.discriminator_forward(x).item();
}

// Per-parameter first/second moment accumulators.
struct AdamState {
    std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> moments;
    std::int64_t step = 0;
};

// One Adam update over every parameter that received a gradient; consumes
// (clears) the gradients it applies.
inline void adam_step(std::map<std::string, Tensor>& params, AdamState& state, float lr,
                      float beta1, float beta2, float eps = 1e-8f) {
    ++state.step;
    const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(state.step));
    const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(state.step));
    for (auto& [name, p] : params) {
        if (!p.has_grad()) continue;
        auto& [m, v] = state.moments[name];
        const std::size_t n = static_cast<std::size_t>(p.numel());
        if (m.size() != n) {
            m.assign(n, 0.0f);
            v.assign(n, 0.0f);
        }
        auto vals = p.mutable_data();
        auto g = p.grad();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
            const float mhat = m[i] / bc1;
            const float vhat = v[i] / bc2;
            vals[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        p.zero_grad();
    }
}

namespace detail {

inline Tensor nth_sample(const Tensor& batch, std::int64_t i) {
    const std::int64_t per = batch.numel() / batch.dim(0);
    std::vector<float> vals(batch.data().begin() + i * per, batch.data().begin() + (i + 1) * per);
    return Tensor::from_data({1, batch.dim(1), batch.dim(2), batch.dim(3)}, std::move(vals));
}

} // namespace detail

// One discriminator update: maximize log D(x) + log(1 - D(G(z))), taken as
// bce against targets 1 (real) and 0 (generated). Returns the loss before
// the update.
inline float discriminator_update(GanModel& model, const Tensor& batch, AdamState& dstate,
                                  Rng& rng, const TrainConfig& cfg) {
    const std::int64_t n = batch.dim(0);
    std::vector<Tensor> fakes;
    fakes.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        fakes.push_back(generate(model, sample_latent(rng, model.latent_dim)));

    model.set_gen_trainable(false);
    model.set_disc_trainable(true);
    Tape tape;
    float value = 0.0f;
    {
        Tape::Scope scope(tape);
        Tensor total = Tensor::scalar(0.0f);
        for (std::int64_t i = 0; i < n; ++i) {
            const Tensor real = detail::nth_sample(batch, i);
            total = add(total, bce(model.discriminator_forward(real), 1.0f));
            total = add(total, bce(model.discriminator_forward(fakes[static_cast<std::size_t>(i)]),
                                   0.0f));
        }
        Tensor loss = smul(total, 1.0f / static_cast<float>(n));
        value = loss.item();
        backward(loss);
    }
    adam_step(model.disc_params, dstate, cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    model.set_gen_trainable(true);
    return value;
}

// One generator update with the non-saturating surrogate: minimize
// bce(D(G(z)), 1). Returns the loss before the update.
inline float generator_update(GanModel& model, std::int64_t n, AdamState& gstate, Rng& rng,
                              const TrainConfig& cfg) {
    model.set_disc_trainable(false);
    model.set_gen_trainable(true);
    Tape tape;
    float value = 0.0f;
    {
        Tape::Scope scope(tape);
        Tensor total = Tensor::scalar(0.0f);
        for (std::int64_t i = 0; i < n; ++i) {
            const Tensor z = latent_to_tensor(sample_latent(rng, model.latent_dim));
            const Tensor fake = model.generator_forward(z);
            total = add(total, bce(model.discriminator_forward(fake), 1.0f));
        }
        Tensor loss = smul(total, 1.0f / static_cast<float>(n));
        value = loss.item();
        backward(loss);
    }
    adam_step(model.gen_params, gstate, cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    model.set_disc_trainable(true);
    return value;
}

// One adversarial round: discriminator update, then generator update.
// Returns (d_loss, g_loss), each measured before its own update.
inline std::pair<float, float> train_step(GanModel& model, const Tensor& batch, AdamState& dstate,
                                          AdamState& gstate, Rng& rng, const TrainConfig& cfg) {
    if (batch.rank() != 4 || batch.dim(0) < 1)
        throw ContractError("train_step: batch must be a non-empty [N,C,S,S] tensor");
    const float d_loss = discriminator_update(model, batch, dstate, rng, cfg);
    const float g_loss = generator_update(model, batch.dim(0), gstate, rng, cfg);
    return {d_loss, g_loss};
}

using LossHistory = std::vector<std::pair<float, float>>;

// Adversarial training on background-only frames (already resized and
// normalized to [-1,1]). Deterministic for a fixed seed.
inline std::pair<GanModel, LossHistory> train(
    const Sequence& frames, const TrainConfig& cfg,
    const std::function<void(int, float, float)>& progress = nullptr) {
    if (frames.frames.empty()) throw ContractError("train: empty training set");
    if (cfg.batch_size < 1) throw ContractError("train: batch_size must be >= 1");
    if (cfg.steps < 0) throw ContractError("train: steps must be >= 0");
    if (!(cfg.lr > 0.0f)) throw ContractError("train: lr must be > 0");
    const Frame& first = frames.frames[0];
    if (first.width != first.height)
        throw ContractError("train: frames must be square after preprocessing");

    Rng rng(cfg.seed);
    GanModel model = GanModel::init(cfg.latent_dim, first.width, first.channels, rng);
    AdamState dstate, gstate;
    LossHistory history;
    history.reserve(static_cast<std::size_t>(cfg.steps));

    const std::int64_t n_frames = static_cast<std::int64_t>(frames.frames.size());
    const std::int64_t bs = cfg.batch_size;
    const std::int64_t per = static_cast<std::int64_t>(first.pixels.size());
    for (int step = 0; step < cfg.steps; ++step) {
        Tensor batch = Tensor::zeros({bs, first.channels, first.height, first.width});
        auto bd = batch.mutable_data();
        for (std::int64_t i = 0; i < bs; ++i) {
            const auto& f = frames.frames[static_cast<std::size_t>(rng.below(n_frames))];
            std::copy(f.pixels.begin(), f.pixels.end(), bd.begin() + i * per);
        }
        const auto [d_loss, g_loss] = train_step(model, batch, dstate, gstate, rng, cfg);
        history.emplace_back(d_loss, g_loss);
        if (progress) progress(step, d_loss, g_loss);
    }
    return {std::move(model), std::move(history)};
}

} // namespace foregan
