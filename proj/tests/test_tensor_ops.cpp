#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "foregan/grad_check.hpp"
#include "foregan/ops.hpp"
#include "foregan/parallel.hpp"
#include "foregan/rng.hpp"
#include "oracles.hpp"

using namespace foregan;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
    return t;
}

std::vector<float> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

} // namespace

TEST_CASE("dense forward matches definition and oracle") {
    SECTION("sum identity") {
        const Tensor x = Tensor::from_data({1, 2}, {1.0f, 2.0f});
        const Tensor w = Tensor::from_data({2, 1}, {1.0f, 1.0f});
        const Tensor b = Tensor::from_data({1}, {0.0f});
        CHECK(dense(x, w, b).item() == 3.0f);
    }
    SECTION("zero input passes bias") {
        Rng rng(7);
        const Tensor x = Tensor::from_data({1, 2}, {0.0f, 0.0f});
        const Tensor w = random_tensor({2, 1}, rng);
        const Tensor b = Tensor::from_data({1}, {5.0f});
        CHECK(dense(x, w, b).item() == 5.0f);
    }
    SECTION("random case against triple-loop oracle") {
        Rng rng(42);
        const Tensor x = random_tensor({3, 4}, rng);
        const Tensor w = random_tensor({4, 2}, rng);
        const Tensor b = random_tensor({2}, rng);
        const Tensor out = dense(x, w, b);
        const auto ref = oracle::matmul_bias(to_vec(x), to_vec(w), to_vec(b), 3, 4, 2);
        REQUIRE(out.numel() == static_cast<std::int64_t>(ref.size()));
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(out.data()[i] == Catch::Approx(ref[i]).margin(1e-6));
    }
    SECTION("shape mismatch names both shapes") {
        const Tensor x = Tensor::zeros({1, 3});
        const Tensor w = Tensor::zeros({4, 2});
        const Tensor b = Tensor::zeros({2});
        try {
            dense(x, w, b);
            FAIL("expected DimensionError");
        } catch (const DimensionError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("[1,3]") != std::string::npos);
            CHECK(msg.find("[4,2]") != std::string::npos);
        }
    }
}

TEST_CASE("conv2d forward") {
    SECTION("all-ones 3x3 sums to 9") {
        const Tensor x = Tensor::full({1, 1, 3, 3}, 1.0f);
        const Tensor k = Tensor::full({1, 1, 3, 3}, 1.0f);
        const Tensor out = conv2d(x, k, 1, 0);
        REQUIRE(out.shape() == Shape{1, 1, 1, 1});
        CHECK(out.item() == 9.0f);
    }
    SECTION("identity kernel reproduces the input") {
        Rng rng(3);
        const Tensor x = random_tensor({1, 1, 5, 5}, rng);
        Tensor k = Tensor::zeros({1, 1, 3, 3});
        k.mutable_data()[4] = 1.0f; // center tap
        const Tensor out = conv2d(x, k, 1, 1);
        REQUIRE(out.shape() == x.shape());
        for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(out.data()[i] == x.data()[i]);
    }
    SECTION("random strided case against loop oracle") {
        Rng rng(11);
        const Tensor x = random_tensor({1, 2, 8, 8}, rng);
        const Tensor k = random_tensor({3, 2, 4, 4}, rng);
        const Tensor out = conv2d(x, k, 2, 1);
        int ho = 0, wo = 0;
        const auto ref = oracle::conv2d(to_vec(x), to_vec(k), 1, 2, 8, 8, 3, 4, 4, 2, 1, ho, wo);
        REQUIRE(out.shape() == Shape{1, 3, ho, wo});
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(out.data()[i] == Catch::Approx(ref[i]).margin(1e-5));
    }
    SECTION("non-divisible geometry raises a dimension error") {
        const Tensor x = Tensor::zeros({1, 1, 7, 7});
        const Tensor k = Tensor::zeros({1, 1, 4, 4});
        CHECK_THROWS_AS(conv2d(x, k, 2, 0), DimensionError);
    }
}

TEST_CASE("conv_transpose2d forward") {
    SECTION("single-pixel broadcast") {
        const Tensor z = Tensor::full({1, 1, 1, 1}, 2.5f);
        const Tensor k = Tensor::full({1, 1, 4, 4}, 1.0f);
        const Tensor out = conv_transpose2d(z, k, 2, 0);
        REQUIRE(out.shape() == Shape{1, 1, 4, 4});
        for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 2.5f);
    }
    SECTION("stride-2 geometry 2x2 -> 4x4") {
        const Tensor z = Tensor::zeros({1, 1, 2, 2});
        const Tensor k = Tensor::zeros({1, 1, 4, 4});
        CHECK(conv_transpose2d(z, k, 2, 1).shape() == Shape{1, 1, 4, 4});
    }
    SECTION("matches scatter-form oracle") {
        Rng rng(17);
        const Tensor z = random_tensor({1, 3, 5, 5}, rng);
        const Tensor k = random_tensor({3, 2, 4, 4}, rng);
        const Tensor out = conv_transpose2d(z, k, 2, 1);
        int ho = 0, wo = 0;
        const auto ref =
            oracle::conv_transpose2d(to_vec(z), to_vec(k), 1, 3, 5, 5, 2, 4, 4, 2, 1, ho, wo);
        REQUIRE(out.shape() == Shape{1, 2, ho, wo});
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(out.data()[i] == Catch::Approx(ref[i]).margin(1e-5));
    }
    SECTION("non-positive geometry raises a dimension error") {
        const Tensor z = Tensor::zeros({1, 1, 1, 1});
        const Tensor k = Tensor::zeros({1, 1, 2, 2});
        CHECK_THROWS_AS(conv_transpose2d(z, k, 1, 3), DimensionError);
    }
}

TEST_CASE("conv pair adjointness inner-product identity") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int cin = 1 + static_cast<int>(rng.below(3));
        const int cout = 1 + static_cast<int>(rng.below(3));
        const int kh = 2 + static_cast<int>(rng.below(3));
        const int stride = 1 + static_cast<int>(rng.below(2));
        const int pad = static_cast<int>(rng.below(2));
        // Pick an input size that satisfies the divisibility contract.
        const int base = 2 + static_cast<int>(rng.below(4));
        const int h = (base - 1) * stride + kh - 2 * pad;
        if (h < kh) continue;
        const Tensor x = random_tensor({1, cin, h, h}, rng);
        const Tensor k = random_tensor({cout, cin, kh, kh}, rng);
        const Tensor cx = conv2d(x, k, stride, pad);
        const Tensor y = random_tensor(cx.shape(), rng);
        const Tensor ty = conv_transpose2d(y, k, stride, pad);
        REQUIRE(ty.shape() == x.shape());
        const double lhs = oracle::inner(to_vec(cx), to_vec(y));
        const double rhs = oracle::inner(to_vec(x), to_vec(ty));
        const double denom = std::max(1.0, std::max(std::fabs(lhs), std::fabs(rhs)));
        CHECK(std::fabs(lhs - rhs) / denom < 1e-4);
    }
}

TEST_CASE("activation fixed points") {
    const Tensor z = Tensor::scalar(0.0f);
    CHECK(tanh(z).item() == 0.0f);
    CHECK(sigmoid(z).item() == 0.5f);
    CHECK(relu(Tensor::scalar(-3.0f)).item() == 0.0f);
    CHECK(leaky_relu(Tensor::scalar(-2.0f), 0.2f).item() == Catch::Approx(-0.4f));
    SECTION("sigmoid stays strictly inside (0,1) under saturation") {
        const Tensor big = Tensor::from_data({2}, {100.0f, -100.0f});
        const Tensor s = sigmoid(big);
        CHECK(s.data()[0] < 1.0f);
        CHECK(s.data()[1] > 0.0f);
    }
}

TEST_CASE("activation gradients match finite differences") {
    Rng rng(31);
    const Tensor x = random_tensor({6}, rng, -1.5f, 1.5f);
    CHECK(grad_check([](const Tensor& t) { return mean(tanh(t)); }, x, 1e-3f) < 1e-3f);
    CHECK(grad_check([](const Tensor& t) { return mean(sigmoid(t)); }, x, 1e-3f) < 1e-3f);
    CHECK(grad_check([](const Tensor& t) { return mean(leaky_relu(t, 0.2f)); }, x, 1e-3f) < 1e-3f);
    // Keep relu probes away from the kink.
    const Tensor far = Tensor::from_data({4}, {-1.2f, -0.4f, 0.3f, 1.1f});
    CHECK(grad_check([](const Tensor& t) { return mean(relu(t)); }, far, 1e-3f) < 1e-3f);
}

TEST_CASE("channel_norm") {
    SECTION("constant input maps to zeros") {
        const Tensor x = Tensor::full({2, 3, 4, 4}, 7.0f);
        const Tensor gamma = Tensor::full({3}, 1.0f);
        const Tensor beta = Tensor::zeros({3});
        const Tensor out = channel_norm(x, gamma, beta, 1e-5f);
        for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 0.0f);
    }
    SECTION("gamma = 0 yields beta broadcast") {
        Rng rng(5);
        const Tensor x = random_tensor({1, 2, 3, 3}, rng);
        const Tensor gamma = Tensor::zeros({2});
        const Tensor beta = Tensor::from_data({2}, {0.25f, -0.75f});
        const Tensor out = channel_norm(x, gamma, beta, 1e-5f);
        for (std::int64_t c = 0; c < 2; ++c)
            for (std::int64_t i = 0; i < 9; ++i)
                CHECK(out.data()[static_cast<std::size_t>(c * 9 + i)] == beta.data()[c]);
    }
    SECTION("post-norm channel means vanish") {
        Rng rng(13);
        const Tensor x = random_tensor({2, 4, 8, 8}, rng, -3.0f, 5.0f);
        const Tensor gamma = Tensor::full({4}, 1.0f);
        const Tensor beta = Tensor::zeros({4});
        const Tensor out = channel_norm(x, gamma, beta, 1e-5f);
        const std::int64_t hw = 64;
        for (std::int64_t c = 0; c < 4; ++c) {
            double m = 0.0;
            for (std::int64_t n = 0; n < 2; ++n)
                for (std::int64_t i = 0; i < hw; ++i)
                    m += out.data()[static_cast<std::size_t>((n * 4 + c) * hw + i)];
            m /= (2.0 * hw);
            CHECK(std::fabs(m) < 1e-5);
        }
    }
    SECTION("gradient matches finite differences") {
        Rng rng(19);
        const Tensor x = random_tensor({1, 2, 3, 3}, rng);
        const Tensor gamma = Tensor::full({2}, 1.0f);
        const Tensor beta = Tensor::zeros({2});
        const float err = grad_check(
            [&](const Tensor& t) {
                return mean(channel_norm(t, gamma, beta, 1e-2f));
            },
            x, 1e-3f);
        CHECK(err < 1e-3f);
    }
}

TEST_CASE("losses") {
    SECTION("l1_sum of identical inputs is zero") {
        Rng rng(3);
        const Tensor x = random_tensor({5, 7}, rng);
        CHECK(l1_sum(x, x).item() == 0.0f);
    }
    SECTION("bce closed form at p=0.5") {
        CHECK(bce(Tensor::scalar(0.5f), 1.0f).item() == Catch::Approx(std::log(2.0)).epsilon(1e-5));
    }
    SECTION("l1_sum of random images against scalar loop") {
        Rng rng(29);
        const Tensor a = random_tensor({1, 1, 64, 64}, rng);
        const Tensor b = random_tensor({1, 1, 64, 64}, rng);
        const double ref = oracle::l1_sum(to_vec(a), to_vec(b));
        CHECK(l1_sum(a, b).item() == Catch::Approx(ref).epsilon(1e-5));
    }
    SECTION("shape mismatch raises a dimension error") {
        CHECK_THROWS_AS(l1_sum(Tensor::zeros({2, 2}), Tensor::zeros({4})), DimensionError);
    }
}

TEST_CASE("backward") {
    SECTION("sum gradient is all ones") {
        Tensor x = Tensor::from_data({5}, {1.0f, -2.0f, 3.0f, 0.5f, -0.1f});
        x.set_requires_grad(true);
        Tape tape;
        Tape::Scope scope(tape);
        backward(sum(x));
        for (const float g : x.grad()) CHECK(g == 1.0f);
    }
    SECTION("l1 gradient is the sign away from kinks") {
        Tensor x = Tensor::from_data({4}, {1.5f, -0.5f, 2.0f, -3.0f});
        x.set_requires_grad(true);
        const Tensor zero = Tensor::zeros({4});
        Tape tape;
        Tape::Scope scope(tape);
        backward(l1_sum(x, zero));
        const auto g = x.grad();
        CHECK(g[0] == 1.0f);
        CHECK(g[1] == -1.0f);
        CHECK(g[2] == 1.0f);
        CHECK(g[3] == -1.0f);
    }
    SECTION("gradients accumulate across multiple uses") {
        Tensor x = Tensor::from_data({3}, {0.5f, 1.0f, -1.0f});
        x.set_requires_grad(true);
        Tape tape;
        Tape::Scope scope(tape);
        backward(sum(add(x, x)));
        for (const float g : x.grad()) CHECK(g == 2.0f);
    }
    SECTION("composite conv graph matches finite differences") {
        Rng rng(37);
        const Tensor x = random_tensor({1, 2, 6, 6}, rng);
        const Tensor k = random_tensor({3, 2, 3, 3}, rng, -0.5f, 0.5f);
        const Tensor target = random_tensor({1, 3, 6, 6}, rng);
        const auto f = [&](const Tensor& t) {
            return smul(l1_sum(tanh(conv2d(t, k, 1, 1)), target), 1.0f / 108.0f);
        };
        CHECK(grad_check(f, x, 1e-3f) < 1e-3f);
        const auto fk = [&](const Tensor& t) {
            return smul(l1_sum(tanh(conv2d(x, t, 1, 1)), target), 1.0f / 108.0f);
        };
        CHECK(grad_check(fk, k, 1e-3f) < 1e-3f);
    }
    SECTION("non-scalar loss is rejected") {
        Tensor x = Tensor::zeros({3});
        x.set_requires_grad(true);
        Tape tape;
        Tape::Scope scope(tape);
        const Tensor y = add(x, x);
        CHECK_THROWS_AS(backward(y), ContractError);
    }
    SECTION("detached loss reports an empty tape") {
        Tensor x = Tensor::scalar(1.0f);
        x.set_requires_grad(true);
        CHECK_THROWS_AS(backward(x), ContractError);
        Tape tape;
        Tensor loss;
        {
            Tape::Scope scope(tape);
            loss = sum(x);
        }
        tape.clear();
        CHECK_THROWS_AS(backward(loss), ContractError);
        CHECK(tape.size() == 0);
    }
}

TEST_CASE("grad_check harness") {
    Rng rng(41);
    const Tensor x = random_tensor({5}, rng);
    SECTION("identity-style linear map reports ~0 error") {
        CHECK(grad_check([](const Tensor& t) { return sum(t); }, x, 1e-3f) < 1e-4f);
    }
    SECTION("tanh at random points") {
        CHECK(grad_check([](const Tensor& t) { return mean(tanh(t)); }, x, 1e-3f) < 1e-3f);
    }
    SECTION("a deliberately scaled gradient is detected") {
        // Analytic pass sees 2*sum, numeric probes see sum.
        const auto lying = [](const Tensor& t) {
            return Tape::current() ? smul(sum(t), 2.0f) : sum(t);
        };
        CHECK(grad_check(lying, x, 1e-3f) > 0.4f);
    }
    SECTION("eps outside (0, 1e-2] is rejected") {
        CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum(t); }, x, 0.0f),
                        ContractError);
        CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum(t); }, x, 0.5f),
                        ContractError);
    }
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(43);
    const Tensor y1 = random_tensor({6}, rng);
    const Tensor y2 = random_tensor({6}, rng);
    const float a = 0.7f, b = -1.3f;

    auto grad_of = [&](auto&& make_loss) {
        Tensor x = Tensor::from_data({6}, {0.3f, -0.8f, 1.2f, 0.9f, -0.2f, 2.0f});
        x.set_requires_grad(true);
        Tape tape;
        Tape::Scope scope(tape);
        backward(make_loss(x));
        return std::vector<float>(x.grad().begin(), x.grad().end());
    };

    const auto g1 = grad_of([&](const Tensor& x) { return l1_sum(x, y1); });
    const auto g2 = grad_of([&](const Tensor& x) { return mean(mul(x, y2)); });
    const auto gc = grad_of([&](const Tensor& x) {
        return add(smul(l1_sum(x, y1), a), smul(mean(mul(x, y2)), b));
    });
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(gc[i] == Catch::Approx(a * g1[i] + b * g2[i]).margin(1e-5));
}

TEST_CASE("forward passes are deterministic and thread-count independent") {
    auto run = [](bool parallel) {
        intra_op_parallel() = parallel;
        Rng rng(4242);
        Tensor x = Tensor::zeros({2, 3, 16, 16});
        for (auto& v : x.mutable_data()) v = rng.uniform(-1.0f, 1.0f);
        Tensor k1 = Tensor::zeros({8, 3, 4, 4});
        for (auto& v : k1.mutable_data()) v = rng.normal(0.0f, 0.1f);
        Tensor g = Tensor::full({8}, 1.0f), be = Tensor::zeros({8});
        Tensor out = leaky_relu(channel_norm(conv2d(x, k1, 2, 1), g, be, 1e-5f), 0.2f);
        intra_op_parallel() = true;
        return std::vector<float>(out.data().begin(), out.data().end());
    };
    const auto serial = run(false);
    const auto parallel = run(true);
    const auto repeat = run(true);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i] == parallel[i]);
        CHECK(parallel[i] == repeat[i]);
    }
}

TEST_CASE("reshape round-trips values and gradients") {
    Rng rng(47);
    const Tensor x = random_tensor({2, 6}, rng);
    const Tensor r = reshape(x, {3, 4});
    REQUIRE(r.shape() == Shape{3, 4});
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(r.data()[i] == x.data()[i]);
    CHECK_THROWS_AS(reshape(x, {5, 2}), DimensionError);
    CHECK(grad_check([](const Tensor& t) { return mean(reshape(t, {4, 3})); }, x, 1e-3f) < 1e-3f);
}
