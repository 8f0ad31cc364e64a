#include <cmath>
#include <thread>

#include "doctest.h"
#include "oracles.hpp"
#include "rcdgcn/error.hpp"
#include "rcdgcn/rng.hpp"
#include "rcdgcn/tensor.hpp"

using namespace rcdgcn;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity and projector") {
    const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    const Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(matmul(eye, m).values() == std::vector<double>{1, 2, 3, 4});

    const Tensor proj = Tensor::from({2, 2}, {1, 0, 0, 0});
    const Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
    CHECK(matmul(proj, b).values() == std::vector<double>{5, 6, 0, 0});
}

TEST_CASE("matmul matches the triple-loop oracle on random shapes") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng.bounded(6);
        const std::size_t k = 1 + rng.bounded(6);
        const std::size_t n = 1 + rng.bounded(6);
        std::vector<double> a(m * k), b(k * n);
        for (double& v : a) v = rng.uniform(-2.0, 2.0);
        for (double& v : b) v = rng.uniform(-2.0, 2.0);
        const Tensor y = matmul(Tensor::from({m, k}, a), Tensor::from({k, n}, b));
        const auto want = oracle::matmul(a, b, m, k, n);
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(std::abs(y.values()[i] - want[i]) <= 1e-12);
        }
    }
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
    const Tensor a = Tensor::from({2, 3}, std::vector<double>(6, 1.0));
    const Tensor b = Tensor::from({2, 2}, std::vector<double>(4, 1.0));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), DimensionError);
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("[2,2]") != std::string::npos);
    }
}

TEST_CASE("elementwise basics") {
    CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    const Tensor z = mul(Tensor::from({3}, {1, 2, 3}), Tensor::from({3}, {0, 0, 0}));
    CHECK(z.values() == std::vector<double>{0, 0, 0});
    CHECK_THROWS_AS(add(Tensor::from({2}, {1, 2}), Tensor::from({3}, {1, 2, 3})),
                    DimensionError);
}

TEST_CASE("scalar broadcasting against tensors") {
    const Tensor v = Tensor::from({3}, {1, 2, 3});
    CHECK(add(v, Tensor::scalar(10)).values() == std::vector<double>{11, 12, 13});
    CHECK(mul(Tensor::scalar(2), v).values() == std::vector<double>{2, 4, 6});
}

TEST_CASE("tanh gradient matches central differences at 0.7") {
    Tensor x = Tensor::scalar(0.7, /*requires_grad=*/true);
    Tape tape;
    Tensor y = tanh(x);
    tape.backward(y);
    const double eps = 1e-5;
    const double fd = (std::tanh(0.7 + eps) - std::tanh(0.7 - eps)) / (2 * eps);
    CHECK(oracle::rel_err(x.grad()[0], fd) <= 1e-6);
}

TEST_CASE("masked softmax basics") {
    const Tensor uniform =
        softmax_masked(Tensor::from({3}, {0, 0, 0}), {1, 1, 1});
    for (double v : uniform.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    const Tensor stable = softmax_masked(Tensor::from({2}, {5, -1000}), {1, 1});
    CHECK(stable.values()[0] == doctest::Approx(1.0));
    CHECK(stable.values()[1] >= 0.0);

    // Two-entry hand softmax over the surviving lanes.
    const Tensor picked = softmax_masked(Tensor::from({3}, {1, 2, 3}), {1, 0, 1});
    const double z = std::exp(1.0) + std::exp(3.0);
    CHECK(picked.values()[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
    CHECK(picked.values()[1] == 0.0);
    CHECK(picked.values()[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-12));

    CHECK_THROWS_AS(softmax_masked(Tensor::from({2}, {1, 2}), {0, 0}), DegenerateMaskError);
}

TEST_CASE("masked softmax rows sum to one over unmasked entries") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.bounded(8);
        std::vector<double> scores(n);
        std::vector<std::uint8_t> mask(n);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.uniform(-30.0, 30.0);
            mask[i] = rng.uniform01() < 0.6 ? 1 : 0;
            any = any || mask[i];
        }
        if (!any) mask[0] = 1;
        const Tensor y = softmax_masked(Tensor::from({n}, scores), mask);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask[i]) CHECK(y.values()[i] == 0.0);
            total += y.values()[i];
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("backward on linear and quadratic losses") {
    Tensor w = Tensor::from({3}, {1, 2, 3}, /*requires_grad=*/true);
    {
        Tape tape;
        tape.backward(sum(w));
        CHECK(w.grad() == std::vector<double>{1, 1, 1});
    }
    w.zero_grad();
    {
        Tape tape;
        tape.backward(sum(mul(w, w)));
        CHECK(w.grad() == std::vector<double>{2, 4, 6});
    }
}

TEST_CASE("gradients accumulate additively across tapes") {
    Tensor w = Tensor::from({2}, {1.0, -1.0}, /*requires_grad=*/true);
    for (int pass = 0; pass < 3; ++pass) {
        Tape tape;
        tape.backward(sum(w));
    }
    CHECK(w.grad() == std::vector<double>{3, 3});
}

TEST_CASE("diamond-shaped graph sums path gradients") {
    Tensor w = Tensor::from({2}, {0.3, -0.7}, /*requires_grad=*/true);
    const auto loss_value = [&] {
        const Tensor a = tanh(w);
        const Tensor b = sigmoid(w);
        return sum(mul(add(a, b), a)).item();  // w reused through two paths
    };
    Tape tape;
    const Tensor a = tanh(w);
    const Tensor b = sigmoid(w);
    tape.backward(sum(mul(add(a, b), a)));
    const auto fd = oracle::fd_grad(loss_value, w);
    CHECK(oracle::max_rel_err(w.grad(), fd) <= 1e-4);
}

TEST_CASE("tape misuse is rejected") {
    Tensor w = Tensor::from({2}, {1, 2}, /*requires_grad=*/true);
    Tape tape;
    const Tensor loss = sum(w);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), TapeError);

    Tape empty;
    CHECK_THROWS_AS(empty.backward(loss), TapeError);

    Tape other;
    const Tensor vec = add(w, w);
    CHECK_THROWS_AS(other.backward(vec), DimensionError);
}

TEST_CASE("non-finite forward values are an error") {
    CHECK_THROWS_AS(Tensor::from({1}, {std::nan("")}), NumericError);
    const Tensor big = Tensor::from({1}, {1e308});
    CHECK_THROWS_AS(mul(big, big), NumericError);
}

namespace {

// One finite-difference sweep per primitive, random operands.
void check_primitive_grad(const std::function<Tensor(const Tensor&)>& op, Tensor x) {
    const auto loss_value = [&] { return sum(op(x)).item(); };
    x.zero_grad();
    Tape tape;
    tape.backward(sum(op(x)));
    const auto fd = oracle::fd_grad(loss_value, x);
    CHECK(oracle::max_rel_err(x.grad(), fd) <= 1e-4);
}

}  // namespace

TEST_CASE("every differentiable primitive passes the finite-difference check") {
    SplitMix64 rng(23);
    const auto randn = [&rng](std::vector<std::size_t> shape) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        std::vector<double> v(n);
        for (double& x : v) x = rng.uniform(-1.5, 1.5);
        return Tensor::from(std::move(shape), std::move(v), /*requires_grad=*/true);
    };

    // Mixed-sign relu input bounded away from the kink, where the
    // derivative exists.
    const auto randn_off_zero = [&rng](std::vector<std::size_t> shape) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        std::vector<double> v(n);
        for (double& x : v) {
            const double mag = rng.uniform(0.2, 1.5);
            x = rng.uniform01() < 0.5 ? -mag : mag;
        }
        return Tensor::from(std::move(shape), std::move(v), /*requires_grad=*/true);
    };

    check_primitive_grad([](const Tensor& t) { return tanh(t); }, randn({4}));
    check_primitive_grad([](const Tensor& t) { return sigmoid(t); }, randn({4}));
    check_primitive_grad([](const Tensor& t) { return relu(t); }, randn_off_zero({6}));
    check_primitive_grad([](const Tensor& t) { return mul_scalar(t, -2.5); }, randn({5}));
    check_primitive_grad([](const Tensor& t) { return mean(mul(t, t)); }, randn({7}));
    check_primitive_grad([](const Tensor& t) { return reshape(t, {2, 3}); }, randn({6}));
    check_primitive_grad([](const Tensor& t) { return split_horizon(t, 2, 1); }, randn({3, 2}));

    const Tensor other = randn({3, 3});
    check_primitive_grad([&](const Tensor& t) { return matmul(t, other); }, randn({2, 3}));
    check_primitive_grad([&](const Tensor& t) { return matmul(other, t); }, randn({3, 2}));
    check_primitive_grad([&](const Tensor& t) { return add(t, other); }, randn({3, 3}));
    check_primitive_grad([&](const Tensor& t) { return sub(other, t); }, randn({3, 3}));
    check_primitive_grad([&](const Tensor& t) { return mul(t, other); }, randn({3, 3}));
    check_primitive_grad([&](const Tensor& t) { return concat_cols(t, other); }, randn({3, 2}));

    const Tensor u = randn({4, 1});
    check_primitive_grad([&](const Tensor& t) { return outer_sum(t, u); }, randn({4, 1}));
    check_primitive_grad([&](const Tensor& t) { return outer_sum(u, t); }, randn({4, 1}));

    std::vector<std::uint8_t> mask{1, 0, 1, 1};
    check_primitive_grad([&](const Tensor& t) { return softmax_masked(t, mask); }, randn({4}));

    BoolMatrix m2(3, 3);
    for (std::size_t i = 0; i < 9; ++i) m2.v[i] = (i % 2 == 0) ? 1 : 0;
    check_primitive_grad([&](const Tensor& t) { return masked_row_softmax(t, m2); },
                         randn({3, 3}));
    check_primitive_grad([&](const Tensor& t) { return apply_mask(t, m2); }, randn({3, 3}));

    check_primitive_grad([](const Tensor& t) { return time_slice(t, 1); }, randn({3, 2, 2}));

    const Tensor taps = randn({2, 2, 3});
    check_primitive_grad([&](const Tensor& t) { return causal_dilated_conv(t, taps, 2); },
                         randn({5, 2, 2}));
    const Tensor seq = randn({5, 2, 2});
    check_primitive_grad([&](const Tensor& t) { return causal_dilated_conv(seq, t, 1); },
                         randn({2, 2, 3}));
}

TEST_CASE("graph_conv gradients flow into states, weights and attention") {
    SplitMix64 rng(29);
    const std::size_t n = 4, cin = 3, cout = 2;
    const auto randn = [&rng](std::vector<std::size_t> shape, bool rg) {
        std::size_t total = 1;
        for (auto d : shape) total *= d;
        std::vector<double> v(total);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        return Tensor::from(std::move(shape), std::move(v), rg);
    };
    Tensor x = randn({n, cin}, true);
    std::vector<Tensor> att{randn({n, n}, true), randn({n, n}, true)};
    std::vector<Tensor> w{randn({cin, cout}, true), randn({cin, cout}, true)};

    const auto loss_value = [&] { return sum(graph_conv(x, att, w)).item(); };
    Tape tape;
    tape.backward(sum(graph_conv(x, att, w)));
    CHECK(oracle::max_rel_err(x.grad(), oracle::fd_grad(loss_value, x)) <= 1e-4);
    for (auto& t : att) {
        CHECK(oracle::max_rel_err(t.grad(), oracle::fd_grad(loss_value, t)) <= 1e-4);
    }
    for (auto& t : w) {
        CHECK(oracle::max_rel_err(t.grad(), oracle::fd_grad(loss_value, t)) <= 1e-4);
    }
}

TEST_CASE("independent tapes run on separate threads") {
    auto worker = [](double seed, double* out) {
        Tensor w = Tensor::from({3}, {seed, seed + 1, seed + 2}, /*requires_grad=*/true);
        for (int i = 0; i < 50; ++i) {
            Tape tape;
            tape.backward(sum(mul(w, w)));
        }
        *out = w.grad()[0];
    };
    double a = 0, b = 0;
    std::thread t1(worker, 1.0, &a);
    std::thread t2(worker, 2.0, &b);
    t1.join();
    t2.join();
    CHECK(a == doctest::Approx(50 * 2.0));
    CHECK(b == doctest::Approx(50 * 4.0));
}

TEST_SUITE_END();
