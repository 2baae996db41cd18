#include <doctest.h>

#include <cmath>

#include "bet/errors.hpp"
#include "bet/rng.hpp"
#include "bet/tensor.hpp"

using namespace bet;

namespace {

Tensor t2(std::vector<double> v, int rows, int cols, bool rg = false) {
    return Tensor::from_data({rows, cols}, std::move(v), rg);
}

}  // namespace

TEST_CASE("matmul identity and hand-evaluated product") {
    Tensor a = t2({1, 2, 3, 4}, 2, 2);
    Tensor eye = t2({1, 0, 0, 1}, 2, 2);
    Tensor ai = matmul(a, eye);
    for (std::size_t i = 0; i < 4; ++i) CHECK(ai.at(i) == a.at(i));

    Tensor b = t2({5, 6, 7, 8}, 2, 2);
    Tensor c = matmul(a, b);
    CHECK(c.at(0) == 19.0);
    CHECK(c.at(1) == 22.0);
    CHECK(c.at(2) == 43.0);
    CHECK(c.at(3) == 50.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = t2({1, 2, 3, 4, 5, 6}, 2, 3);
    Tensor b = t2({1, 2, 3, 4}, 2, 2);
    try {
        matmul(a, b);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("gradient of sum(A*B) matches central finite differences") {
    // B = [[1],[1]] so the gradient of the sum w.r.t. A is all ones-weighted
    // row sums of B
    Tensor a = t2({0.5, -1.25, 2.0, 0.75}, 2, 2, true);
    Tensor b = t2({1, 1}, 2, 1);
    const GradCheckReport rep =
        grad_check([&]() { return sum(matmul(a, b)); }, {{"a", a}}, 1e-5, 1e-6);
    CHECK(rep.passed);
    CHECK(rep.max_rel_err < 1e-6);

    tape().clear();
    a.zero_grad();
    backward(sum(matmul(a, b)));
    for (double g : a.grad()) CHECK(g == doctest::Approx(1.0).epsilon(1e-12));
    tape().clear();
}

TEST_CASE("softmax examples and invariants") {
    Tensor x = t2({0, 0}, 1, 2);
    Tensor p = softmax_lastdim(x);
    CHECK(p.at(0) == doctest::Approx(0.5).epsilon(1e-15));

    Tensor y = t2({std::log(2.0), 0.0}, 1, 2);
    Tensor q = softmax_lastdim(y);
    CHECK(std::abs(q.at(0) - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(q.at(1) - 1.0 / 3.0) < 1e-15);

    // max subtraction keeps huge logits finite
    Tensor z = t2({1000, 0}, 1, 2);
    Tensor r = softmax_lastdim(z);
    CHECK(r.at(0) == 1.0);
    CHECK(r.at(1) == 0.0);

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(12), shifted(12);
        for (std::size_t i = 0; i < 12; ++i) v[i] = rng.gaussian(0, 3);
        const double c = rng.gaussian(0, 5);
        for (std::size_t i = 0; i < 12; ++i) shifted[i] = v[i] + c;
        Tensor p1 = softmax_lastdim(t2(v, 3, 4));
        Tensor p2 = softmax_lastdim(t2(shifted, 3, 4));
        for (int row = 0; row < 3; ++row) {
            double total = 0.0;
            for (int col = 0; col < 4; ++col) total += p1.at(static_cast<std::size_t>(row) * 4 + col);
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
        for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(p1.at(i) - p2.at(i)) <= 1e-12);
    }
}

TEST_CASE("softmax rejects non-finite input") {
    Tensor x = t2({1.0, std::numeric_limits<double>::infinity()}, 1, 2);
    CHECK_THROWS_AS(softmax_lastdim(x), NumericError);
}

TEST_CASE("layer_norm closed forms") {
    Tensor gamma = Tensor::full({2}, 1.0);
    Tensor beta = Tensor::zeros({2});

    Tensor constant = t2({3.7, 3.7}, 1, 2);
    Tensor z = layer_norm(constant, gamma, beta, 1e-5);
    CHECK(z.at(0) == 0.0);
    CHECK(z.at(1) == 0.0);

    // mean 2, biased variance 1
    Tensor x = t2({1, 3}, 1, 2);
    Tensor y = layer_norm(x, gamma, beta, 1e-14);
    CHECK(y.at(0) == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(y.at(1) == doctest::Approx(1.0).epsilon(1e-7));

    Tensor gamma0 = Tensor::zeros({2});
    Tensor beta_v = Tensor::from_data({2}, {0.25, -0.5});
    Tensor w = layer_norm(x, gamma0, beta_v, 1e-5);
    CHECK(w.at(0) == 0.25);
    CHECK(w.at(1) == -0.5);
}

TEST_CASE("gelu closed forms") {
    Tensor x = Tensor::from_data({3}, {0.0, 10.0, 1.0});
    Tensor y = gelu(x);
    CHECK(y.at(0) == 0.0);
    CHECK(std::abs(y.at(1) - 10.0) < 1e-6);
    CHECK(y.at(2) == doctest::Approx(0.8411919906082768).epsilon(1e-12));
}

TEST_CASE("backward populates gradients per the chain rule") {
    tape().clear();
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);

    tape().clear();
    x.zero_grad();
    backward(sum(mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
    CHECK(x.grad()[2] == doctest::Approx(6.0));
    tape().clear();
}

TEST_CASE("disconnected parameter keeps a zero gradient") {
    tape().clear();
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor unused = Tensor::from_data({2}, {5, 5}, true);
    backward(sum(x));
    for (double g : unused.grad()) CHECK(g == 0.0);
    tape().clear();
}

TEST_CASE("repeated backward without reset doubles leaf gradients exactly") {
    tape().clear();
    Tensor x = Tensor::from_data({3}, {0.5, -2.0, 4.0}, true);
    Tensor loss = sum(mul(mul(x, x), x));  // x^3 through two interior nodes
    backward(loss);
    std::vector<double> once(x.grad().begin(), x.grad().end());
    backward(loss);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(x.grad()[i] == 2.0 * once[i]);
    tape().clear();
}

TEST_CASE("backward requires a scalar loss") {
    tape().clear();
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(backward(y), ContractError);
    tape().clear();
}

TEST_CASE("matmul associativity within 1e-9 on random chains") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> a(16), b(16), c(16);
        for (auto* v : {&a, &b, &c}) {
            for (double& x : *v) x = rng.gaussian(0, 1);
        }
        Tensor ta = t2(a, 4, 4), tb = t2(b, 4, 4), tc = t2(c, 4, 4);
        Tensor left = matmul(matmul(ta, tb), tc);
        Tensor right = matmul(ta, matmul(tb, tc));
        for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(left.at(i) - right.at(i)) <= 1e-9);
    }
}

TEST_CASE("grad_check on a quadratic is exact to rounding") {
    Tensor x = Tensor::from_data({5}, {0.7, -1.1, 0.4, 1.3, -0.8}, true);
    const GradCheckReport rep =
        grad_check([&]() { return sum(mul(x, x)); }, {{"x", x}}, 1e-5, 1e-8);
    CHECK(rep.passed);
    CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("grad_check rejects a non-deterministic function") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    int calls = 0;
    CHECK_THROWS_AS(grad_check(
                        [&]() {
                            ++calls;
                            return scale(sum(x), 1.0 + 0.01 * calls);
                        },
                        {{"x", x}}, 1e-5, 1e-4),
                    ContractError);
}

TEST_CASE("grad_check flags a corrupted backward rule and names the culprit") {
    Tensor x = Tensor::from_data({3}, {0.4, 0.9, -0.3}, true);
    const auto f = [&]() {
        Tensor y = scale(x, 2.0);
        // sabotage: an extra tape node injecting a bogus gradient contribution
        tape().record(TapeNode{x.impl(), [impl = x.impl()]() { impl->grad[1] += 0.5; }, "sabotage"});
        return sum(y);
    };
    const GradCheckReport rep = grad_check(f, {{"x", x}}, 1e-5, 1e-4);
    CHECK_FALSE(rep.passed);
    CHECK(rep.worst_param == "x");
    CHECK(rep.worst_entry == 1);
}

TEST_CASE("dropout is inverted and disabled at p=0") {
    Rng rng(11);
    Tensor x = Tensor::full({100}, 1.0);
    Tensor kept = dropout(x, 0.0, rng);
    for (std::size_t i = 0; i < 100; ++i) CHECK(kept.at(i) == 1.0);

    Tensor dropped = dropout(x, 0.25, rng);
    int zeros = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        const double v = dropped.at(i);
        CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75).epsilon(1e-12)));
        zeros += v == 0.0 ? 1 : 0;
    }
    CHECK(zeros > 5);
    CHECK(zeros < 60);
}

TEST_CASE("slice and concat are inverse row operations") {
    Tensor x = t2({1, 2, 3, 4, 5, 6}, 3, 2);
    Tensor top = slice_rows(x, 0, 1);
    Tensor rest = slice_rows(x, 1, 2);
    Tensor back = concat_rows({top, rest});
    for (std::size_t i = 0; i < 6; ++i) CHECK(back.at(i) == x.at(i));
    CHECK_THROWS_AS(slice_rows(x, 2, 2), InputError);
}
