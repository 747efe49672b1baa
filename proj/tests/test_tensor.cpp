#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "kseg/tensor.hpp"

using namespace kseg;
using kseg::testing::finite_difference_check;
using kseg::testing::random_tensor;

TEST_CASE("matmul identity and 1x1") {
    Tape tape;
    auto a = make_tensor({2, 2}, {1, 0, 0, 1});
    auto b = make_tensor({2, 2}, {3, 4, 5, 6});
    auto c = tape.matmul(a, b);
    CHECK(c->values == std::vector<double>{3, 4, 5, 6});

    auto x = make_tensor({1, 1}, std::vector<double>{2.0});
    auto y = make_tensor({1, 1}, std::vector<double>{3.0});
    CHECK(tape.matmul(x, y)->values[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("matmul rejects shape mismatch with diagnostic") {
    Tape tape;
    auto a = make_tensor({2, 3});
    auto b = make_tensor({2, 3});
    CHECK_THROWS_WITH_AS(tape.matmul(a, b),
                         doctest::Contains("[2,3]"), std::invalid_argument);
}

TEST_CASE("matmul gradient vs finite differences") {
    Rng rng(7);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    Tape tape;
    auto loss = tape.sum(tape.matmul(a, b));
    tape.backward(loss);
    auto eval = [&] {
        Tape t2;
        return t2.sum(t2.matmul(a, b))->values[0];
    };
    CHECK(finite_difference_check(eval, a).max_rel_error < 1e-6);
    CHECK(finite_difference_check(eval, b).max_rel_error < 1e-6);
}

TEST_CASE("softmax basics") {
    Tape tape;
    auto x = make_tensor({2}, {0.0, 0.0});
    auto y = tape.softmax(x, 0);
    CHECK(y->values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y->values[1] == doctest::Approx(0.5).epsilon(1e-15));

    // shift invariance
    auto a = make_tensor({3}, {0.3, -1.2, 2.5});
    auto b = make_tensor({3}, {0.3 + 17.0, -1.2 + 17.0, 2.5 + 17.0});
    auto ya = tape.softmax(a, 0);
    auto yb = tape.softmax(b, 0);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(ya->values[i] - yb->values[i]) < 1e-12);

    // direct exp/sum oracle
    auto c = make_tensor({3}, {1.0, 2.0, 3.0});
    auto yc = tape.softmax(c, 0);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(yc->values[i] - std::exp(1.0 + i) / z) < 1e-12);

    CHECK_THROWS_AS(tape.softmax(c, 3), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one and stays finite at large inputs") {
    Rng rng(3);
    Tape tape;
    auto x = random_tensor({4, 6}, rng, 1000.0, false);
    auto y = tape.softmax(x, 1);
    for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (int j = 0; j < 6; ++j) {
            const double v = y->at(i, j);
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);  // exp underflows to exactly 0 this far from the row max
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layer_norm examples") {
    Tape tape;
    auto gamma = make_tensor({3}, {1, 1, 1});
    auto beta = make_tensor({3}, {0, 0, 0});
    auto x = make_tensor({1, 3}, {5, 5, 5});
    auto y = tape.layer_norm(x, gamma, beta);
    for (double v : y->values) CHECK(std::abs(v) < 1e-12);

    auto g2 = make_tensor({2}, {1, 1});
    auto b2 = make_tensor({2}, {0, 0});
    auto x2 = make_tensor({1, 2}, {1, -1});
    auto y2 = tape.layer_norm(x2, g2, b2);
    const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y2->values[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(y2->values[1] == doctest::Approx(-expect).epsilon(1e-12));
}

TEST_CASE("layer_norm gradient vs finite differences") {
    Rng rng(11);
    auto x = random_tensor({2, 8}, rng);
    auto gamma = random_tensor({8}, rng);
    auto beta = random_tensor({8}, rng);
    // weighted sum so the gradient is not constant across elements
    auto w = random_tensor({2, 8}, rng, 1.0, false);
    auto eval = [&] {
        Tape t;
        return t.sum(t.mul(t.layer_norm(x, gamma, beta), w))->values[0];
    };
    Tape tape;
    tape.backward(tape.sum(tape.mul(tape.layer_norm(x, gamma, beta), w)));
    CHECK(finite_difference_check(eval, x).max_rel_error < 1e-5);
    CHECK(finite_difference_check(eval, gamma).max_rel_error < 1e-5);
    CHECK(finite_difference_check(eval, beta).max_rel_error < 1e-5);
}

TEST_CASE("gelu values and gradient") {
    Tape tape;
    auto zero = make_tensor({1}, std::vector<double>{0.0});
    CHECK(tape.gelu(zero)->values[0] == 0.0);
    auto ten = make_tensor({1}, std::vector<double>{10.0});
    CHECK(std::abs(tape.gelu(ten)->values[0] - 10.0) < 1e-6);

    auto x = make_tensor({4}, {-2.0, -0.5, 0.3, 4.0}, true);
    auto eval = [&] {
        Tape t;
        return t.sum(t.gelu(x))->values[0];
    };
    Tape t2;
    t2.backward(t2.sum(t2.gelu(x)));
    CHECK(finite_difference_check(eval, x).max_rel_error < 1e-5);
}

TEST_CASE("sigmoid values, symmetry, stability") {
    Tape tape;
    auto zero = make_tensor({1}, std::vector<double>{0.0});
    CHECK(tape.sigmoid(zero)->values[0] == 0.5);

    Rng rng(5);
    auto x = random_tensor({10}, rng, 4.0, false);
    auto nx = make_tensor({10});
    for (int i = 0; i < 10; ++i) nx->values[i] = -x->values[i];
    auto s = tape.sigmoid(x);
    auto sn = tape.sigmoid(nx);
    for (int i = 0; i < 10; ++i)
        CHECK(std::abs(sn->values[i] - (1.0 - s->values[i])) < 1e-12);

    auto big = make_tensor({2}, {500.0, -500.0});
    auto sb = tape.sigmoid(big);
    for (double v : sb->values) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);  // sigmoid(500) rounds to 1.0 in double
    }
}

TEST_CASE("elementwise ops: trivial identities") {
    Tape tape;
    Rng rng(2);
    auto x = random_tensor({2, 3}, rng, 1.0, false);
    auto zero = make_tensor({2, 3});
    auto y = tape.add(x, zero);
    CHECK(y->values == x->values);

    auto ones = make_tensor({2, 3}, std::vector<double>(6, 1.0));
    CHECK(tape.sum(ones)->values[0] == 6.0);
    CHECK(tape.mean(ones)->values[0] == 1.0);

    CHECK_THROWS_AS(tape.add(x, make_tensor({3, 2})), std::invalid_argument);
}

TEST_CASE("every differentiable op passes finite-difference checks on random inputs") {
    Rng rng(42);
    struct Case {
        const char* name;
        std::function<Tensor(Tape&, const Tensor&, const Tensor&)> op;
    };
    const std::vector<Case> cases = {
        {"add", [](Tape& t, const Tensor& a, const Tensor& b) { return t.add(a, b); }},
        {"sub", [](Tape& t, const Tensor& a, const Tensor& b) { return t.sub(a, b); }},
        {"mul", [](Tape& t, const Tensor& a, const Tensor& b) { return t.mul(a, b); }},
        {"div", [](Tape& t, const Tensor& a, const Tensor& b) {
             return t.div(a, t.add_scalar(t.mul(b, b), 1.0));  // keep denominator away from 0
         }},
        {"scale", [](Tape& t, const Tensor& a, const Tensor&) { return t.scale(a, -1.7); }},
        {"softmax", [](Tape& t, const Tensor& a, const Tensor& b) {
             return t.mul(t.softmax(a, 1), b);
         }},
        {"gelu", [](Tape& t, const Tensor& a, const Tensor&) { return t.gelu(a); }},
        {"sigmoid", [](Tape& t, const Tensor& a, const Tensor&) { return t.sigmoid(a); }},
        {"log", [](Tape& t, const Tensor& a, const Tensor&) {
             return t.log(t.add_scalar(t.mul(a, a), 0.5));
         }},
        {"transpose", [](Tape& t, const Tensor& a, const Tensor& b) {
             return t.mul(t.transpose_last_two(a), t.transpose_last_two(b));
         }},
        {"slice_cols", [](Tape& t, const Tensor& a, const Tensor&) {
             return t.slice_cols(a, 1, 3);
         }},
        {"concat", [](Tape& t, const Tensor& a, const Tensor& b) {
             return t.concat_last_axis({a, b});
         }},
        {"column_sums", [](Tape& t, const Tensor& a, const Tensor&) {
             return t.column_sums(a);
         }},
        {"add_rowvec", [](Tape& t, const Tensor& a, const Tensor&) {
             auto bias = make_tensor({4}, {0.1, -0.2, 0.3, 0.4}, true);
             return t.add_rowvec(a, bias);
         }},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        for (int trial = 0; trial < 10; ++trial) {
            auto a = random_tensor({3, 4}, rng);
            auto b = random_tensor({3, 4}, rng);
            auto w = random_tensor({3, 4}, rng, 1.0, false);  // mixing weights
            auto eval = [&] {
                Tape t;
                Tensor out = c.op(t, a, b);
                if (out->shape == a->shape) out = t.mul(out, w);
                return t.sum(out)->values[0];
            };
            Tape tape;
            {
                Tensor out = c.op(tape, a, b);
                if (out->shape == a->shape) out = tape.mul(out, w);
                tape.backward(tape.sum(out));
            }
            CHECK(finite_difference_check(eval, a).max_rel_error < 1e-5);
            if (!b->grad.empty())
                CHECK(finite_difference_check(eval, b).max_rel_error < 1e-5);
        }
    }
}

TEST_CASE("backward: product rule and sum gradient") {
    auto x = make_scalar(3.0, true);
    auto y = make_scalar(4.0, true);
    Tape tape;
    tape.backward(tape.mul(x, y));
    CHECK(x->grad[0] == 4.0);
    CHECK(y->grad[0] == 3.0);

    auto v = make_tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}, true);
    Tape t2;
    t2.backward(t2.sum(v));
    for (double g : v->grad) CHECK(g == 1.0);
}

TEST_CASE("backward rejects non-scalar roots") {
    auto v = make_tensor({2, 2}, true);
    Tape tape;
    auto y = tape.scale(v, 2.0);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("backward accumulates over repeated sub-expressions") {
    auto x = make_scalar(2.0, true);
    Tape tape;
    auto y = tape.add(tape.mul(x, x), tape.mul(x, x));  // 2x², dy/dx = 4x = 8
    tape.backward(y);
    CHECK(x->grad[0] == doctest::Approx(8.0).epsilon(1e-15));
}

TEST_CASE("composite softmax over matmul matches finite differences") {
    Rng rng(13);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 5}, rng);
    auto w = random_tensor({3, 5}, rng, 1.0, false);
    auto eval = [&] {
        Tape t;
        return t.sum(t.mul(t.softmax(t.matmul(a, b), 1), w))->values[0];
    };
    Tape tape;
    tape.backward(tape.sum(tape.mul(tape.softmax(tape.matmul(a, b), 1), w)));
    CHECK(finite_difference_check(eval, a).max_rel_error < 1e-5);
    CHECK(finite_difference_check(eval, b).max_rel_error < 1e-5);
}

TEST_CASE("backward is deterministic: two replays give bit-identical gradients") {
    Rng rng(17);
    auto a = random_tensor({4, 4}, rng);
    auto b = random_tensor({4, 4}, rng);
    auto run = [&] {
        a->zero_grad();
        b->zero_grad();
        Tape t;
        t.backward(t.sum(t.softmax(t.matmul(t.gelu(a), b), 1)));
        return std::make_pair(a->grad, b->grad);
    };
    const auto first = run();
    const auto second = run();
    CHECK(first.first == second.first);
    CHECK(first.second == second.second);
}

TEST_CASE("forward outputs stay finite for |x| up to 1e3") {
    Rng rng(23);
    Tape tape;
    auto x = random_tensor({4, 8}, rng, 1e3, false);
    for (const Tensor& out : {tape.softmax(x, 1), tape.sigmoid(x), tape.gelu(x),
                              tape.scale(x, 0.5), tape.add(x, x)})
        for (double v : out->values) CHECK(std::isfinite(v));
}
