#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "gafr/tape.hpp"

using namespace gafr;

namespace {

// Scalar readout sum(x .* R): a fixed random linear functional so the check
// is sensitive to every coordinate of x.
ValueId weighted_sum(Tape& tape, ValueId x, const Array2& r) {
    ValueId prod = tape.mul(x, tape.leaf(r));
    ValueId rows = tape.matmul(tape.leaf(Array2::ones(1, tape.value(x).rows)), prod);
    return tape.matmul(rows, tape.leaf(Array2::ones(tape.value(x).cols, 1)));
}

double check_primitive(const std::function<ValueId(Tape&, ValueId)>& op, Param& p,
                       uint64_t seed, double tolerance = 1e-5) {
    std::mt19937_64 rng(seed + 99);
    Array2 probe;  // shaped after the op output on first call
    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        ValueId x = tape.param(p);
        ValueId y = op(tape, x);
        if (probe.size() == 0) probe = random_normal(tape.value(y).rows, tape.value(y).cols, rng);
        ValueId loss = weighted_sum(tape, y, probe);
        if (with_grad) tape.backward(loss);
        return tape.value(loss).at(0, 0);
    };
    GradcheckReport rep = gradcheck(loss_fn, {&p}, 64, 1e-5, tolerance, seed);
    REQUIRE(rep.all_pass());
    return rep.entries[0].max_rel_err;
}

}  // namespace

TEST_CASE("matmul identity passes values through", "[autodiff]") {
    Tape tape;
    Array2 a = Array2::from_rows({{1.5, -2.0, 0.25, 7.0}, {0.0, 3.0, 1.0, -1.0}, {4.0, 5.0, 6.0, 0.5}});
    ValueId out = tape.matmul(tape.leaf(Array2::identity(3)), tape.leaf(a));
    REQUIRE(tape.value(out) == a);
}

TEST_CASE("softmax over a single constant group is uniform", "[autodiff]") {
    Tape tape;
    Array2 x(3, 1, 2.0);
    ValueId out = tape.softmax_groups(tape.leaf(x), {0, 3});
    for (int i = 0; i < 3; ++i)
        REQUIRE(tape.value(out).at(i, 0) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("leaky relu matches its definition", "[autodiff]") {
    Tape tape;
    ValueId out = tape.leaky_relu(tape.leaf(Array2::from_rows({{-1.0, 0.0, 3.0}})), 0.2);
    REQUIRE(tape.value(out).at(0, 0) == Catch::Approx(-0.2));
    REQUIRE(tape.value(out).at(0, 1) == 0.0);
    REQUIRE(tape.value(out).at(0, 2) == 3.0);
}

TEST_CASE("backward of sum gives all-ones grad", "[autodiff]") {
    Param w("w", Array2::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
    Tape tape;
    ValueId x = tape.param(w);
    ValueId loss = tape.matmul(tape.matmul(tape.leaf(Array2::ones(1, 2)), x),
                               tape.leaf(Array2::ones(2, 1)));
    tape.backward(loss);
    for (double g : w.grad.data) REQUIRE(g == 1.0);
}

TEST_CASE("backward of sum of squares gives 2W", "[autodiff]") {
    Param w("w", Array2::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
    Tape tape;
    ValueId x = tape.param(w);
    ValueId loss = tape.matmul(tape.matmul(tape.leaf(Array2::ones(1, 2)), tape.square(x)),
                               tape.leaf(Array2::ones(2, 1)));
    tape.backward(loss);
    REQUIRE(w.grad == Array2::from_rows({{2.0, 4.0}, {6.0, 8.0}}));
}

TEST_CASE("backward accumulates additively", "[autodiff]") {
    Param w("w", Array2::from_rows({{0.5, -1.5}, {2.5, 0.25}}));
    Tape tape;
    ValueId x = tape.param(w);
    ValueId loss = tape.matmul(tape.matmul(tape.leaf(Array2::ones(1, 2)), tape.square(x)),
                               tape.leaf(Array2::ones(2, 1)));
    tape.backward(loss);
    Array2 once = w.grad;
    tape.backward(loss);
    for (size_t k = 0; k < once.size(); ++k) REQUIRE(w.grad.data[k] == 2.0 * once.data[k]);
}

TEST_CASE("every primitive VJP matches central differences", "[autodiff]") {
    std::mt19937_64 rng(7);

    SECTION("matmul, both operands") {
        Param a("a", random_normal(3, 4, rng));
        Param b("b", random_normal(4, 2, rng));
        Array2 probe = random_normal(3, 2, rng);
        auto loss_fn = [&](bool with_grad) {
            Tape tape;
            ValueId y = tape.matmul(tape.param(a), tape.param(b));
            ValueId loss = weighted_sum(tape, y, probe);
            if (with_grad) tape.backward(loss);
            return tape.value(loss).at(0, 0);
        };
        REQUIRE(gradcheck(loss_fn, {&a, &b}, 64, 1e-5, 1e-5, 1).all_pass());
    }
    SECTION("add with full, scalar, column and row broadcasts") {
        Param a("a", random_normal(3, 4, rng));
        for (auto [r, c] : {std::pair{3, 4}, {1, 1}, {3, 1}, {1, 4}}) {
            Param b("b", random_normal(r, c, rng));
            Array2 probe = random_normal(3, 4, rng);
            auto loss_fn = [&](bool with_grad) {
                Tape tape;
                ValueId y = tape.add(tape.param(a), tape.param(b));
                ValueId loss = weighted_sum(tape, y, probe);
                if (with_grad) tape.backward(loss);
                return tape.value(loss).at(0, 0);
            };
            REQUIRE(gradcheck(loss_fn, {&a, &b}, 64, 1e-5, 1e-5, 2).all_pass());
        }
    }
    SECTION("mul with full, scalar, column and row broadcasts") {
        Param a("a", random_normal(3, 4, rng));
        for (auto [r, c] : {std::pair{3, 4}, {1, 1}, {3, 1}, {1, 4}}) {
            Param b("b", random_normal(r, c, rng));
            Array2 probe = random_normal(3, 4, rng);
            auto loss_fn = [&](bool with_grad) {
                Tape tape;
                ValueId y = tape.mul(tape.param(a), tape.param(b));
                ValueId loss = weighted_sum(tape, y, probe);
                if (with_grad) tape.backward(loss);
                return tape.value(loss).at(0, 0);
            };
            REQUIRE(gradcheck(loss_fn, {&a, &b}, 64, 1e-5, 1e-5, 3).all_pass());
        }
    }
    SECTION("exp") {
        Param p("p", random_normal(2, 3, rng, 0.5));
        check_primitive([](Tape& t, ValueId x) { return t.exp(x); }, p, 4);
    }
    SECTION("log of positive inputs") {
        Param p("p", Array2::from_rows({{0.5, 1.5, 2.5}, {3.0, 0.25, 1.0}}));
        check_primitive([](Tape& t, ValueId x) { return t.log(x); }, p, 5);
    }
    SECTION("leaky relu away from the kink") {
        Param p("p", Array2::from_rows({{-1.0, 2.0, -0.5}, {0.75, -2.0, 1.25}}));
        check_primitive([](Tape& t, ValueId x) { return t.leaky_relu(x, 0.2); }, p, 6);
    }
    SECTION("elu") {
        Param p("p", Array2::from_rows({{-1.0, 2.0, -0.5}, {0.75, -2.0, 1.25}}));
        check_primitive([](Tape& t, ValueId x) { return t.elu(x); }, p, 7);
    }
    SECTION("sigmoid") {
        Param p("p", random_normal(2, 3, rng));
        check_primitive([](Tape& t, ValueId x) { return t.sigmoid(x); }, p, 8);
    }
    SECTION("softmax over groups") {
        Param p("p", random_normal(7, 1, rng));
        check_primitive(
            [](Tape& t, ValueId x) { return t.softmax_groups(x, {0, 3, 3, 5, 7}); }, p, 9);
    }
    SECTION("gather rows") {
        Param p("p", random_normal(4, 3, rng));
        check_primitive([](Tape& t, ValueId x) { return t.gather_rows(x, {2, 0, 2, 3, 1}); }, p, 10);
    }
    SECTION("scatter sum rows") {
        Param p("p", random_normal(5, 3, rng));
        check_primitive(
            [](Tape& t, ValueId x) { return t.scatter_sum_rows(x, {1, 0, 1, 3, 3}, 4); }, p, 11);
    }
    SECTION("square") {
        Param p("p", random_normal(2, 3, rng));
        check_primitive([](Tape& t, ValueId x) { return t.square(x); }, p, 12);
    }
    SECTION("scalar scale") {
        Param p("p", random_normal(2, 3, rng));
        check_primitive([](Tape& t, ValueId x) { return t.scalar_scale(x, -1.75); }, p, 13);
    }
}

TEST_CASE("group softmax outputs are positive and sum to one", "[autodiff]") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        int groups = 1 + static_cast<int>(rng() % 5);
        std::vector<int> offsets = {0};
        for (int g = 0; g < groups; ++g) offsets.push_back(offsets.back() + 1 + static_cast<int>(rng() % 6));
        Tape tape;
        ValueId out = tape.softmax_groups(tape.leaf(random_normal(offsets.back(), 1, rng, 3.0)), offsets);
        const Array2& y = tape.value(out);
        for (int g = 0; g < groups; ++g) {
            double s = 0.0;
            for (int i = offsets[g]; i < offsets[g + 1]; ++i) {
                REQUIRE(y.at(i, 0) > 0.0);
                s += y.at(i, 0);
            }
            REQUIRE(std::fabs(s - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("identical seeds give bitwise-identical forwards", "[autodiff]") {
    auto run = [] {
        std::mt19937_64 rng(33);
        Tape tape;
        ValueId x = tape.leaf(random_normal(5, 4, rng));
        ValueId w = tape.leaf(random_normal(4, 3, rng));
        ValueId y = tape.elu(tape.matmul(x, w));
        ValueId s = tape.sigmoid(tape.scalar_scale(y, 0.5));
        return tape.value(s);
    };
    REQUIRE(run() == run());
}

TEST_CASE("shape and numeric errors are reported", "[autodiff]") {
    Tape tape;
    ValueId a = tape.leaf(Array2::ones(2, 3));
    ValueId b = tape.leaf(Array2::ones(2, 3));
    REQUIRE_THROWS_AS(tape.matmul(a, b), DimensionError);
    REQUIRE_THROWS_AS(tape.add(a, tape.leaf(Array2::ones(3, 1))), DimensionError);

    ValueId big = tape.leaf(Array2(1, 1, 1000.0));
    REQUIRE_THROWS_AS(tape.exp(big), NumericError);
    REQUIRE_THROWS_WITH(tape.exp(big), Catch::Matchers::ContainsSubstring("exp"));
    ValueId neg = tape.leaf(Array2(1, 1, -1.0));
    REQUIRE_THROWS_AS(tape.log(neg), NumericError);

    REQUIRE_THROWS_AS(tape.backward(a), DimensionError);
}

TEST_CASE("gradcheck on a quadratic is near machine precision", "[autodiff]") {
    std::mt19937_64 rng(5);
    Param p("p", random_normal(3, 3, rng));
    Array2 probe = random_normal(3, 3, rng);
    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        ValueId loss = weighted_sum(tape, tape.square(tape.param(p)), probe);
        if (with_grad) tape.backward(loss);
        return tape.value(loss).at(0, 0);
    };
    GradcheckReport rep = gradcheck(loss_fn, {&p}, 9, 1e-4, 1e-8, 17);
    REQUIRE(rep.all_pass());
    REQUIRE(rep.entries[0].max_rel_err < 1e-8);
}

TEST_CASE("gradcheck of a detached param reports zero everywhere", "[autodiff]") {
    std::mt19937_64 rng(6);
    Param used("used", random_normal(2, 2, rng));
    Param detached("detached", random_normal(2, 2, rng));
    Array2 probe = random_normal(2, 2, rng);
    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        ValueId loss = weighted_sum(tape, tape.square(tape.param(used)), probe);
        tape.param(detached);  // recorded but unused by the loss
        if (with_grad) tape.backward(loss);
        return tape.value(loss).at(0, 0);
    };
    GradcheckReport rep = gradcheck(loss_fn, {&used, &detached}, 8, 1e-4, 1e-6, 18);
    REQUIRE(rep.all_pass());
    REQUIRE(rep.entries[1].max_rel_err == 0.0);
    REQUIRE(rep.entries[1].analytic == 0.0);
    REQUIRE(rep.entries[1].numeric == 0.0);
}

TEST_CASE("grads of unused tape outputs stay zero", "[autodiff]") {
    Param w("w", Array2::from_rows({{1.0, 2.0}}));
    Param unused("unused", Array2::from_rows({{5.0}}));
    Tape tape;
    ValueId x = tape.param(w);
    tape.exp(tape.param(unused));  // dead branch
    ValueId loss = tape.matmul(x, tape.leaf(Array2::ones(2, 1)));
    tape.backward(loss);
    REQUIRE(unused.grad.at(0, 0) == 0.0);
    REQUIRE(w.grad == Array2::ones(1, 2));
}
