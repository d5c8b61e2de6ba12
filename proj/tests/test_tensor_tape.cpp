#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "xmal/error.hpp"
#include "xmal/tape.hpp"
#include "xmal/tensor.hpp"

using namespace xmal;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Tensor t(r, c);
    for (auto& x : t.data()) x = g(rng);
    return t;
}

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

using UnaryOp = std::function<ad::Var(ad::Var)>;

// Contracts the op output with fixed random weights so every output entry matters.
double contracted(const UnaryOp& op, const Tensor& x, const Tensor& w) {
    ad::Tape t;
    ad::Var out = op(t.leaf(x));
    double s = 0.0;
    for (std::size_t i = 0; i < out.value().size(); ++i) s += out.value()[i] * w[i];
    return s;
}

double max_fd_error(const UnaryOp& op, const Tensor& x0, std::mt19937_64& rng) {
    ad::Tape probe;
    const Tensor shape = op(probe.leaf(x0)).value();
    const Tensor w = random_tensor(shape.rows(), shape.cols(), rng);

    ad::Tape t;
    ad::Var x = t.leaf(x0);
    ad::Var y = op(x);
    ad::Var loss = ad::sum(ad::hadamard(y, t.constant(w)));
    t.backward(loss);
    const Tensor analytic = x.grad();

    double worst = 0.0;
    Tensor xp = x0;
    for (std::size_t k = 0; k < xp.size(); ++k) {
        const double saved = xp[k];
        xp[k] = saved + 1e-6;
        const double up = contracted(op, xp, w);
        xp[k] = saved - 1e-6;
        const double down = contracted(op, xp, w);
        xp[k] = saved;
        const double numeric = (up - down) / 2e-6;
        worst = std::max(worst, std::abs(numeric - analytic[k]) / std::max(1e-8, std::abs(numeric) + std::abs(analytic[k])));
    }
    return worst;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    const Tensor id{{1, 0}, {0, 1}};
    const Tensor b{{3, 4}, {5, 6}};
    EXPECT_EQ(matmul(id, b), b);
}

TEST(Matmul, RowTimesColumnIsDotProduct) {
    const Tensor out = matmul(Tensor{{1, 2}}, Tensor{{3}, {4}});
    EXPECT_EQ(out.rows(), 1u);
    EXPECT_EQ(out.cols(), 1u);
    EXPECT_DOUBLE_EQ(out.item(), 11.0);
}

TEST(Matmul, MatchesTripleLoopOracle) {
    std::mt19937_64 rng(3);
    const Tensor a = random_tensor(3, 4, rng);
    const Tensor b = random_tensor(4, 2, rng);
    const Tensor got = matmul(a, b);
    const Tensor want = naive_matmul(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Matmul, RejectsInnerDimensionMismatch) {
    EXPECT_THROW(matmul(Tensor(2, 3), Tensor(2, 3)), ShapeError);
    ad::Tape t;
    EXPECT_THROW(ad::matmul(t.leaf(Tensor(2, 3)), t.leaf(Tensor(2, 3))), ShapeError);
}

TEST(Tensor, RejectsDataLengthMismatch) { EXPECT_THROW(Tensor(2, 2, std::vector<double>{1, 2, 3}), ShapeError); }

TEST(RowL2Normalize, ThreeFourFive) {
    ad::Tape t;
    const auto y = ad::row_l2_normalize(t.leaf(Tensor{{3, 4}})).value();
    EXPECT_NEAR(y(0, 0), 0.6, 1e-12);
    EXPECT_NEAR(y(0, 1), 0.8, 1e-12);
}

TEST(RowL2Normalize, UnitRowUnchanged) {
    ad::Tape t;
    const Tensor x{{0.6, 0.8}, {1.0, 0.0}};
    const auto y = ad::row_l2_normalize(t.leaf(x)).value();
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-11);
}

TEST(RowL2Normalize, ZeroRowStaysFinite) {
    ad::Tape t;
    ad::Var x = t.leaf(Tensor(1, 3));
    ad::Var y = ad::row_l2_normalize(x);
    EXPECT_TRUE(y.value().all_finite());
    t.backward(ad::sum(y));
    EXPECT_TRUE(x.grad().all_finite());
}

TEST(RowL2Normalize, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    const Tensor x = random_tensor(3, 4, rng);
    EXPECT_LT(max_fd_error([](ad::Var v) { return ad::row_l2_normalize(v); }, x, rng), 1e-6);
}

TEST(Primitives, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(5);
    const Tensor x = random_tensor(3, 4, rng);
    Tensor positive = x;
    for (auto& v : positive.data()) v = std::abs(v) + 0.5;
    const Tensor other = random_tensor(3, 4, rng);
    const Tensor right = random_tensor(4, 2, rng);
    const Tensor bias = random_tensor(1, 4, rng);

    struct Case {
        const char* name;
        UnaryOp op;
        Tensor input;
    };
    const std::vector<Case> cases = {
        {"matmul", [&](ad::Var v) { return ad::matmul(v, v.tape->constant(right)); }, x},
        {"add_broadcast", [&](ad::Var v) { return ad::add(v, v.tape->constant(bias)); }, x},
        {"add_bias_grad", [&](ad::Var v) { return ad::add(v.tape->constant(x), v); }, bias},
        {"sub", [&](ad::Var v) { return ad::sub(v, v.tape->constant(other)); }, x},
        {"hadamard", [&](ad::Var v) { return ad::hadamard(v, v); }, x},
        {"scale", [](ad::Var v) { return ad::scale(v, -2.5); }, x},
        {"relu", [](ad::Var v) { return ad::relu(v); }, x},
        {"sigmoid", [](ad::Var v) { return ad::sigmoid(v); }, x},
        {"log", [](ad::Var v) { return ad::log(v); }, positive},
        {"row_softmax", [](ad::Var v) { return ad::row_softmax(v); }, x},
        {"row_log_softmax", [](ad::Var v) { return ad::row_log_softmax(v); }, x},
        {"mean", [](ad::Var v) { return ad::mean(v); }, x},
        {"transpose", [](ad::Var v) { return ad::transpose(v); }, x},
        {"squared_difference", [&](ad::Var v) { return ad::squared_difference(v, v.tape->constant(other)); }, x},
    };
    for (const auto& c : cases) EXPECT_LT(max_fd_error(c.op, c.input, rng), 1e-6) << c.name;
}

TEST(Backward, SquareAtThree) {
    ad::Tape t;
    ad::Var theta = t.leaf(Tensor::scalar(3.0));
    t.backward(ad::hadamard(theta, theta));
    EXPECT_DOUBLE_EQ(theta.grad().item(), 6.0);
}

TEST(Backward, ConstantLossGivesZeroGradients) {
    ad::Tape t;
    ad::Var theta = t.leaf(Tensor{{1.0, 2.0}});
    ad::Var c = t.constant(Tensor::scalar(4.0));
    t.backward(ad::scale(c, 2.0));
    EXPECT_EQ(theta.grad(), Tensor(1, 2));
}

TEST(Backward, RejectsNonScalarLoss) {
    ad::Tape t;
    ad::Var x = t.leaf(Tensor(2, 2, 1.0));
    EXPECT_THROW(t.backward(x), ShapeError);
}

TEST(Backward, SharedSubexpressionAccumulatesAllPaths) {
    // f = x*x + 3x at x = 2 -> df/dx = 2x + 3 = 7
    ad::Tape t;
    ad::Var x = t.leaf(Tensor::scalar(2.0));
    t.backward(ad::add(ad::hadamard(x, x), ad::scale(x, 3.0)));
    EXPECT_DOUBLE_EQ(x.grad().item(), 7.0);
}

TEST(Backward, RepeatedBackwardResetsAccumulators) {
    ad::Tape t;
    ad::Var x = t.leaf(Tensor::scalar(2.0));
    ad::Var y = ad::scale(x, 5.0);
    t.backward(y);
    t.backward(y);
    EXPECT_DOUBLE_EQ(x.grad().item(), 5.0);
}

TEST(Log, FloorsInputAndBlocksGradient) {
    ad::Tape t;
    ad::Var x = t.leaf(Tensor{{0.0, 1.0}});
    ad::Var y = ad::log(x, 1e-12);
    EXPECT_NEAR(y.value()(0, 0), std::log(1e-12), 1e-9);
    t.backward(ad::sum(y));
    EXPECT_EQ(x.grad()(0, 0), 0.0);
    EXPECT_EQ(x.grad()(0, 1), 1.0);
}

TEST(Softmax, SaturatedLogitsStayFinite) {
    ad::Tape t;
    ad::Var x = t.leaf(Tensor{{1000.0, -1000.0}});
    auto p = ad::row_softmax(x);
    auto lp = ad::row_log_softmax(x);
    EXPECT_TRUE(p.value().all_finite());
    EXPECT_TRUE(lp.value().all_finite());
    EXPECT_NEAR(lp.value()(0, 1), -2000.0, 1e-9);
}

TEST(Tape, FuzzedCompositionsStayFinite) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> mag(-3.0, 3.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const double scale = std::pow(10.0, mag(rng));
        ad::Tape t;
        ad::Var x = t.leaf(random_tensor(3, 4, rng, scale));
        ad::Var w = t.leaf(random_tensor(4, 4, rng, scale));
        ad::Var h = ad::relu(ad::matmul(x, w));
        ad::Var n = ad::row_l2_normalize(h);
        ad::Var s = ad::matmul(n, ad::transpose(n));
        ad::Var loss = ad::add(ad::mean(ad::row_log_softmax(ad::scale(s, 1.0 / 0.07))),
                               ad::mean(ad::log(ad::row_softmax(ad::sigmoid(h)))));
        t.backward(loss);
        ASSERT_TRUE(loss.value().all_finite()) << "trial " << trial;
        ASSERT_TRUE(x.grad().all_finite()) << "trial " << trial;
        ASSERT_TRUE(w.grad().all_finite()) << "trial " << trial;
    }
}
