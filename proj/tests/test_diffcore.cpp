#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "astgi/diffcore/adamw.hpp"
#include "astgi/diffcore/gradcheck.hpp"
#include "astgi/diffcore/ops.hpp"
#include "astgi/diffcore/params.hpp"

using namespace astgi;
using T = Tensor<double>;

namespace {

std::vector<double> vals(const T& t) { return {t.values().begin(), t.values().end()}; }
std::vector<double> grads(const T& t) { return {t.grad().begin(), t.grad().end()}; }

T random_tensor(std::mt19937_64& rng, Shape shape) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = u(rng);
    return T(std::move(shape), std::move(v));
}

// Gradient check of an arbitrary scalar function of freshly registered inputs.
template <typename Fn>
GradCheckReport check_inputs(std::vector<T> inputs, Fn&& fn) {
    ModelParams<double> params;
    std::vector<T> handles;
    for (std::size_t i = 0; i < inputs.size(); ++i) handles.push_back(params.add("in" + std::to_string(i), inputs[i]));
    return finite_diff_check(params, [&] { return fn(handles); }, 1e-6, 1e-4);
}

}  // namespace

TEST(Matmul, IdentityTimesVector) {
    const T id = T::matrix(2, 2, {1, 0, 0, 1});
    const T x = T::matrix(2, 1, {3, 4});
    EXPECT_EQ(vals(matmul(id, x)), (std::vector<double>{3, 4}));
}

TEST(Matmul, HandProduct) {
    const T a = T::matrix(2, 2, {1, 2, 3, 4});
    const T b = T::matrix(2, 1, {5, 6});
    const T c = matmul(a, b);
    EXPECT_EQ(c.shape(), (Shape{2, 1}));
    EXPECT_EQ(vals(c), (std::vector<double>{17, 39}));
}

TEST(Matmul, ZeroAnnihilates) {
    std::mt19937_64 rng(1);
    const T z = T::zeros({3, 3});
    EXPECT_EQ(vals(matmul(z, random_tensor(rng, {3, 3}))), std::vector<double>(9, 0.0));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    const T a = T::zeros({2, 3});
    const T b = T::zeros({2, 2});
    try {
        (void)matmul(a, b);
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[2x2]"), std::string::npos) << msg;
    }
}

TEST(Concat, Vectors) {
    const T c = concat<double>({T::vector({1, 2}), T::vector({3})}, 0);
    EXPECT_EQ(vals(c), (std::vector<double>{1, 2, 3}));
}

TEST(Concat, SinglePartIsIdentity) {
    const T x = T::vector({4, 5, 6});
    EXPECT_EQ(vals(concat<double>({x}, 0)), vals(x));
}

TEST(Concat, BackwardSlicesGradient) {
    ModelParams<double> p;
    const T a = p.add("a", T::vector({1}));
    const T b = p.add("b", T::vector({2}));
    const T c = concat<double>({a, b}, 0);
    // loss = 7 c0 + 11 c1, so the incoming gradient is (7, 11)
    backward(sum_product(c, T::vector({7, 11})));
    EXPECT_EQ(grads(a), (std::vector<double>{7}));
    EXPECT_EQ(grads(b), (std::vector<double>{11}));
}

TEST(Concat, IncompatibleExtents) {
    EXPECT_THROW((void)concat<double>({T::zeros({2, 3}), T::zeros({2, 2})}, 0), DimensionError);
}

TEST(Softmax, ConstantScoresUniform) {
    for (double c : {-5.0, 0.0, 3.25}) {
        const T p = softmax(T::vector({c, c, c}));
        for (double v : p.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    }
}

TEST(Softmax, ClosedForm) {
    const T p = softmax(T::vector({std::log(2.0), 0.0}));
    EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, SingleScore) { EXPECT_EQ(softmax(T::vector({5.0})).item(), 1.0); }

TEST(Softmax, EmptyIsEmptyNeighborhood) { EXPECT_THROW((void)softmax(T::vector({})), EmptyNeighborhoodError); }

TEST(Softmax, PositiveSumsToOneAndShiftInvariant) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        std::vector<double> s(n), shifted(n);
        const double c = u(rng);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = u(rng);
            shifted[i] = s[i] + c;
        }
        const T p = softmax(T::vector(s));
        double total = 0;
        for (double v : p.values()) {
            EXPECT_GT(v, 0.0);
            total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-6);
        // Exact integers keep s + c exact, so the shifted result must match bit for bit.
        std::vector<double> si(n), sc(n);
        for (std::size_t i = 0; i < n; ++i) {
            si[i] = std::round(s[i]);
            sc[i] = si[i] + std::round(c);
        }
        EXPECT_EQ(vals(softmax(T::vector(si))), vals(softmax(T::vector(sc))));
    }
}

TEST(LayerNorm, ConstantInputGivesZeros) {
    const T y = layer_norm(T::vector({2, 2, 2}), T::full({3}, 1.0), T::zeros({3}), 1e-5);
    for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, HandValues) {
    const T y = layer_norm(T::vector({1, 3}), T::full({2}, 1.0), T::zeros({2}), 0.0);
    EXPECT_NEAR(y[0], -1.0, 1e-15);
    EXPECT_NEAR(y[1], 1.0, 1e-15);
}

TEST(LayerNorm, ZeroGainGivesBias) {
    const T y = layer_norm(T::vector({1, 5, -2}), T::zeros({3}), T::vector({0.5, -1, 2}), 1e-5);
    EXPECT_EQ(vals(y), (std::vector<double>{0.5, -1, 2}));
}

TEST(LayerNorm, MomentsProperty) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + rng() % 30;
        const T x = random_tensor(rng, {d});
        const double eps = 1e-5;
        const T y = layer_norm(x, T::full({d}, 1.0), T::zeros({d}), eps);
        double mean = 0, var = 0, xm = 0, xv = 0;
        for (std::size_t i = 0; i < d; ++i) {
            mean += y[i];
            xm += x[i];
        }
        mean /= static_cast<double>(d);
        xm /= static_cast<double>(d);
        for (std::size_t i = 0; i < d; ++i) {
            var += (y[i] - mean) * (y[i] - mean);
            xv += (x[i] - xm) * (x[i] - xm);
        }
        var /= static_cast<double>(d);
        xv /= static_cast<double>(d);
        EXPECT_LT(std::abs(mean), 1e-9);
        // var(y) = var(x) / (var(x) + eps) exactly; allow that plus rounding.
        EXPECT_NEAR(var, xv / (xv + eps), 1e-9);
        EXPECT_NEAR(var, 1.0, eps / xv + 1e-9);
    }
}

TEST(Relu, Forward) { EXPECT_EQ(vals(relu(T::vector({-1, 0, 2}))), (std::vector<double>{0, 0, 2})); }

TEST(Relu, SubgradientAtZeroIsZero) {
    ModelParams<double> p;
    const T x = p.add("x", T::vector({-1, 0, 2}));
    backward(sum_product(relu(x), T::vector({1, 1, 1})));
    EXPECT_EQ(grads(x), (std::vector<double>{0, 0, 1}));
}

TEST(Relu, Idempotent) {
    std::mt19937_64 rng(3);
    const T x = random_tensor(rng, {4, 5});
    EXPECT_EQ(vals(relu(relu(x))), vals(relu(x)));
}

TEST(Mse, PerfectFit) { EXPECT_EQ(mse(T::vector({1, 2}), T::vector({1, 2})).item(), 0.0); }

TEST(Mse, HandValue) { EXPECT_EQ(mse(T::vector({0, 0}), T::vector({1, 3})).item(), 5.0); }

TEST(Mse, Gradient) {
    ModelParams<double> p;
    const T x = p.add("x", T::vector({2}));
    backward(mse(x, T::vector({0})));
    EXPECT_EQ(grads(x), (std::vector<double>{4}));
}

TEST(Mse, EmptyIsEmptyQuery) { EXPECT_THROW((void)mse(T::vector({}), T::vector({})), EmptyQueryError); }

TEST(Backward, IdentityChain) {
    ModelParams<double> p;
    const T x = p.add("x", T::scalar(3.0));
    backward(x);
    EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Backward, LinearMapMatchesFiniteDifferences) {
    std::mt19937_64 rng(5);
    ModelParams<double> p;
    const T w = p.add("w", random_tensor(rng, {3, 2}));
    const T b = p.add("b", random_tensor(rng, {2}));
    const T x = random_tensor(rng, {4, 3});
    const T y = random_tensor(rng, {8});
    auto loss = [&] { return mse(reshape(add_bias(matmul(x, w), b), Shape{8}), y); };
    const auto report = finite_diff_check(p, loss, 1e-6, 1e-6);
    EXPECT_TRUE(report.passed()) << report.max_rel_error();
}

TEST(Backward, DisconnectedParameterStaysZero) {
    ModelParams<double> p;
    const T x = p.add("x", T::scalar(2.0));
    const T unused = p.add("unused", T::vector({1, 2}));
    p.zero_grad();
    backward(scale(x, 3.0));
    EXPECT_EQ(grads(unused), (std::vector<double>{0, 0}));
}

TEST(Backward, AccumulatesAcrossCalls) {
    ModelParams<double> p;
    const T x = p.add("x", T::scalar(2.0));
    p.zero_grad();
    backward(scale(x, 3.0));
    backward(scale(x, 3.0));
    EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, NonScalarLossIsContractError) {
    ModelParams<double> p;
    const T x = p.add("x", T::vector({1, 2}));
    EXPECT_THROW(backward(x), ContractError);
}

TEST(AdamW, ZeroGradZeroDecayIsIdentity) {
    ModelParams<double> p;
    T x = p.add("x", T::vector({0.5, -2.0}));
    AdamW<double> opt(p, {0.1, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 3; ++i) {
        p.zero_grad();
        opt.step(p);
    }
    EXPECT_EQ(vals(x), (std::vector<double>{0.5, -2.0}));
    EXPECT_EQ(opt.step_count(), 3u);
}

TEST(AdamW, HandStep) {
    ModelParams<double> p;
    T x = p.add("x", T::scalar(0.0));
    AdamW<double> opt(p, {0.1, 0.0, 0.0, 0.0, 0.0});
    p.zero_grad();
    x.mutable_grad()[0] = 1.0;
    opt.step(p);
    EXPECT_NEAR(x[0], -0.1, 1e-15);
    EXPECT_EQ(opt.step_count(), 1u);
}

TEST(AdamW, DecoupledDecay) {
    ModelParams<double> p;
    T x = p.add("x", T::vector({2.0, -4.0}));
    const double lr = 0.01, wd = 0.5;
    AdamW<double> opt(p, {lr, 0.9, 0.999, 1e-8, wd});
    p.zero_grad();
    opt.step(p);
    EXPECT_DOUBLE_EQ(x[0], 2.0 * (1 - lr * wd));
    EXPECT_DOUBLE_EQ(x[1], -4.0 * (1 - lr * wd));
}

TEST(AdamW, MissingGradientNamesParameter) {
    ModelParams<double> p;
    p.add("encoder.thing", T::vector({1.0}));
    AdamW<double> opt(p, {});
    try {
        opt.step(p);
        FAIL() << "expected ContractError";
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find("encoder.thing"), std::string::npos);
    }
}

TEST(AdamW, MatchesReferenceRecurrence) {
    // Reference AdamW recurrence over several steps with varying gradients.
    ModelParams<double> p;
    T x = p.add("x", T::scalar(1.0));
    const AdamWHyper h{0.05, 0.9, 0.99, 1e-8, 0.1};
    AdamW<double> opt(p, h);
    double ref = 1.0, m = 0, v = 0;
    for (int t = 1; t <= 5; ++t) {
        const double g = std::sin(t) + 0.5;
        p.zero_grad();
        x.mutable_grad()[0] = g;
        opt.step(p);
        ref *= 1 - h.lr * h.weight_decay;
        m = h.beta1 * m + (1 - h.beta1) * g;
        v = h.beta2 * v + (1 - h.beta2) * g * g;
        const double mh = m / (1 - std::pow(h.beta1, t)), vh = v / (1 - std::pow(h.beta2, t));
        ref -= h.lr * mh / (std::sqrt(vh) + h.eps);
        EXPECT_NEAR(x[0], ref, 1e-12);
    }
}

TEST(GradCheck, Quadratic) {
    ModelParams<double> p;
    const T x = p.add("p", T::scalar(3.0));
    const auto report = finite_diff_check(p, [&] { return sum_product(x, x); }, 1e-6, 1e-8);
    ASSERT_EQ(report.entries.size(), 1u);
    EXPECT_LT(report.entries[0].max_rel_error, 1e-8);
    EXPECT_TRUE(report.passed());
}

TEST(GradCheck, EmptyParamsEmptyReport) {
    ModelParams<double> p;
    const auto report = finite_diff_check(p, [] { return T::scalar(1.0); });
    EXPECT_TRUE(report.entries.empty());
    EXPECT_TRUE(report.passed());
}

TEST(GradCheck, RelativeErrorFloor) {
    EXPECT_DOUBLE_EQ(relative_error(1e-12, 0.0), 1e-12 / 1e-8);
    EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
}

// Every op against central differences on randomized inputs.
class OpGradients : public ::testing::TestWithParam<int> {};

TEST_P(OpGradients, MatchFiniteDifferences) {
    std::mt19937_64 rng(100 + GetParam());
    const T w3 = random_tensor(rng, {3});
    const T w6 = random_tensor(rng, {6});
    const T w12 = random_tensor(rng, {12});
    const std::vector<std::size_t> offsets{0, 2, 2, 5, 6};
    const std::vector<std::size_t> rows{2, 0, 2, 1, 3, 2};
    const T w_rows = random_tensor(rng, {6, 3});

    struct Case {
        const char* name;
        std::vector<T> inputs;
        std::function<T(const std::vector<T>&)> fn;
    };
    std::vector<Case> cases = {
        {"matmul", {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})},
         [&](const auto& v) { return sum_product(reshape(matmul(v[0], v[1]), Shape{6}), w6); }},
        {"add_sub", {random_tensor(rng, {3}), random_tensor(rng, {3})},
         [&](const auto& v) { return sum_product(sub(add(v[0], v[1]), scale(v[1], 0.3)), w3); }},
        {"add_bias", {random_tensor(rng, {2, 3}), random_tensor(rng, {3})},
         [&](const auto& v) { return sum_product(reshape(add_bias(v[0], v[1]), Shape{6}), w6); }},
        {"relu", {random_tensor(rng, {6})}, [&](const auto& v) { return sum_product(relu(v[0]), w6); }},
        {"concat_rows", {random_tensor(rng, {1, 3}), random_tensor(rng, {1, 3})},
         [&](const auto& v) { return sum_product(reshape(concat<double>({v[0], v[1]}, 0), Shape{6}), w6); }},
        {"concat_cols", {random_tensor(rng, {2, 1}), random_tensor(rng, {2, 2})},
         [&](const auto& v) { return sum_product(reshape(concat<double>({v[0], v[1]}, 1), Shape{6}), w6); }},
        {"gather_rows", {random_tensor(rng, {4, 3})},
         [&](const auto& v) { return sum_product(reshape(gather_rows(v[0], rows), Shape{18}), reshape(w_rows, Shape{18})); }},
        {"softmax", {random_tensor(rng, {6})}, [&](const auto& v) { return sum_product(softmax(v[0]), w6); }},
        {"segment_softmax", {random_tensor(rng, {6})},
         [&](const auto& v) { return sum_product(segment_softmax(v[0], offsets), w6); }},
        {"segment_weighted_sum", {random_tensor(rng, {6}), random_tensor(rng, {6, 3})},
         [&](const auto& v) {
             return sum_product(reshape(segment_weighted_sum(v[0], v[1], offsets), Shape{12}), w12);
         }},
        {"layer_norm", {random_tensor(rng, {2, 3}), random_tensor(rng, {3}), random_tensor(rng, {3})},
         [&](const auto& v) { return sum_product(reshape(layer_norm(v[0], v[1], v[2], 1e-5), Shape{6}), w6); }},
        {"mse", {random_tensor(rng, {3})}, [&](const auto& v) { return mse(v[0], w3); }},
        {"mean_of", {random_tensor(rng, {3}), random_tensor(rng, {3})},
         [&](const auto& v) {
             const std::vector<T> s{mse(v[0], w3), mse(v[1], w3)};
             return mean_of<double>(s);
         }},
    };
    for (auto& c : cases) {
        const auto report = check_inputs(c.inputs, c.fn);
        EXPECT_TRUE(report.passed()) << c.name << " max rel error " << report.max_rel_error();
    }
}

INSTANTIATE_TEST_SUITE_P(Randomized, OpGradients, ::testing::Range(0, 10));

TEST(SegmentOps, EmptySegmentGivesZeroRow) {
    const std::vector<std::size_t> offsets{0, 0, 2};
    const T w = segment_softmax(T::vector({0.3, -0.1}), offsets);
    const T out = segment_weighted_sum(w, T::matrix(2, 2, {1, 2, 3, 4}), offsets);
    EXPECT_EQ(out.at(0, 0), 0.0);
    EXPECT_EQ(out.at(0, 1), 0.0);
    EXPECT_NEAR(w[0] + w[1], 1.0, 1e-15);
}

TEST(Determinism, RepeatedEvaluationBitIdentical) {
    std::mt19937_64 rng(9);
    const T a = random_tensor(rng, {17, 23});
    const T b = random_tensor(rng, {23, 5});
    const T g = random_tensor(rng, {5});
    const T bias = random_tensor(rng, {5});
    auto run = [&] { return vals(layer_norm(relu(matmul(a, b)), g, bias, 1e-5)); };
    EXPECT_EQ(run(), run());
}

TEST(Params, DuplicateNameRejected) {
    ModelParams<double> p;
    p.add("a", T::scalar(1));
    EXPECT_THROW(p.add("a", T::scalar(2)), ContractError);
}

TEST(Params, GlorotBoundsAndSeededDeterminism) {
    Initializer i1(42), i2(42);
    const T a = i1.glorot<double>(10, 6);
    const T b = i2.glorot<double>(10, 6);
    EXPECT_EQ(vals(a), vals(b));
    const double bound = std::sqrt(6.0 / 16.0);
    for (double v : a.values()) EXPECT_LE(std::abs(v), bound);
}

TEST(Tensor, ShapeMismatchOnConstruction) {
    EXPECT_THROW(T(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Tensor, NonFiniteDetectable) {
    EXPECT_FALSE(T::vector({1.0, std::nan("")}).all_finite());
    EXPECT_TRUE(T::vector({1.0, 2.0}).all_finite());
}
