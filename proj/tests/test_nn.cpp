#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "fpgan/nn.hpp"
#include "fpgan/rng.hpp"

using namespace fpgan;

namespace {

// Central finite difference of f w.r.t. one tensor.
Tensor fd_gradient(Tensor& t, const std::function<real()>& f, real eps = 1e-6) {
    Tensor g(t.shape());
    for (long i = 0; i < t.numel(); ++i) {
        const real orig = t[i];
        t[i] = orig + eps;
        const real hi = f();
        t[i] = orig - eps;
        const real lo = f();
        t[i] = orig;
        g[i] = (hi - lo) / (2 * eps);
    }
    return g;
}

// Worst relative error with an absolute floor: finite differences of an
// exactly-zero gradient read pure roundoff (~1e-10), which must not count.
real max_rel_error(const Tensor& a, const Tensor& b, real atol = 1e-7) {
    real worst = 0;
    for (long i = 0; i < a.numel(); ++i) {
        const real diff = std::abs(a[i] - b[i]);
        if (diff <= atol) continue;
        worst = std::max(worst, diff / std::max(std::abs(a[i]), std::abs(b[i])));
    }
    return worst;
}

// Scalar loss used to exercise backward: weighted sum of outputs.
real weighted_sum(const Tensor& y, const Tensor& w) {
    real s = 0;
    for (long i = 0; i < y.numel(); ++i) s += y[i] * w[i];
    return s;
}

// Checks input and parameter gradients of a layer against finite differences.
void check_layer(nn::Layer& layer, Tensor x, uint64_t seed) {
    Rng rng(seed);
    layer.init(rng);
    rng.fill_uniform(x, -1.0, 1.0);

    nn::Frame f;
    Tensor y = layer.forward(x, f);
    Tensor w(y.shape());
    rng.fill_uniform(w, -1.0, 1.0);

    std::vector<Tensor*> ps, gs;
    layer.collect_params(ps, gs);
    for (Tensor* g : gs) g->zero();

    nn::Frame f2;
    Tensor gx = layer.backward(f, w, true);

    auto loss = [&]() {
        nn::Frame lf;
        return weighted_sum(layer.forward(x, lf), w);
    };
    Tensor gx_fd = fd_gradient(x, loss);
    CHECK(max_rel_error(gx, gx_fd) < 1e-5);

    for (size_t i = 0; i < ps.size(); ++i) {
        Tensor gp_fd = fd_gradient(*ps[i], loss);
        CHECK(max_rel_error(*gs[i], gp_fd) < 1e-5);
    }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    nn::Conv2d conv(2, 3, 3, 1, 1, true);
    check_layer(conv, Tensor({2, 2, 5, 5}), 11);
}

TEST_CASE("strided conv2d gradients match finite differences") {
    nn::Conv2d conv(2, 4, 4, 2, 1, true);
    check_layer(conv, Tensor({2, 2, 6, 6}), 12);
}

TEST_CASE("conv2d 7x7 pad 3 keeps spatial size") {
    nn::Conv2d conv(1, 2, 7, 1, 3, false);
    Rng rng(5);
    conv.init(rng);
    Tensor x({1, 1, 8, 8});
    rng.fill_uniform(x, -1, 1);
    nn::Frame f;
    Tensor y = conv.forward(x, f);
    CHECK(y.shape() == std::vector<int>({1, 2, 8, 8}));
}

TEST_CASE("conv transpose gradients match finite differences") {
    nn::ConvTranspose2d conv(3, 2, 4, 2, 1, true);
    check_layer(conv, Tensor({2, 3, 3, 3}), 13);
}

TEST_CASE("conv transpose doubles spatial size") {
    nn::ConvTranspose2d conv(2, 1, 4, 2, 1, false);
    Rng rng(6);
    conv.init(rng);
    Tensor x({1, 2, 5, 5});
    rng.fill_uniform(x, -1, 1);
    nn::Frame f;
    CHECK(conv.forward(x, f).shape() == std::vector<int>({1, 1, 10, 10}));
}

TEST_CASE("conv transpose is the adjoint of conv") {
    // <conv(x), y> == <x, convT(y)> when they share one weight tensor.
    Rng rng(21);
    nn::Conv2d conv(2, 3, 4, 2, 1, false);
    conv.init(rng);
    nn::ConvTranspose2d convt(3, 2, 4, 2, 1, false);
    // ConvT weight layout (in=3, out=2, k, k); conv weight (out=3, in=2, k, k).
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 2; ++b)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) convt.weight(a, b, i, j) = conv.weight(a, b, i, j);

    Tensor x({1, 2, 6, 6}), y({1, 3, 3, 3});
    rng.fill_uniform(x, -1, 1);
    rng.fill_uniform(y, -1, 1);
    nn::Frame f1, f2;
    Tensor cx = conv.forward(x, f1);
    Tensor cty = convt.forward(y, f2);
    real lhs = 0, rhs = 0;
    for (long i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
    for (long i = 0; i < x.numel(); ++i) rhs += x[i] * cty[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("instance norm gradients match finite differences") {
    nn::InstanceNorm2d in(3);
    check_layer(in, Tensor({2, 3, 4, 4}), 14);
}

TEST_CASE("instance norm output is normalized per sample and channel") {
    nn::InstanceNorm2d in(2);
    Rng rng(7);
    Tensor x({2, 2, 6, 6});
    rng.fill_uniform(x, -3, 5);
    nn::Frame f;
    Tensor y = in.forward(x, f);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c) {
            real mean = 0, var = 0;
            for (int h = 0; h < 6; ++h)
                for (int w = 0; w < 6; ++w) mean += y(n, c, h, w);
            mean /= 36;
            for (int h = 0; h < 6; ++h)
                for (int w = 0; w < 6; ++w) var += (y(n, c, h, w) - mean) * (y(n, c, h, w) - mean);
            var /= 36;
            CHECK(std::abs(mean) < 1e-10);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
        }
}

TEST_CASE("activation gradients match finite differences") {
    nn::ReLU relu;
    check_layer(relu, Tensor({2, 2, 3, 3}), 15);
    nn::LeakyReLU lrelu(0.01);
    check_layer(lrelu, Tensor({2, 2, 3, 3}), 16);
    nn::Tanh tanh_layer;
    check_layer(tanh_layer, Tensor({2, 2, 3, 3}), 17);
}

TEST_CASE("residual block gradients match finite differences") {
    nn::ResidualBlock block(2);
    check_layer(block, Tensor({1, 2, 4, 4}), 18);
}

TEST_CASE("sequential chains backward through a small stack") {
    nn::Sequential seq;
    seq.emplace<nn::Conv2d>(1, 2, 3, 1, 1, true);
    seq.emplace<nn::InstanceNorm2d>(2);
    seq.emplace<nn::ReLU>();
    seq.emplace<nn::Conv2d>(2, 1, 3, 1, 1, true);
    check_layer(seq, Tensor({2, 1, 4, 4}), 19);
}
