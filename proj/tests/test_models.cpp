#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "fpgan/models.hpp"
#include "fpgan/rng.hpp"

using namespace fpgan;
using namespace fpgan::models;

namespace {

ArchConfig small_arch() {
    ArchConfig a;
    a.image_size = 8;
    a.image_channels = 1;
    a.domain_dim = 2;
    a.base_width = 4;
    a.n_residual_blocks = 1;
    return a;
}

Tensor random_images(int n, const ArchConfig& a, uint64_t seed) {
    Tensor x({n, a.image_channels, a.image_size, a.image_size});
    Rng rng(seed);
    rng.fill_uniform(x, -1, 1);
    return x;
}

Tensor labels_of(int n, int d, std::initializer_list<real> vals) {
    Tensor c({n, d});
    long i = 0;
    for (real v : vals) c[i++] = v;
    return c;
}

void zero_all(std::vector<Tensor*> ps) {
    for (Tensor* p : ps) p->zero();
}

// Independent layer-by-layer parameter count, written from the layer plan
// rather than from the network objects.
long expected_generator_params(const ArchConfig& a) {
    const int w0 = a.base_width, c = a.image_channels, d = a.domain_dim;
    long n = 0;
    n += static_cast<long>(w0) * (c + d) * 7 * 7 + 2 * w0;          // in conv + IN
    n += static_cast<long>(2 * w0) * w0 * 4 * 4 + 2 * (2 * w0);     // down 1 + IN
    n += static_cast<long>(4 * w0) * (2 * w0) * 4 * 4 + 2 * (4 * w0);  // down 2 + IN
    for (int r = 0; r < a.n_residual_blocks; ++r)
        n += 2 * (static_cast<long>(4 * w0) * (4 * w0) * 3 * 3 + 2 * (4 * w0));
    n += static_cast<long>(4 * w0) * (2 * w0) * 4 * 4 + 2 * (2 * w0);  // up 1 + IN
    n += static_cast<long>(2 * w0) * w0 * 4 * 4 + 2 * w0;              // up 2 + IN
    n += static_cast<long>(c) * w0 * 7 * 7 + c;                        // out conv (with bias)
    return n;
}

long expected_discriminator_params(const ArchConfig& a) {
    const int layers = a.disc_layers();
    long n = 0;
    int in = a.image_channels, width = a.base_width;
    for (int l = 0; l < layers; ++l) {
        n += static_cast<long>(width) * in * 4 * 4 + width;
        in = width;
        width *= 2;
    }
    n += static_cast<long>(in) * 1 * 3 * 3;  // critic head, no bias
    const int ks = a.image_size >> layers;
    n += static_cast<long>(a.domain_dim) * in * ks * ks;  // domain head, no bias
    return n;
}

}  // namespace

TEST_CASE("generator output shape matches input shape") {
    ArchConfig a;
    a.image_size = 64;
    a.image_channels = 1;
    a.domain_dim = 1;
    a.base_width = 64;
    a.n_residual_blocks = 6;
    GeneratorNet g = build_generator(a, 0);
    Tensor x = random_images(1, a, 3);
    Tensor c = labels_of(1, 1, {1});
    Tensor d = delta_map(g, x, c);
    CHECK(d.shape() == std::vector<int>({1, 1, 64, 64}));
    CHECK(translate(g, x, c).shape() == x.shape());
}

TEST_CASE("same seed gives bit-identical parameters") {
    ArchConfig a = small_arch();
    GeneratorNet g1 = build_generator(a, 42), g2 = build_generator(a, 42);
    auto p1 = g1.parameters(), p2 = g2.parameters();
    REQUIRE(p1.size() == p2.size());
    for (size_t i = 0; i < p1.size(); ++i)
        for (long j = 0; j < p1[i]->numel(); ++j) CHECK((*p1[i])[j] == (*p2[i])[j]);

    GeneratorNet g3 = build_generator(a, 43);
    CHECK(parameter_digest({p1[0]}) != parameter_digest({g3.parameters()[0]}));
}

TEST_CASE("parameter counts match the layer-plan oracle") {
    ArchConfig a;
    a.image_size = 32;
    a.image_channels = 3;
    a.domain_dim = 5;
    a.base_width = 8;
    a.n_residual_blocks = 2;
    GeneratorNet g = build_generator(a, 1);
    DiscriminatorNet d = build_discriminator(a, 2);
    CHECK(g.parameter_count() == expected_generator_params(a));
    CHECK(d.parameter_count() == expected_discriminator_params(a));

    ArchConfig b = small_arch();
    CHECK(build_generator(b, 1).parameter_count() == expected_generator_params(b));
    CHECK(build_discriminator(b, 1).parameter_count() == expected_discriminator_params(b));
}

TEST_CASE("invalid arch configurations are rejected") {
    ArchConfig a = small_arch();
    a.image_size = 48;  // not a power of two
    CHECK_THROWS_AS((void)build_generator(a, 0), std::invalid_argument);
    a = small_arch();
    a.domain_dim = 0;
    CHECK_THROWS_AS((void)build_generator(a, 0), std::invalid_argument);
    a = small_arch();
    a.n_disc_layers = 4;  // 8 < 2^4
    CHECK_THROWS_AS((void)build_discriminator(a, 0), std::invalid_argument);
}

TEST_CASE("translate with zeroed final layer") {
    ArchConfig a = small_arch();
    GeneratorNet g = build_generator(a, 7);
    // Final conv is the last two parameter tensors (weight, bias).
    auto ps = g.parameters();
    ps[ps.size() - 2]->zero();
    ps[ps.size() - 1]->zero();

    Tensor c = labels_of(2, 2, {1, 0, 0, 1});

    Tensor x({2, 1, 8, 8});
    CHECK(delta_map(g, x, c)[0] == 0.0);
    Tensor y = translate(g, x, c);
    for (long i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0);

    x.fill(0.5);
    y = translate(g, x, c);
    for (long i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
}

TEST_CASE("translate stays strictly inside (-1, 1)") {
    ArchConfig a = small_arch();
    GeneratorNet g = build_generator(a, 99);
    Tensor x = random_images(4, a, 5);
    Tensor c = labels_of(4, 2, {1, 0, 0, 1, 1, 1, 0, 0});
    Tensor y = translate(g, x, c);
    for (long i = 0; i < y.numel(); ++i) CHECK(std::abs(y[i]) < 1.0);
}

TEST_CASE("translate equals tanh(delta + x) elementwise") {
    ArchConfig a = small_arch();
    GeneratorNet g = build_generator(a, 11);
    Tensor x = random_images(2, a, 6);
    Tensor c = labels_of(2, 2, {1, 0, 0, 1});
    Tensor d = delta_map(g, x, c);
    Tensor y = translate(g, x, c);
    for (long i = 0; i < y.numel(); ++i)
        CHECK(y[i] == doctest::Approx(std::tanh(d[i] + x[i])).epsilon(1e-6));
}

TEST_CASE("identity requires delta = atanh(x) - x") {
    // With the delta head, an exact same-domain identity means
    // tanh(delta + x) = x, i.e. delta = atanh(x) - x.
    const real x = 0.5;
    const real delta = std::atanh(x) - x;
    CHECK(delta == doctest::Approx(0.04930614).epsilon(1e-6));
    CHECK(std::tanh(delta + x) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("no-delta generator outputs tanh(net) directly") {
    ArchConfig a = small_arch();
    GeneratorNet g = build_generator(a, 7, /*delta_head=*/false);
    auto ps = g.parameters();
    ps[ps.size() - 2]->zero();
    ps[ps.size() - 1]->zero();
    Tensor x = random_images(2, a, 8);
    Tensor c = labels_of(2, 2, {1, 0, 0, 1});
    Tensor y = translate(g, x, c);
    for (long i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0);  // tanh(0), any x
}

TEST_CASE("zeroed discriminator scores zero everywhere") {
    ArchConfig a = small_arch();
    DiscriminatorNet d = build_discriminator(a, 3);
    zero_all(d.parameters());
    Tensor x = random_images(3, a, 9);
    auto [scores, logits] = discriminate(d, x);
    CHECK(scores.shape() == std::vector<int>({3}));
    CHECK(logits.shape() == std::vector<int>({3, 2}));
    for (long i = 0; i < scores.numel(); ++i) CHECK(scores[i] == 0.0);
    for (long i = 0; i < logits.numel(); ++i) CHECK(logits[i] == 0.0);
}

TEST_CASE("linearized probe critic: score difference equals sum of weights") {
    // Push every pre-activation into the positive leaky-relu branch with a
    // large bias so the critic becomes affine; the effective pixel weights
    // w_eff are then measured by per-pixel finite differences.
    ArchConfig a;
    a.image_size = 4;
    a.image_channels = 1;
    a.domain_dim = 1;
    a.base_width = 2;
    a.n_residual_blocks = 0;
    DiscriminatorNet d = build_discriminator(a, 17);
    auto ps = d.parameters();
    // params: conv w, conv b, critic w, domain w
    ps[1]->fill(50.0);

    auto score0 = [&](const Tensor& x) {
        return discriminate(d, x).first[0];
    };

    Tensor zeros({1, 1, 4, 4});
    Tensor ones = Tensor::full({1, 1, 4, 4}, 1.0);

    real sum_w = 0;
    const real eps = 1e-5;
    for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w) {
            Tensor xp = zeros, xm = zeros;
            xp(0, 0, h, w) = eps;
            xm(0, 0, h, w) = -eps;
            sum_w += (score0(xp) - score0(xm)) / (2 * eps);
        }
    CHECK(score0(ones) - score0(zeros) == doctest::Approx(sum_w).epsilon(1e-6));
}

TEST_CASE("forward passes on distinct inputs are safe to run concurrently") {
    ArchConfig a = small_arch();
    const GeneratorNet g = build_generator(a, 23);
    Tensor x1 = random_images(2, a, 31), x2 = random_images(2, a, 32);
    Tensor c = labels_of(2, 2, {1, 0, 0, 1});
    Tensor seq1 = g.translate(x1, c), seq2 = g.translate(x2, c);

    Tensor par1, par2;
    std::thread t1([&] { par1 = g.translate(x1, c); });
    std::thread t2([&] { par2 = g.translate(x2, c); });
    t1.join();
    t2.join();
    for (long i = 0; i < seq1.numel(); ++i) CHECK(par1[i] == seq1[i]);
    for (long i = 0; i < seq2.numel(); ++i) CHECK(par2[i] == seq2[i]);
}
