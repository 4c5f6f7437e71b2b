#include "fpgan/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fpgan::models {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int int_log2(int v) {
    int l = 0;
    while ((1 << (l + 1)) <= v) ++l;
    return l;
}

}  // namespace

int ArchConfig::disc_layers() const {
    if (n_disc_layers > 0) return n_disc_layers;
    return int_log2(image_size) - 1;
}

void ArchConfig::validate() const {
    if (!is_power_of_two(image_size) || image_size < 4)
        throw std::invalid_argument("ArchConfig: image_size must be a power of two >= 4");
    if (image_channels != 1 && image_channels != 3)
        throw std::invalid_argument("ArchConfig: image_channels must be 1 or 3");
    if (domain_dim < 1) throw std::invalid_argument("ArchConfig: domain_dim must be >= 1");
    if (base_width < 1) throw std::invalid_argument("ArchConfig: base_width must be >= 1");
    if (n_residual_blocks < 0) throw std::invalid_argument("ArchConfig: n_residual_blocks must be >= 0");
    const int layers = disc_layers();
    if (layers < 1) throw std::invalid_argument("ArchConfig: discriminator needs at least one layer");
    if (image_size < (1 << layers))
        throw std::invalid_argument("ArchConfig: image_size must be >= 2^n_disc_layers");
}

// ---------------------------------------------------------------------------
// GeneratorNet

GeneratorNet::GeneratorNet(const ArchConfig& arch, uint64_t seed, bool delta_head)
    : arch_(arch), delta_head_(delta_head) {
    arch.validate();
    const int w0 = arch.base_width;
    const int in_ch = arch.image_channels + arch.domain_dim;

    body_.emplace<nn::Conv2d>(in_ch, w0, 7, 1, 3, false);
    body_.emplace<nn::InstanceNorm2d>(w0);
    body_.emplace<nn::ReLU>();
    body_.emplace<nn::Conv2d>(w0, 2 * w0, 4, 2, 1, false);
    body_.emplace<nn::InstanceNorm2d>(2 * w0);
    body_.emplace<nn::ReLU>();
    body_.emplace<nn::Conv2d>(2 * w0, 4 * w0, 4, 2, 1, false);
    body_.emplace<nn::InstanceNorm2d>(4 * w0);
    body_.emplace<nn::ReLU>();
    for (int i = 0; i < arch.n_residual_blocks; ++i) body_.emplace<nn::ResidualBlock>(4 * w0);
    body_.emplace<nn::ConvTranspose2d>(4 * w0, 2 * w0, 4, 2, 1, false);
    body_.emplace<nn::InstanceNorm2d>(2 * w0);
    body_.emplace<nn::ReLU>();
    body_.emplace<nn::ConvTranspose2d>(2 * w0, w0, 4, 2, 1, false);
    body_.emplace<nn::InstanceNorm2d>(w0);
    body_.emplace<nn::ReLU>();
    body_.emplace<nn::Conv2d>(w0, arch.image_channels, 7, 1, 3, true);

    Rng rng(seed);
    body_.init(rng);
}

void GeneratorNet::check_inputs(const Tensor& x, const Tensor& labels) const {
    if (x.rank() != 4 || x.dim(1) != arch_.image_channels || x.dim(2) != arch_.image_size ||
        x.dim(3) != arch_.image_size)
        throw std::invalid_argument("GeneratorNet: image batch " + x.shape_str() +
                                    " does not match arch (channels=" + std::to_string(arch_.image_channels) +
                                    ", size=" + std::to_string(arch_.image_size) + ")");
    if (labels.rank() != 2 || labels.dim(0) != x.dim(0) || labels.dim(1) != arch_.domain_dim)
        throw std::invalid_argument("GeneratorNet: label batch " + labels.shape_str() +
                                    " does not match images " + x.shape_str() + " with domain_dim=" +
                                    std::to_string(arch_.domain_dim));
}

Tensor GeneratorNet::delta(const Tensor& x, const Tensor& labels) const {
    check_inputs(x, labels);
    nn::Frame f;
    return body_.forward(concat_label_planes(x, labels), f);
}

Tensor GeneratorNet::translate(const Tensor& x, const Tensor& labels) const {
    Tensor raw = delta(x, labels);
    Tensor out(raw.shape());
    for (long i = 0; i < raw.numel(); ++i)
        out[i] = std::tanh(raw[i] + (delta_head_ ? x[i] : real(0)));
    return out;
}

Tensor GeneratorNet::translate_traced(const Tensor& x, const Tensor& labels, Trace& t) const {
    check_inputs(x, labels);
    t.input = x;
    Tensor raw = body_.forward(concat_label_planes(x, labels), t.body);
    Tensor out(raw.shape());
    for (long i = 0; i < raw.numel(); ++i)
        out[i] = std::tanh(raw[i] + (delta_head_ ? x[i] : real(0)));
    t.output = out;
    return out;
}

Tensor GeneratorNet::backward(const Trace& t, const Tensor& g_out, bool accum_params) {
    check_same_shape(g_out, t.output, "GeneratorNet::backward");
    Tensor g_raw(g_out.shape());
    for (long i = 0; i < g_out.numel(); ++i)
        g_raw[i] = g_out[i] * (real(1) - t.output[i] * t.output[i]);

    Tensor g_full = body_.backward(t.body, g_raw, accum_params);

    // Keep the image-channel slice; label-plane gradients are discarded.
    const int N = g_full.dim(0), C = arch_.image_channels, H = g_full.dim(2), W = g_full.dim(3);
    Tensor gx({N, C, H, W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) gx(n, c, h, w) = g_full(n, c, h, w);
    if (delta_head_) gx.add_(g_raw);
    return gx;
}

std::vector<Tensor*> GeneratorNet::parameters() {
    std::vector<Tensor*> ps, gs;
    body_.collect_params(ps, gs);
    return ps;
}

std::vector<Tensor*> GeneratorNet::gradients() {
    std::vector<Tensor*> ps, gs;
    body_.collect_params(ps, gs);
    return gs;
}

void GeneratorNet::zero_grads() {
    for (Tensor* g : gradients()) g->zero();
}

long GeneratorNet::parameter_count() const {
    long n = 0;
    std::vector<Tensor*> ps, gs;
    const_cast<GeneratorNet*>(this)->body_.collect_params(ps, gs);
    for (const Tensor* p : ps) n += p->numel();
    return n;
}

// ---------------------------------------------------------------------------
// DiscriminatorNet

DiscriminatorNet::DiscriminatorNet(const ArchConfig& arch, uint64_t seed)
    : arch_(arch),
      critic_head_(arch.base_width << (arch.disc_layers() - 1), 1, 3, 1, 1, false),
      domain_head_(arch.base_width << (arch.disc_layers() - 1), arch.domain_dim,
                   arch.image_size >> arch.disc_layers(), 1, 0, false) {
    arch.validate();
    const int layers = arch.disc_layers();
    int ch = arch.image_channels;
    int width = arch.base_width;
    for (int l = 0; l < layers; ++l) {
        convs_.emplace_back(ch, width, 4, 2, 1, true);
        ch = width;
        width *= 2;
    }
    Rng rng(seed);
    for (auto& c : convs_) c.init(rng);
    critic_head_.init(rng);
    domain_head_.init(rng);
}

void DiscriminatorNet::check_input(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != arch_.image_channels || x.dim(2) != arch_.image_size ||
        x.dim(3) != arch_.image_size)
        throw std::invalid_argument("DiscriminatorNet: image batch " + x.shape_str() +
                                    " does not match arch");
}

DiscriminatorNet::Out DiscriminatorNet::forward(const Tensor& x) const {
    Trace t;
    return forward_traced(x, t);
}

DiscriminatorNet::Out DiscriminatorNet::forward_traced(const Tensor& x, Trace& t) const {
    check_input(x);
    const int N = x.dim(0);
    t.layer_in.clear();
    t.preact.clear();

    Tensor z = x;
    for (const auto& conv : convs_) {
        t.layer_in.push_back(z);
        Tensor a = conv.apply(z);
        t.preact.push_back(a);
        Tensor out(a.shape());
        for (long i = 0; i < a.numel(); ++i) out[i] = a[i] > 0 ? a[i] : lrelu_alpha_ * a[i];
        z = std::move(out);
    }
    t.features = z;

    Out o;
    o.critic_map = critic_head_.apply(z);
    Tensor logits_map = domain_head_.apply(z);  // (N, d, 1, 1)
    o.domain_logits = Tensor({N, arch_.domain_dim});
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < arch_.domain_dim; ++k) o.domain_logits(n, k) = logits_map(n, k, 0, 0);
    return o;
}

Tensor DiscriminatorNet::backward(const Trace& t, const Tensor* g_critic_map,
                                  const Tensor* g_domain_logits, bool accum_params) {
    const int N = t.features.dim(0);
    const int fh = t.features.dim(2), fw = t.features.dim(3);

    Tensor gz({N, t.features.dim(1), fh, fw});
    if (g_critic_map) {
        if (accum_params) critic_head_.accum_grad_params(t.features, *g_critic_map);
        gz.add_(critic_head_.grad_input(*g_critic_map, fh, fw));
    }
    if (g_domain_logits) {
        Tensor gmap({N, arch_.domain_dim, 1, 1});
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < arch_.domain_dim; ++k) gmap(n, k, 0, 0) = (*g_domain_logits)(n, k);
        if (accum_params) domain_head_.accum_grad_params(t.features, gmap);
        gz.add_(domain_head_.grad_input(gmap, fh, fw));
    }

    Tensor g = std::move(gz);
    for (size_t l = convs_.size(); l-- > 0;) {
        const Tensor& a = t.preact[l];
        Tensor ga(g.shape());
        for (long i = 0; i < g.numel(); ++i) ga[i] = a[i] > 0 ? g[i] : lrelu_alpha_ * g[i];
        if (accum_params) convs_[l].accum_grad_params(t.layer_in[l], ga);
        g = convs_[l].grad_input(ga, t.layer_in[l].dim(2), t.layer_in[l].dim(3));
    }
    return g;
}

Tensor DiscriminatorNet::critic_scores(const Tensor& critic_map) {
    const int N = critic_map.dim(0);
    const long S = critic_map.numel() / N;
    Tensor s({N});
    for (int n = 0; n < N; ++n) {
        real acc = 0;
        const real* p = critic_map.data() + static_cast<long>(n) * S;
        for (long i = 0; i < S; ++i) acc += p[i];
        s[n] = acc / static_cast<real>(S);
    }
    return s;
}

Tensor DiscriminatorNet::input_gradient(const Trace& t, const Tensor& g_critic_map) const {
    const int fh = t.features.dim(2), fw = t.features.dim(3);
    Tensor g = critic_head_.grad_input(g_critic_map, fh, fw);
    for (size_t l = convs_.size(); l-- > 0;) {
        const Tensor& a = t.preact[l];
        Tensor ga(g.shape());
        for (long i = 0; i < g.numel(); ++i) ga[i] = a[i] > 0 ? g[i] : lrelu_alpha_ * g[i];
        g = convs_[l].grad_input(ga, t.layer_in[l].dim(2), t.layer_in[l].dim(3));
    }
    return g;
}

real DiscriminatorNet::gradient_penalty_value(const Tensor& x_hat) const {
    Trace t;
    Out o = forward_traced(x_hat, t);
    const int N = x_hat.dim(0);
    const long S = o.critic_map.numel() / N;
    Tensor seed(o.critic_map.shape());
    seed.fill(real(1) / static_cast<real>(S));
    Tensor g = input_gradient(t, seed);

    const long P = g.numel() / N;
    real penalty = 0;
    for (int n = 0; n < N; ++n) {
        const real* p = g.data() + static_cast<long>(n) * P;
        real sq = 0;
        for (long i = 0; i < P; ++i) sq += p[i] * p[i];
        const real norm = std::sqrt(sq);
        penalty += (norm - 1) * (norm - 1);
    }
    return penalty / static_cast<real>(N);
}

real DiscriminatorNet::gradient_penalty_and_grads(const Tensor& x_hat, real scale) {
    Trace t;
    Out o = forward_traced(x_hat, t);
    const int N = x_hat.dim(0);
    const long S = o.critic_map.numel() / N;
    Tensor seed(o.critic_map.shape());
    seed.fill(real(1) / static_cast<real>(S));
    Tensor g = input_gradient(t, seed);

    // Penalty value and d(penalty)/d(gradient). If a per-image gradient is
    // exactly zero the (||g||-1)^2 term is non-differentiable; the
    // subgradient 0 is used there.
    const long P = g.numel() / N;
    real penalty = 0;
    Tensor v(g.shape());
    for (int n = 0; n < N; ++n) {
        const real* p = g.data() + static_cast<long>(n) * P;
        real* pv = v.data() + static_cast<long>(n) * P;
        real sq = 0;
        for (long i = 0; i < P; ++i) sq += p[i] * p[i];
        const real norm = std::sqrt(sq);
        penalty += (norm - 1) * (norm - 1);
        const real coef = norm > real(1e-12)
                              ? scale * real(2) * (norm - 1) / (norm * static_cast<real>(N))
                              : real(0);
        for (long i = 0; i < P; ++i) pv[i] = coef * p[i];
    }
    penalty /= static_cast<real>(N);

    // d(penalty)/d(params) = d/d(params) of the directional derivative of the
    // critic along v. The tangent stream passes through bias-free convolutions
    // and the leaky-rectifier masks of the primal pass; since the rectifier's
    // second derivative vanishes almost everywhere, backpropagating the
    // tangent stream alone yields the exact parameter gradient (biases get 0).
    std::vector<Tensor> tangent_in;  // tangent of each conv input
    Tensor tz = std::move(v);
    for (size_t l = 0; l < convs_.size(); ++l) {
        tangent_in.push_back(tz);
        Tensor p = convs_[l].apply(tz, /*use_bias=*/false);
        const Tensor& a = t.preact[l];
        for (long i = 0; i < p.numel(); ++i) p[i] = a[i] > 0 ? p[i] : lrelu_alpha_ * p[i];
        tz = std::move(p);
    }

    critic_head_.accum_grad_params(tz, seed);
    Tensor tb = critic_head_.grad_input(seed, tz.dim(2), tz.dim(3));
    for (size_t l = convs_.size(); l-- > 0;) {
        const Tensor& a = t.preact[l];
        Tensor pb(tb.shape());
        for (long i = 0; i < tb.numel(); ++i) pb[i] = a[i] > 0 ? tb[i] : lrelu_alpha_ * tb[i];
        convs_[l].accum_grad_params(tangent_in[l], pb, /*include_bias=*/false);
        tb = convs_[l].grad_input(pb, tangent_in[l].dim(2), tangent_in[l].dim(3));
    }
    return penalty;
}

std::vector<Tensor*> DiscriminatorNet::parameters() {
    std::vector<Tensor*> ps, gs;
    for (auto& c : convs_) c.collect_params(ps, gs);
    critic_head_.collect_params(ps, gs);
    domain_head_.collect_params(ps, gs);
    return ps;
}

std::vector<Tensor*> DiscriminatorNet::gradients() {
    std::vector<Tensor*> ps, gs;
    for (auto& c : convs_) c.collect_params(ps, gs);
    critic_head_.collect_params(ps, gs);
    domain_head_.collect_params(ps, gs);
    return gs;
}

void DiscriminatorNet::zero_grads() {
    for (Tensor* g : gradients()) g->zero();
}

long DiscriminatorNet::parameter_count() const {
    long n = 0;
    auto ps = const_cast<DiscriminatorNet*>(this)->parameters();
    for (const Tensor* p : ps) n += p->numel();
    return n;
}

// ---------------------------------------------------------------------------
// Free functions

GeneratorNet build_generator(const ArchConfig& arch, uint64_t seed, bool delta_head) {
    return GeneratorNet(arch, seed, delta_head);
}

DiscriminatorNet build_discriminator(const ArchConfig& arch, uint64_t seed) {
    return DiscriminatorNet(arch, seed);
}

std::pair<Tensor, Tensor> discriminate(const DiscriminatorNet& d, const Tensor& x) {
    DiscriminatorNet::Out o = d.forward(x);
    return {DiscriminatorNet::critic_scores(o.critic_map), std::move(o.domain_logits)};
}

Tensor concat_label_planes(const Tensor& x, const Tensor& labels) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int d = labels.dim(1);
    Tensor out({N, C + d, H, W});
    const long S = static_cast<long>(H) * W;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const real* src = x.data() + (static_cast<long>(n) * C + c) * S;
            real* dst = out.data() + (static_cast<long>(n) * (C + d) + c) * S;
            for (long i = 0; i < S; ++i) dst[i] = src[i];
        }
        for (int k = 0; k < d; ++k) {
            real* dst = out.data() + (static_cast<long>(n) * (C + d) + C + k) * S;
            const real v = labels(n, k);
            for (long i = 0; i < S; ++i) dst[i] = v;
        }
    }
    return out;
}

uint64_t parameter_digest(const std::vector<const Tensor*>& params) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const Tensor* p : params) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->data());
        const size_t nbytes = static_cast<size_t>(p->numel()) * sizeof(real);
        for (size_t i = 0; i < nbytes; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

uint64_t parameter_digest(GeneratorNet& g, DiscriminatorNet& d) {
    std::vector<const Tensor*> ps;
    for (Tensor* p : g.parameters()) ps.push_back(p);
    for (Tensor* p : d.parameters()) ps.push_back(p);
    return parameter_digest(ps);
}

}  // namespace fpgan::models
