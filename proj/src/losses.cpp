#include "fpgan/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "fpgan/rng.hpp"

namespace fpgan::losses {

void LossWeights::validate() const {
    if (lambda_domain < 0 || lambda_cyc < 0 || lambda_id < 0 || lambda_gp < 0)
        throw std::invalid_argument("LossWeights: weights must be >= 0");
}

InterpolationSample make_interpolation(const Tensor& x_real, const Tensor& x_fake, uint64_t seed) {
    check_same_shape(x_real, x_fake, "make_interpolation");
    const int N = x_real.dim(0);
    const long P = x_real.numel() / N;

    InterpolationSample s;
    s.x_hat = Tensor(x_real.shape());
    s.epsilon.resize(static_cast<size_t>(N));
    Rng rng = Rng::derive(seed, "gp-epsilon");
    for (int n = 0; n < N; ++n) {
        const real eps = rng.uniform();
        s.epsilon[static_cast<size_t>(n)] = eps;
        const real* pr = x_real.data() + static_cast<long>(n) * P;
        const real* pf = x_fake.data() + static_cast<long>(n) * P;
        real* ph = s.x_hat.data() + static_cast<long>(n) * P;
        for (long i = 0; i < P; ++i) ph[i] = eps * pr[i] + (real(1) - eps) * pf[i];
    }
    return s;
}

real mean_critic_score(const Tensor& critic_map) {
    const int N = critic_map.dim(0);
    Tensor s = models::DiscriminatorNet::critic_scores(critic_map);
    real acc = 0;
    for (int n = 0; n < N; ++n) acc += s[n];
    return acc / static_cast<real>(N);
}

real critic_loss(const models::DiscriminatorNet& d, const Tensor& x_real,
                 const std::vector<Tensor>& fakes, real gp, const LossWeights& w) {
    if (fakes.empty()) throw std::invalid_argument("critic_loss: fakes list must not be empty");
    real loss = -mean_critic_score(d.forward(x_real).critic_map);
    for (const Tensor& f : fakes) loss += mean_critic_score(d.forward(f).critic_map);
    return loss + w.lambda_gp * gp;
}

real gradient_penalty(const models::DiscriminatorNet& d, const Tensor& x_real, const Tensor& x_fake,
                      uint64_t seed) {
    InterpolationSample s = make_interpolation(x_real, x_fake, seed);
    return d.gradient_penalty_value(s.x_hat);
}

real generator_adversarial_loss(const models::DiscriminatorNet& d, const std::vector<Tensor>& fakes) {
    if (fakes.empty())
        throw std::invalid_argument("generator_adversarial_loss: fakes list must not be empty");
    real loss = 0;
    for (const Tensor& f : fakes) loss -= mean_critic_score(d.forward(f).critic_map);
    return loss;
}

real bce_logits(const Tensor& logits, const Tensor& labels) {
    check_same_shape(logits, labels, "bce_logits");
    const int N = logits.dim(0);
    real acc = 0;
    for (long i = 0; i < logits.numel(); ++i) {
        const real l = logits[i], y = labels[i];
        // max(l,0) - l*y + log(1 + exp(-|l|))
        acc += std::max(l, real(0)) - l * y + std::log1p(std::exp(-std::abs(l)));
    }
    return acc / static_cast<real>(N);
}

Tensor bce_logits_backward(const Tensor& logits, const Tensor& labels, real scale) {
    const int N = logits.dim(0);
    Tensor g(logits.shape());
    for (long i = 0; i < logits.numel(); ++i) {
        const real sig = real(1) / (real(1) + std::exp(-logits[i]));
        g[i] = scale * (sig - labels[i]) / static_cast<real>(N);
    }
    return g;
}

real domain_loss_real(const Tensor& logits, const Tensor& labels) {
    check_same_shape(logits, labels, "domain_loss_real");
    for (long i = 0; i < labels.numel(); ++i)
        if (labels[i] != real(0) && labels[i] != real(1))
            throw std::invalid_argument("domain_loss_real: labels must be exactly 0 or 1");
    return bce_logits(logits, labels);
}

real domain_loss_fake(const models::DiscriminatorNet& d,
                      const std::vector<std::pair<Tensor, Tensor>>& fake_pairs) {
    if (fake_pairs.empty())
        throw std::invalid_argument("domain_loss_fake: pair list must not be empty");
    real loss = 0;
    for (const auto& [fake, target] : fake_pairs)
        loss += domain_loss_real(d.forward(fake).domain_logits, target);
    return loss;
}

real l1_mean(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "l1_mean");
    real acc = 0;
    for (long i = 0; i < a.numel(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<real>(a.numel());
}

Tensor l1_mean_backward(const Tensor& a, const Tensor& b, real scale) {
    Tensor g(a.shape());
    const real s = scale / static_cast<real>(a.numel());
    for (long i = 0; i < a.numel(); ++i) {
        const real dd = a[i] - b[i];
        g[i] = dd > 0 ? s : (dd < 0 ? -s : real(0));
    }
    return g;
}

real cycle_loss(const Tensor& x, const Tensor& cyc_cross, const Tensor* cyc_same) {
    real loss = l1_mean(cyc_cross, x);
    if (cyc_same) loss += l1_mean(*cyc_same, x);
    return loss;
}

real conditional_identity_loss(const Tensor& x, const Tensor& same_out, bool target_is_source) {
    if (!target_is_source) return real(0);
    return l1_mean(same_out, x);
}

real total_discriminator_loss(const DiscLossParts& parts, const LossWeights& w) {
    return parts.critic + w.lambda_domain * parts.domain_real;
}

real total_generator_loss(const GenLossParts& parts, const LossWeights& w) {
    return parts.adversarial + w.lambda_domain * parts.domain_fake + w.lambda_cyc * parts.cycle +
           w.lambda_id * parts.identity;
}

Tensor critic_mean_seed(const Tensor& critic_map, real scale) {
    const int N = critic_map.dim(0);
    const long S = critic_map.numel() / N;
    Tensor seed(critic_map.shape());
    seed.fill(scale / (static_cast<real>(N) * static_cast<real>(S)));
    return seed;
}

}  // namespace fpgan::losses
