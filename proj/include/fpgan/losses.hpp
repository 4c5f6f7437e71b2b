#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fpgan/models.hpp"
#include "fpgan/tensor.hpp"

namespace fpgan::losses {

struct LossWeights {
    real lambda_domain = 1;
    real lambda_cyc = 10;
    real lambda_id = 10;
    real lambda_gp = 10;

    void validate() const;  // all weights >= 0
};

struct InterpolationSample {
    Tensor x_hat;
    std::vector<real> epsilon;  // one per image, in [0, 1]
};

/// x_hat = eps * x_real + (1 - eps) * x_fake, eps drawn uniformly per image.
InterpolationSample make_interpolation(const Tensor& x_real, const Tensor& x_fake, uint64_t seed);

/// Critic side of the adversarial objective plus the weighted penalty:
/// -mean(D(x_real)) + sum_f mean(D(f)) + lambda_gp * gp.
real critic_loss(const models::DiscriminatorNet& d, const Tensor& x_real,
                 const std::vector<Tensor>& fakes, real gp, const LossWeights& w);

/// mean over images of (||grad_xhat critic(xhat)||_2 - 1)^2.
real gradient_penalty(const models::DiscriminatorNet& d, const Tensor& x_real, const Tensor& x_fake,
                      uint64_t seed);

/// -sum_f mean(D(f)); minimizing raises the critic score of the fakes.
real generator_adversarial_loss(const models::DiscriminatorNet& d, const std::vector<Tensor>& fakes);

/// Mean over images of the sum over attributes of sigmoid cross-entropy.
real domain_loss_real(const Tensor& logits, const Tensor& labels);

/// Sum over (fake batch, target label) pairs of domain_loss_real on D's
/// domain head.
real domain_loss_fake(const models::DiscriminatorNet& d,
                      const std::vector<std::pair<Tensor, Tensor>>& fake_pairs);

/// L1(cyc_cross, x) + L1(cyc_same, x); the second term is omitted when
/// cyc_same is null (single-direction mode).
real cycle_loss(const Tensor& x, const Tensor& cyc_cross, const Tensor* cyc_same);

/// 0 unless the target domain equals the source domain, else L1(same_out, x).
real conditional_identity_loss(const Tensor& x, const Tensor& same_out, bool target_is_source);

struct DiscLossParts {
    real critic = 0;       // adversarial + gradient-penalty terms
    real domain_real = 0;  // Eq. (2)
};

struct GenLossParts {
    real adversarial = 0;
    real domain_fake = 0;
    real cycle = 0;
    real identity = 0;
};

real total_discriminator_loss(const DiscLossParts& parts, const LossWeights& w);
real total_generator_loss(const GenLossParts& parts, const LossWeights& w);

// Differentiation helpers shared by the trainer and the gradient checks ------

/// Mean over all elements of |a - b|.
real l1_mean(const Tensor& a, const Tensor& b);

/// d(scale * l1_mean(a, b)) / da.
Tensor l1_mean_backward(const Tensor& a, const Tensor& b, real scale);

/// Numerically stable elementwise BCE-with-logits, summed over attributes and
/// averaged over images (equals domain_loss_real).
real bce_logits(const Tensor& logits, const Tensor& labels);

/// d(scale * bce_logits(logits, labels)) / dlogits = scale * (sigmoid - y) / N.
Tensor bce_logits_backward(const Tensor& logits, const Tensor& labels, real scale);

/// Constant map with value scale / (N * h * w): the seed of
/// d(scale * mean-over-batch of per-image critic means) / d(critic_map).
Tensor critic_mean_seed(const Tensor& critic_map, real scale);

/// Mean over the batch of per-image critic scalars.
real mean_critic_score(const Tensor& critic_map);

}  // namespace fpgan::losses
