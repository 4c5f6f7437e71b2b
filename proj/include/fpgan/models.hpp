#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fpgan/nn.hpp"
#include "fpgan/tensor.hpp"

namespace fpgan::models {

struct ArchConfig {
    int image_size = 64;
    int image_channels = 1;
    int domain_dim = 1;
    int base_width = 64;
    int n_residual_blocks = 6;
    int n_disc_layers = 0;  // 0 = derive as log2(image_size) - 1

    int disc_layers() const;
    void validate() const;  // throws std::invalid_argument
};

/// Residual encoder-decoder with the domain vector tiled into constant input
/// planes. The raw head output is a delta map; the translation is
/// tanh(delta + x) when the delta head is enabled, tanh(delta) otherwise.
class GeneratorNet {
public:
    GeneratorNet(const ArchConfig& arch, uint64_t seed, bool delta_head = true);

    struct Trace {
        nn::Frame body;
        Tensor input;
        Tensor output;
    };

    Tensor delta(const Tensor& x, const Tensor& labels) const;
    Tensor translate(const Tensor& x, const Tensor& labels) const;
    Tensor translate_traced(const Tensor& x, const Tensor& labels, Trace& t) const;

    /// Gradient w.r.t. the input image; parameter gradients accumulate into
    /// the layer grad buffers when accum_params.
    Tensor backward(const Trace& t, const Tensor& g_out, bool accum_params = true);

    std::vector<Tensor*> parameters();
    std::vector<Tensor*> gradients();
    void zero_grads();
    long parameter_count() const;

    const ArchConfig& arch() const { return arch_; }
    bool delta_head() const { return delta_head_; }

private:
    void check_inputs(const Tensor& x, const Tensor& labels) const;

    ArchConfig arch_;
    bool delta_head_;
    nn::Sequential body_;
};

/// PatchGAN-style critic plus a per-attribute domain classification head.
/// No normalization anywhere; leaky rectification between convolutions.
class DiscriminatorNet {
public:
    DiscriminatorNet(const ArchConfig& arch, uint64_t seed);

    struct Out {
        Tensor critic_map;     // (N, 1, hs, ws)
        Tensor domain_logits;  // (N, d)
    };

    struct Trace {
        std::vector<Tensor> layer_in;   // z_0 .. z_{L-1}: inputs to each body conv
        std::vector<Tensor> preact;     // a_1 .. a_L: pre-activation of each body conv
        Tensor features;                // z_L: input to the heads
    };

    Out forward(const Tensor& x) const;
    Out forward_traced(const Tensor& x, Trace& t) const;

    /// Either gradient seed may be null. Returns the gradient w.r.t. x.
    Tensor backward(const Trace& t, const Tensor* g_critic_map, const Tensor* g_domain_logits,
                    bool accum_params);

    /// Mean of (||grad_x critic_score||_2 - 1)^2 over the batch.
    real gradient_penalty_value(const Tensor& x_hat) const;

    /// Same value, and additionally accumulates scale * d(penalty)/d(params).
    real gradient_penalty_and_grads(const Tensor& x_hat, real scale);

    /// Per-image critic scalar: mean over the critic score map.
    static Tensor critic_scores(const Tensor& critic_map);

    std::vector<Tensor*> parameters();
    std::vector<Tensor*> gradients();
    void zero_grads();
    long parameter_count() const;

    const ArchConfig& arch() const { return arch_; }

private:
    void check_input(const Tensor& x) const;
    Tensor input_gradient(const Trace& t, const Tensor& g_critic_map) const;

    ArchConfig arch_;
    real lrelu_alpha_ = 0.01;
    std::vector<nn::Conv2d> convs_;
    nn::Conv2d critic_head_;
    nn::Conv2d domain_head_;
};

// Spec surface -------------------------------------------------------------

GeneratorNet build_generator(const ArchConfig& arch, uint64_t seed, bool delta_head = true);
DiscriminatorNet build_discriminator(const ArchConfig& arch, uint64_t seed);

inline Tensor translate(const GeneratorNet& g, const Tensor& x, const Tensor& labels) {
    return g.translate(x, labels);
}

inline Tensor delta_map(const GeneratorNet& g, const Tensor& x, const Tensor& labels) {
    return g.delta(x, labels);
}

/// (per-image critic scalars (N), domain logits (N, d))
std::pair<Tensor, Tensor> discriminate(const DiscriminatorNet& d, const Tensor& x);

/// Tiles each label bit into a constant spatial plane appended to x.
Tensor concat_label_planes(const Tensor& x, const Tensor& labels);

/// FNV-1a over the raw parameter bytes, for reproducibility checks.
uint64_t parameter_digest(const std::vector<const Tensor*>& params);
uint64_t parameter_digest(GeneratorNet& g, DiscriminatorNet& d);

}  // namespace fpgan::models
