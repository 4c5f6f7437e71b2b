#pragma once

#include <memory>
#include <vector>

#include "fpgan/rng.hpp"
#include "fpgan/tensor.hpp"

namespace fpgan::nn {

/// Per-call activation cache produced by forward and consumed by backward.
/// Composite layers keep one child frame per sublayer.
struct Frame {
    std::vector<Tensor> saved;
    std::vector<Frame> children;
};

class Layer {
public:
    virtual ~Layer() = default;

    /// Runs the layer on x, recording whatever backward will need into f.
    virtual Tensor forward(const Tensor& x, Frame& f) const = 0;

    /// Returns the gradient w.r.t. the layer input. Parameter gradients are
    /// accumulated (+=) into the layer's grad buffers when accum_params.
    virtual Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) = 0;

    virtual void collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) {}
    virtual void init(Rng& rng) {}
};

class Conv2d : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, bool bias);

    Tensor forward(const Tensor& x, Frame& f) const override;
    Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) override;
    void collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) override;
    void init(Rng& rng) override;

    // Stateless building blocks, also used by the gradient-penalty pass.
    Tensor apply(const Tensor& x, bool use_bias = true) const;
    Tensor grad_input(const Tensor& gy, int in_h, int in_w) const;
    void accum_grad_params(const Tensor& x, const Tensor& gy, bool include_bias = true);

    int out_size(int in) const { return (in + 2 * pad_ - ksize_) / stride_ + 1; }
    long param_count() const { return weight.numel() + bias.numel(); }

    int in_ch() const { return in_ch_; }
    int out_ch() const { return out_ch_; }

    Tensor weight;  // (out_ch, in_ch, k, k)
    Tensor bias;    // (out_ch) or empty
    Tensor grad_weight;
    Tensor grad_bias;

private:
    int in_ch_, out_ch_, ksize_, stride_, pad_;
    bool has_bias_;
};

class ConvTranspose2d : public Layer {
public:
    ConvTranspose2d(int in_ch, int out_ch, int ksize, int stride, int pad, bool bias);

    Tensor forward(const Tensor& x, Frame& f) const override;
    Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) override;
    void collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) override;
    void init(Rng& rng) override;

    int out_size(int in) const { return (in - 1) * stride_ + ksize_ - 2 * pad_; }

    Tensor weight;  // (in_ch, out_ch, k, k)
    Tensor bias;
    Tensor grad_weight;
    Tensor grad_bias;

private:
    int in_ch_, out_ch_, ksize_, stride_, pad_;
    bool has_bias_;
};

/// Per-sample, per-channel normalization with learned affine parameters.
class InstanceNorm2d : public Layer {
public:
    explicit InstanceNorm2d(int channels, real eps = 1e-5);

    Tensor forward(const Tensor& x, Frame& f) const override;
    Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) override;
    void collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) override;
    void init(Rng& rng) override;

    Tensor weight;  // gamma (C)
    Tensor bias;    // beta (C)
    Tensor grad_weight;
    Tensor grad_bias;

private:
    int channels_;
    real eps_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, Frame& f) const override;
    Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) override;
};

class LeakyReLU : public Layer {
public:
    explicit LeakyReLU(real alpha) : alpha_(alpha) {}
    Tensor forward(const Tensor& x, Frame& f) const override;
    Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) override;

private:
    real alpha_;
};

class Tanh : public Layer {
public:
    Tensor forward(const Tensor& x, Frame& f) const override;
    Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) override;
};

class Sequential : public Layer {
public:
    Sequential() = default;

    template <class L, class... Args>
    L& emplace(Args&&... args) {
        auto p = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *p;
        layers.push_back(std::move(p));
        return ref;
    }

    Tensor forward(const Tensor& x, Frame& f) const override;
    Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) override;
    void collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) override;
    void init(Rng& rng) override;

    std::vector<std::unique_ptr<Layer>> layers;
};

/// Two 3x3 convolutions with instance norm, added back onto the input.
class ResidualBlock : public Layer {
public:
    explicit ResidualBlock(int channels);

    Tensor forward(const Tensor& x, Frame& f) const override;
    Tensor backward(const Frame& f, const Tensor& gy, bool accum_params) override;
    void collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) override;
    void init(Rng& rng) override;

private:
    Sequential branch_;
};

}  // namespace fpgan::nn
