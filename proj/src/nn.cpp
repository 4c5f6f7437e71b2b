#include "fpgan/nn.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace fpgan::nn {

using RowMat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

namespace {

// Patch matrix layout: K = C*k*k rows, OH*OW columns, row-major.
void im2col(const real* x, int C, int H, int W, int k, int stride, int pad, int OH, int OW, real* cols) {
    const long ncols = static_cast<long>(OH) * OW;
    for (int c = 0; c < C; ++c) {
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                real* row = cols + (static_cast<long>(c) * k * k + kh * k + kw) * ncols;
                const real* src = x + static_cast<long>(c) * H * W;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) {
                        for (int ow = 0; ow < OW; ++ow) row[oh * OW + ow] = real(0);
                        continue;
                    }
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        row[oh * OW + ow] = (iw >= 0 && iw < W) ? src[ih * W + iw] : real(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds patch columns back into the image.
void col2im(const real* cols, int C, int H, int W, int k, int stride, int pad, int OH, int OW, real* x) {
    const long ncols = static_cast<long>(OH) * OW;
    for (int c = 0; c < C; ++c) {
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                const real* row = cols + (static_cast<long>(c) * k * k + kh * k + kw) * ncols;
                real* dst = x + static_cast<long>(c) * H * W;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        if (iw >= 0 && iw < W) dst[ih * W + iw] += row[oh * OW + ow];
                    }
                }
            }
        }
    }
}

void check_channels(const Tensor& x, int expect, const char* where) {
    if (x.rank() != 4 || x.dim(1) != expect)
        throw std::invalid_argument(std::string(where) + ": expected (N," + std::to_string(expect) +
                                    ",H,W) input, got " + x.shape_str());
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, bool bias)
    : weight({out_ch, in_ch, ksize, ksize}),
      grad_weight({out_ch, in_ch, ksize, ksize}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      ksize_(ksize),
      stride_(stride),
      pad_(pad),
      has_bias_(bias) {
    if (bias) {
        this->bias = Tensor({out_ch});
        grad_bias = Tensor({out_ch});
    }
}

void Conv2d::init(Rng& rng) {
    const real std = std::sqrt(real(2) / (static_cast<real>(in_ch_) * ksize_ * ksize_));
    rng.fill_normal(weight, 0, std);
    if (has_bias_) bias.zero();
}

Tensor Conv2d::apply(const Tensor& x, bool use_bias) const {
    check_channels(x, in_ch_, "Conv2d");
    const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int OH = out_size(H), OW = out_size(W);
    if (OH < 1 || OW < 1) throw std::invalid_argument("Conv2d: input too small for kernel");
    const long K = static_cast<long>(in_ch_) * ksize_ * ksize_;
    const long ncols = static_cast<long>(OH) * OW;

    Tensor y({N, out_ch_, OH, OW});
    std::vector<real> cols(static_cast<size_t>(K * ncols));
    ConstMapMat w_mat(weight.data(), out_ch_, K);
    for (int n = 0; n < N; ++n) {
        im2col(x.data() + static_cast<long>(n) * in_ch_ * H * W, in_ch_, H, W, ksize_, stride_, pad_, OH, OW,
               cols.data());
        ConstMapMat c_mat(cols.data(), K, ncols);
        MapMat y_mat(y.data() + static_cast<long>(n) * out_ch_ * ncols, out_ch_, ncols);
        y_mat.noalias() = w_mat * c_mat;
        if (has_bias_ && use_bias)
            for (int co = 0; co < out_ch_; ++co) y_mat.row(co).array() += bias[co];
    }
    return y;
}

Tensor Conv2d::grad_input(const Tensor& gy, int in_h, int in_w) const {
    const int N = gy.dim(0), OH = gy.dim(2), OW = gy.dim(3);
    const long K = static_cast<long>(in_ch_) * ksize_ * ksize_;
    const long ncols = static_cast<long>(OH) * OW;

    Tensor gx({N, in_ch_, in_h, in_w});
    std::vector<real> cols(static_cast<size_t>(K * ncols));
    ConstMapMat w_mat(weight.data(), out_ch_, K);
    for (int n = 0; n < N; ++n) {
        ConstMapMat gy_mat(gy.data() + static_cast<long>(n) * out_ch_ * ncols, out_ch_, ncols);
        MapMat c_mat(cols.data(), K, ncols);
        c_mat.noalias() = w_mat.transpose() * gy_mat;
        col2im(cols.data(), in_ch_, in_h, in_w, ksize_, stride_, pad_, OH, OW,
               gx.data() + static_cast<long>(n) * in_ch_ * in_h * in_w);
    }
    return gx;
}

void Conv2d::accum_grad_params(const Tensor& x, const Tensor& gy, bool include_bias) {
    const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int OH = gy.dim(2), OW = gy.dim(3);
    const long K = static_cast<long>(in_ch_) * ksize_ * ksize_;
    const long ncols = static_cast<long>(OH) * OW;

    std::vector<real> cols(static_cast<size_t>(K * ncols));
    MapMat gw_mat(grad_weight.data(), out_ch_, K);
    for (int n = 0; n < N; ++n) {
        im2col(x.data() + static_cast<long>(n) * in_ch_ * H * W, in_ch_, H, W, ksize_, stride_, pad_, OH, OW,
               cols.data());
        ConstMapMat c_mat(cols.data(), K, ncols);
        ConstMapMat gy_mat(gy.data() + static_cast<long>(n) * out_ch_ * ncols, out_ch_, ncols);
        gw_mat.noalias() += gy_mat * c_mat.transpose();
        if (has_bias_ && include_bias)
            for (int co = 0; co < out_ch_; ++co) grad_bias[co] += gy_mat.row(co).sum();
    }
}

Tensor Conv2d::forward(const Tensor& x, Frame& f) const {
    f.saved = {x};
    return apply(x);
}

Tensor Conv2d::backward(const Frame& f, const Tensor& gy, bool accum_params) {
    const Tensor& x = f.saved[0];
    if (accum_params) accum_grad_params(x, gy);
    return grad_input(gy, x.dim(2), x.dim(3));
}

void Conv2d::collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) {
    ps.push_back(&weight);
    gs.push_back(&grad_weight);
    if (has_bias_) {
        ps.push_back(&bias);
        gs.push_back(&grad_bias);
    }
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int ksize, int stride, int pad, bool bias)
    : weight({in_ch, out_ch, ksize, ksize}),
      grad_weight({in_ch, out_ch, ksize, ksize}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      ksize_(ksize),
      stride_(stride),
      pad_(pad),
      has_bias_(bias) {
    if (bias) {
        this->bias = Tensor({out_ch});
        grad_bias = Tensor({out_ch});
    }
}

void ConvTranspose2d::init(Rng& rng) {
    const real std = std::sqrt(real(2) / (static_cast<real>(in_ch_) * ksize_ * ksize_));
    rng.fill_normal(weight, 0, std);
    if (has_bias_) bias.zero();
}

Tensor ConvTranspose2d::forward(const Tensor& x, Frame& f) const {
    check_channels(x, in_ch_, "ConvTranspose2d");
    f.saved = {x};
    const int N = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int OH = out_size(h), OW = out_size(w);
    const long K = static_cast<long>(out_ch_) * ksize_ * ksize_;
    const long ncols = static_cast<long>(h) * w;

    Tensor y({N, out_ch_, OH, OW});
    std::vector<real> cols(static_cast<size_t>(K * ncols));
    ConstMapMat w_mat(weight.data(), in_ch_, K);
    for (int n = 0; n < N; ++n) {
        ConstMapMat x_mat(x.data() + static_cast<long>(n) * in_ch_ * ncols, in_ch_, ncols);
        MapMat c_mat(cols.data(), K, ncols);
        c_mat.noalias() = w_mat.transpose() * x_mat;
        col2im(cols.data(), out_ch_, OH, OW, ksize_, stride_, pad_, h, w,
               y.data() + static_cast<long>(n) * out_ch_ * OH * OW);
    }
    if (has_bias_) {
        for (int n = 0; n < N; ++n)
            for (int co = 0; co < out_ch_; ++co) {
                real* p = y.data() + (static_cast<long>(n) * out_ch_ + co) * OH * OW;
                for (long i = 0; i < static_cast<long>(OH) * OW; ++i) p[i] += bias[co];
            }
    }
    return y;
}

Tensor ConvTranspose2d::backward(const Frame& f, const Tensor& gy, bool accum_params) {
    const Tensor& x = f.saved[0];
    const int N = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int OH = gy.dim(2), OW = gy.dim(3);
    const long K = static_cast<long>(out_ch_) * ksize_ * ksize_;
    const long ncols = static_cast<long>(h) * w;

    Tensor gx({N, in_ch_, h, w});
    std::vector<real> cols(static_cast<size_t>(K * ncols));
    ConstMapMat w_mat(weight.data(), in_ch_, K);
    MapMat gw_mat(grad_weight.data(), in_ch_, K);
    for (int n = 0; n < N; ++n) {
        im2col(gy.data() + static_cast<long>(n) * out_ch_ * OH * OW, out_ch_, OH, OW, ksize_, stride_, pad_, h, w,
               cols.data());
        ConstMapMat c_mat(cols.data(), K, ncols);
        MapMat gx_mat(gx.data() + static_cast<long>(n) * in_ch_ * ncols, in_ch_, ncols);
        gx_mat.noalias() = w_mat * c_mat;
        if (accum_params) {
            ConstMapMat x_mat(x.data() + static_cast<long>(n) * in_ch_ * ncols, in_ch_, ncols);
            gw_mat.noalias() += x_mat * c_mat.transpose();
        }
    }
    if (accum_params && has_bias_) {
        for (int n = 0; n < N; ++n)
            for (int co = 0; co < out_ch_; ++co) {
                const real* p = gy.data() + (static_cast<long>(n) * out_ch_ + co) * OH * OW;
                real s = 0;
                for (long i = 0; i < static_cast<long>(OH) * OW; ++i) s += p[i];
                grad_bias[co] += s;
            }
    }
    return gx;
}

void ConvTranspose2d::collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) {
    ps.push_back(&weight);
    gs.push_back(&grad_weight);
    if (has_bias_) {
        ps.push_back(&bias);
        gs.push_back(&grad_bias);
    }
}

// ---------------------------------------------------------------------------
// InstanceNorm2d

InstanceNorm2d::InstanceNorm2d(int channels, real eps)
    : weight({channels}), bias({channels}), grad_weight({channels}), grad_bias({channels}),
      channels_(channels), eps_(eps) {
    weight.fill(real(1));
}

void InstanceNorm2d::init(Rng&) {
    weight.fill(real(1));
    bias.zero();
}

Tensor InstanceNorm2d::forward(const Tensor& x, Frame& f) const {
    check_channels(x, channels_, "InstanceNorm2d");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const long S = static_cast<long>(H) * W;

    Tensor xhat(x.shape());
    Tensor istd({N, C});
    Tensor y(x.shape());
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const real* px = x.data() + (static_cast<long>(n) * C + c) * S;
            real mean = 0;
            for (long i = 0; i < S; ++i) mean += px[i];
            mean /= static_cast<real>(S);
            real var = 0;
            for (long i = 0; i < S; ++i) {
                const real d = px[i] - mean;
                var += d * d;
            }
            var /= static_cast<real>(S);
            const real is = real(1) / std::sqrt(var + eps_);
            istd(n, c) = is;
            real* ph = xhat.data() + (static_cast<long>(n) * C + c) * S;
            real* py = y.data() + (static_cast<long>(n) * C + c) * S;
            const real g = weight[c], b = bias[c];
            for (long i = 0; i < S; ++i) {
                ph[i] = (px[i] - mean) * is;
                py[i] = g * ph[i] + b;
            }
        }
    }
    f.saved = {std::move(xhat), std::move(istd)};
    return y;
}

Tensor InstanceNorm2d::backward(const Frame& f, const Tensor& gy, bool accum_params) {
    const Tensor& xhat = f.saved[0];
    const Tensor& istd = f.saved[1];
    const int N = gy.dim(0), C = gy.dim(1), H = gy.dim(2), W = gy.dim(3);
    const long S = static_cast<long>(H) * W;

    Tensor gx(gy.shape());
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const real* pg = gy.data() + (static_cast<long>(n) * C + c) * S;
            const real* ph = xhat.data() + (static_cast<long>(n) * C + c) * S;
            real* pgx = gx.data() + (static_cast<long>(n) * C + c) * S;
            const real g = weight[c];
            real sum_g = 0, sum_gh = 0;
            for (long i = 0; i < S; ++i) {
                sum_g += pg[i];
                sum_gh += pg[i] * ph[i];
            }
            if (accum_params) {
                grad_weight[c] += sum_gh;
                grad_bias[c] += sum_g;
            }
            const real mean_g = sum_g / static_cast<real>(S);
            const real mean_gh = sum_gh / static_cast<real>(S);
            const real is = istd(n, c);
            for (long i = 0; i < S; ++i)
                pgx[i] = g * is * (pg[i] - mean_g - ph[i] * mean_gh);
        }
    }
    return gx;
}

void InstanceNorm2d::collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) {
    ps.push_back(&weight);
    gs.push_back(&grad_weight);
    ps.push_back(&bias);
    gs.push_back(&grad_bias);
}

// ---------------------------------------------------------------------------
// Activations

Tensor ReLU::forward(const Tensor& x, Frame& f) const {
    f.saved = {x};
    Tensor y(x.shape());
    for (long i = 0; i < x.numel(); ++i) y[i] = x[i] > 0 ? x[i] : real(0);
    return y;
}

Tensor ReLU::backward(const Frame& f, const Tensor& gy, bool) {
    const Tensor& x = f.saved[0];
    Tensor gx(gy.shape());
    for (long i = 0; i < gy.numel(); ++i) gx[i] = x[i] > 0 ? gy[i] : real(0);
    return gx;
}

Tensor LeakyReLU::forward(const Tensor& x, Frame& f) const {
    f.saved = {x};
    Tensor y(x.shape());
    for (long i = 0; i < x.numel(); ++i) y[i] = x[i] > 0 ? x[i] : alpha_ * x[i];
    return y;
}

Tensor LeakyReLU::backward(const Frame& f, const Tensor& gy, bool) {
    const Tensor& x = f.saved[0];
    Tensor gx(gy.shape());
    for (long i = 0; i < gy.numel(); ++i) gx[i] = x[i] > 0 ? gy[i] : alpha_ * gy[i];
    return gx;
}

Tensor Tanh::forward(const Tensor& x, Frame& f) const {
    Tensor y(x.shape());
    for (long i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    f.saved = {y};
    return y;
}

Tensor Tanh::backward(const Frame& f, const Tensor& gy, bool) {
    const Tensor& y = f.saved[0];
    Tensor gx(gy.shape());
    for (long i = 0; i < gy.numel(); ++i) gx[i] = gy[i] * (real(1) - y[i] * y[i]);
    return gx;
}

// ---------------------------------------------------------------------------
// Sequential / ResidualBlock

Tensor Sequential::forward(const Tensor& x, Frame& f) const {
    f.children.resize(layers.size());
    Tensor h = x;
    for (size_t i = 0; i < layers.size(); ++i) h = layers[i]->forward(h, f.children[i]);
    return h;
}

Tensor Sequential::backward(const Frame& f, const Tensor& gy, bool accum_params) {
    Tensor g = gy;
    for (size_t i = layers.size(); i-- > 0;) g = layers[i]->backward(f.children[i], g, accum_params);
    return g;
}

void Sequential::collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) {
    for (auto& l : layers) l->collect_params(ps, gs);
}

void Sequential::init(Rng& rng) {
    for (auto& l : layers) l->init(rng);
}

ResidualBlock::ResidualBlock(int channels) {
    branch_.emplace<Conv2d>(channels, channels, 3, 1, 1, false);
    branch_.emplace<InstanceNorm2d>(channels);
    branch_.emplace<ReLU>();
    branch_.emplace<Conv2d>(channels, channels, 3, 1, 1, false);
    branch_.emplace<InstanceNorm2d>(channels);
}

Tensor ResidualBlock::forward(const Tensor& x, Frame& f) const {
    f.children.resize(1);
    Tensor y = branch_.forward(x, f.children[0]);
    y.add_(x);
    return y;
}

Tensor ResidualBlock::backward(const Frame& f, const Tensor& gy, bool accum_params) {
    Tensor gx = branch_.backward(f.children[0], gy, accum_params);
    gx.add_(gy);
    return gx;
}

void ResidualBlock::collect_params(std::vector<Tensor*>& ps, std::vector<Tensor*>& gs) {
    branch_.collect_params(ps, gs);
}

void ResidualBlock::init(Rng& rng) { branch_.init(rng); }

}  // namespace fpgan::nn
