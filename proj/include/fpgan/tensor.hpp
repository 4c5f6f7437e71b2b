#pragma once

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpgan {

/// Scalar type used throughout the library.
using real = double;

/// Dense row-major tensor. Images are (N, C, H, W), label batches (N, d).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        long n = 1;
        for (int d : shape_) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        data_.assign(static_cast<size_t>(n), real(0));
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor full(std::vector<int> shape, real v) {
        Tensor t(std::move(shape));
        t.fill(v);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    long numel() const { return static_cast<long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }

    real& operator[](long i) { return data_[static_cast<size_t>(i)]; }
    real operator[](long i) const { return data_[static_cast<size_t>(i)]; }

    // (N, C, H, W) accessor
    real& operator()(int n, int c, int h, int w) {
        assert(rank() == 4);
        return data_[static_cast<size_t>(((static_cast<long>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    real operator()(int n, int c, int h, int w) const {
        return const_cast<Tensor&>(*this)(n, c, h, w);
    }

    // (N, d) accessor
    real& operator()(int i, int j) {
        assert(rank() == 2);
        return data_[static_cast<size_t>(static_cast<long>(i) * shape_[1] + j)];
    }
    real operator()(int i, int j) const { return const_cast<Tensor&>(*this)(i, j); }

    void fill(real v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(real(0)); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void add_(const Tensor& o, real scale = real(1)) {
        assert(same_shape(o));
        for (long i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += scale * o[i];
    }

    void scale_(real s) {
        for (real& v : data_) v *= s;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    std::vector<int> shape_;
    std::vector<real> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace fpgan
