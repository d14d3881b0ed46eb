#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace senslab {

/// Shaped numeric array, row-major, 64-bit floats. The universal value
/// carrier: inputs, weights, activations, gradients.
///
/// Construction rejects shape/data length mismatches and non-finite
/// values. Code that mutates entries afterwards (optimizers, attack
/// loops) is responsible for keeping them finite; `is_finite()` checks.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw std::invalid_argument("Tensor: shape/data length mismatch");
        for (double v : data_)
            if (!std::isfinite(v))
                throw std::invalid_argument("Tensor: non-finite value on construction");
    }

    static Tensor row(std::vector<double> values) {
        std::size_t n = values.size();
        return Tensor({n}, std::move(values));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols) {
        return Tensor({rows, cols});
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }

    std::size_t rows() const { return dim(0); }
    std::size_t cols() const { return dim(1); }

    std::size_t dim(std::size_t i) const {
        if (i >= shape_.size()) throw std::out_of_range("Tensor: dim index");
        return shape_[i];
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) {
        return data_[r * cols() + c];
    }
    double at(std::size_t r, std::size_t c) const {
        return data_[r * cols() + c];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool is_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool operator==(const Tensor& o) const {
        return shape_ == o.shape_ && data_ == o.data_;
    }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<>());
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline double l2_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return std::sqrt(s);
}

inline double linf_norm(const Tensor& t) {
    double m = 0.0;
    for (double v : t.data()) m = std::max(m, std::abs(v));
    return m;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("Tensor: shape mismatch in subtraction");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

} // namespace senslab
