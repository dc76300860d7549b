#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgfuse/errors.hpp"

namespace kgfuse {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);

/// Dense row-major double tensor. Ranks 1 and 2 cover everything in this
/// project; extents are always positive.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor matrix(int rows, int cols, std::vector<double> values) {
        return Tensor({rows, cols}, std::move(values));
    }
    static Tensor vector(std::vector<double> values) {
        const int n = static_cast<int>(values.size());
        return Tensor({n}, std::move(values));
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
    bool empty() const { return values_.empty(); }

    int rows() const;
    int cols() const;

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    double& flat(std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
    double flat(std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }

    // rank-2 access
    double& at(int i, int j) { return values_[static_cast<std::size_t>(i) * cols_ + j]; }
    double at(int i, int j) const { return values_[static_cast<std::size_t>(i) * cols_ + j]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    /// Exact element-by-element equality (shapes and bits).
    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    Shape shape_;
    std::vector<double> values_;
    std::size_t cols_ = 0; // cached for rank-2 access
};

/// Plain (non-recording) numeric helpers shared by the tape and the graph
/// builder.

/// Standard matrix product; throws DimensionError naming both shapes on
/// mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cosine similarity of two equal-length vectors, clamped to [-1, 1].
/// Returns 0 when either norm is below 1e-12.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Numerically stable softmax of a rank-1 tensor. Masked entries (mask value
/// false) are exactly 0 in the output; unmasked entries sum to 1.
Tensor softmax(const Tensor& logits, const std::vector<bool>* mask = nullptr);

/// -ln(max(probs[label], 1e-12)). probs must sum to 1 within 1e-6.
double cross_entropy(const Tensor& probs, int label);

} // namespace kgfuse
