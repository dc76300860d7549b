#include "kgfuse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kgfuse {

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

namespace {

std::int64_t checked_numel(const Shape& shape) {
    if (shape.empty()) {
        throw DimensionError("tensor shape must have at least one extent");
    }
    std::int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
        }
        n *= e;
    }
    return n;
}

} // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    values_.assign(static_cast<std::size_t>(checked_numel(shape_)), 0.0);
    cols_ = shape_.size() == 2 ? static_cast<std::size_t>(shape_[1]) : 0;
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    std::int64_t n = checked_numel(shape_);
    if (n != static_cast<std::int64_t>(values_.size())) {
        throw DimensionError("value count " + std::to_string(values_.size()) +
                             " does not match shape " + shape_str(shape_));
    }
    cols_ = shape_.size() == 2 ? static_cast<std::size_t>(shape_[1]) : 0;
}

int Tensor::rows() const {
    if (rank() != 2) throw DimensionError("rows() on non-matrix " + shape_str(shape_));
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw DimensionError("cols() on non-matrix " + shape_str(shape_));
    return shape_[1];
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = a.at(i, p);
            if (aip == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                c.at(i, j) += aip * b.at(p, j);
            }
        }
    }
    return c;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw DimensionError("cosine_similarity length mismatch: " + std::to_string(u.size()) +
                             " vs " + std::to_string(v.size()));
    }
    if (u.empty()) {
        throw DimensionError("cosine_similarity on empty vectors");
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
    if (nu < 1e-12 || nv < 1e-12) return 0.0; // degenerate embedding: neutral edge
    double c = dot / (nu * nv);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

Tensor softmax(const Tensor& logits, const std::vector<bool>* mask) {
    if (logits.rank() != 1) {
        throw DimensionError("softmax expects a rank-1 tensor, got " + shape_str(logits.shape()));
    }
    const std::int64_t n = logits.size();
    if (mask && static_cast<std::int64_t>(mask->size()) != n) {
        throw DimensionError("softmax mask length " + std::to_string(mask->size()) +
                             " does not match logits length " + std::to_string(n));
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < n; ++i) {
        if (mask && !(*mask)[static_cast<std::size_t>(i)]) continue;
        max_logit = std::max(max_logit, logits.flat(i));
    }
    if (!std::isfinite(max_logit)) {
        throw ValidationError("softmax: all entries masked (degenerate input)");
    }
    Tensor out({static_cast<int>(n)});
    double denom = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (mask && !(*mask)[static_cast<std::size_t>(i)]) {
            out.flat(i) = 0.0;
            continue;
        }
        out.flat(i) = std::exp(logits.flat(i) - max_logit);
        denom += out.flat(i);
    }
    for (std::int64_t i = 0; i < n; ++i) out.flat(i) /= denom;
    return out;
}

double cross_entropy(const Tensor& probs, int label) {
    if (probs.rank() != 1) {
        throw DimensionError("cross_entropy expects rank-1 probabilities");
    }
    if (label < 0 || label >= static_cast<int>(probs.size())) {
        throw ValidationError("cross_entropy label " + std::to_string(label) +
                              " out of range [0, " + std::to_string(probs.size()) + ")");
    }
    double sum = 0.0;
    for (std::int64_t i = 0; i < probs.size(); ++i) sum += probs.flat(i);
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ValidationError("cross_entropy probabilities sum to " + std::to_string(sum) +
                              ", expected 1");
    }
    double p = probs.flat(label);
    if (p < 1e-12) p = 1e-12;
    return -std::log(p);
}

} // namespace kgfuse
