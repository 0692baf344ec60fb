#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semtext/error.hpp"

namespace semtext {

/// Norms below this mark a vector that cannot be compared by angle.
inline constexpr double kZeroNormThreshold = 1e-12;

namespace detail {

// Left-to-right accumulation in the widest floating type keeps results reproducible.
inline long double dot_wide(std::span<const double> a, std::span<const double> b) noexcept {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<long double>(a[i]) * static_cast<long double>(b[i]);
    }
    return acc;
}

} // namespace detail

/// A fixed-dimension text embedding with the identity of the model that produced it.
///
/// Values are immutable after construction; `norm()` is the Euclidean length
/// measured at creation, or the pre-normalization length for vectors returned by
/// `normalize`.
class Embedding {
public:
    Embedding() = default;

    explicit Embedding(std::vector<double> values, std::string model_id = {})
        : values_(std::move(values)), model_id_(std::move(model_id)) {
        validate();
        norm_ = static_cast<double>(std::sqrt(detail::dot_wide(values_, values_)));
    }

    Embedding(std::vector<double> values, std::string model_id, double recorded_norm)
        : values_(std::move(values)), model_id_(std::move(model_id)), norm_(recorded_norm) {
        validate();
        if (!(recorded_norm >= 0.0) || !std::isfinite(recorded_norm)) {
            fail(ErrorCode::InvalidArgument, "embedding norm must be finite and nonnegative");
        }
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }
    const std::string& model_id() const noexcept { return model_id_; }
    double norm() const noexcept { return norm_; }

    double operator[](std::size_t i) const noexcept { return values_[i]; }

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    void validate() const {
        if (values_.empty()) {
            fail(ErrorCode::InvalidArgument, "embedding must have at least one dimension");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) {
                fail(ErrorCode::InvalidArgument, "embedding contains a non-finite value");
            }
        }
    }

    std::vector<double> values_;
    std::string model_id_;
    double norm_ = 0.0;
};

/// One entry of a ranked answer; rank 1 is the best match.
template <class Id>
struct BasicSimilarityResult {
    Id item_id{};
    double score = 0.0;
    std::size_t rank = 0;

    friend bool operator==(const BasicSimilarityResult&, const BasicSimilarityResult&) = default;
};

/// Sorts by descending score with ascending id as the tie-break, then assigns ranks 1..n.
template <class Id>
void assign_ranks(std::vector<BasicSimilarityResult<Id>>& results) {
    std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
    for (std::size_t i = 0; i < results.size(); ++i) {
        results[i].rank = i + 1;
    }
}

inline double clamp_unit(double x) noexcept { return std::clamp(x, -1.0, 1.0); }

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorCode::DimensionMismatch,
             "cannot compare dim " + std::to_string(a.size()) + " with dim " + std::to_string(b.size()));
    }
    const long double aa = detail::dot_wide(a, a);
    const long double bb = detail::dot_wide(b, b);
    if (std::sqrt(aa) < kZeroNormThreshold || std::sqrt(bb) < kZeroNormThreshold) {
        fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector is undefined");
    }
    // sqrt(aa*bb) rather than sqrt(aa)*sqrt(bb): for a == b this is exactly aa, so cos(v, v) == 1.
    const long double cos = detail::dot_wide(a, b) / std::sqrt(aa * bb);
    return clamp_unit(static_cast<double>(cos));
}

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
    return cosine_similarity(a.values(), b.values());
}

/// Unit-length copy; the original length is kept in `norm()`.
inline Embedding normalize(const Embedding& a) {
    const long double sq = detail::dot_wide(a.values(), a.values());
    const long double len = std::sqrt(sq);
    if (len < kZeroNormThreshold) {
        fail(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    }
    std::vector<double> out(a.dim());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<double>(static_cast<long double>(a[i]) / len);
    }
    return Embedding(std::move(out), a.model_id(), static_cast<double>(len));
}

/// Pairwise cosine similarities. Entry (i, j) is exactly `cosine_similarity(items[i], items[j])`.
inline std::vector<std::vector<double>> similarity_matrix(std::span<const Embedding> items) {
    if (items.empty()) {
        fail(ErrorCode::EmptyInput, "similarity matrix needs at least one item");
    }
    const std::size_t n = items.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double s = cosine_similarity(items[i], items[j]);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    return m;
}

} // namespace semtext
