#ifndef OQA_COMMON_HPP
#define OQA_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace oqa {

// Bad or inconsistent input data (malformed JSONL, duplicate ids, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite objectives, degenerate optimization states.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

// log(sigmoid(x)) = -softplus(-x)
inline double log_sigmoid(double x) { return -softplus(-x); }

inline double logsumexp2(double a, double b) {
    const double m = std::max(a, b);
    if (std::isinf(m) && m < 0) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Guard for log arguments; probabilities are clipped to [kProbEps, 1-kProbEps].
inline constexpr double kProbEps = 1e-12;

inline double clip_prob(double p) {
    return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

// Sparse nonnegative vector with strictly increasing indices. Backs the
// unigram feature vectors f_q, f_a, f_r; all are L2-normalized when non-empty.
struct FeatureVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> weights;

    bool empty() const { return indices.empty(); }
    std::size_t size() const { return indices.size(); }

    double norm() const {
        double s = 0.0;
        for (double w : weights) s += w * w;
        return std::sqrt(s);
    }
};

// <dense, sparse>
inline double dot(std::span<const double> dense, const FeatureVector& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < v.indices.size(); ++k) s += dense[v.indices[k]] * v.weights[k];
    return s;
}

// dense[i] += scale * v[i]
inline void add_scaled(std::span<double> dense, const FeatureVector& v, double scale) {
    for (std::size_t k = 0; k < v.indices.size(); ++k) dense[v.indices[k]] += scale * v.weights[k];
}

// Elementwise product of two sparse vectors (index intersection).
inline FeatureVector hadamard(const FeatureVector& a, const FeatureVector& b) {
    FeatureVector out;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] < b.indices[j]) {
            ++i;
        } else if (a.indices[i] > b.indices[j]) {
            ++j;
        } else {
            out.indices.push_back(a.indices[i]);
            out.weights.push_back(a.weights[i] * b.weights[j]);
            ++i;
            ++j;
        }
    }
    return out;
}

inline double dot(const FeatureVector& a, const FeatureVector& b) {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] < b.indices[j]) ++i;
        else if (a.indices[i] > b.indices[j]) ++j;
        else { s += a.weights[i] * b.weights[j]; ++i; ++j; }
    }
    return s;
}

// FNV-1a; used for reproducible train/test splits keyed on question ids.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace oqa

#endif // OQA_COMMON_HPP
