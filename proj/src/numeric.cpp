#include "grbert/numeric.hpp"

#include <algorithm>
#include <cmath>

#include "grbert/error.hpp"

namespace grbert {

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw ContractError("softmax: empty input");
    double mx = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
        mx = std::max(mx, v);
    }
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

double log_sum_exp(std::span<const double> logits) {
    if (logits.empty()) throw ContractError("log_sum_exp: empty input");
    double mx = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericError("log_sum_exp: non-finite logit");
        mx = std::max(mx, v);
    }
    double acc = 0.0;
    for (double v : logits) acc += std::exp(v - mx);
    return mx + std::log(acc);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractError("cosine_similarity: length mismatch");
    if (a.empty()) throw ContractError("cosine_similarity: empty input");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw DegenerateInputError("cosine_similarity: zero-norm vector");
    const double c = ab / (std::sqrt(aa) * std::sqrt(bb));
    return std::clamp(c, -1.0, 1.0);
}

double mean(std::span<const double> v) {
    if (v.empty()) throw ContractError("mean: empty input");
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ContractError("total_variation: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

}  // namespace grbert
