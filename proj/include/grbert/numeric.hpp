#pragma once

#include <span>
#include <vector>

namespace grbert {

// Numerically stable softmax via max-subtraction. Output sums to 1 within
// 1e-12 for any finite input. Throws NumericError on non-finite entries and
// ContractError on empty input.
std::vector<double> softmax(std::span<const double> logits);

// log(sum(exp(x))) with max-subtraction.
double log_sum_exp(std::span<const double> logits);

// Cosine similarity in [-1, 1]. Throws DegenerateInputError when either
// vector has zero norm, ContractError on length mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> v);
double variance(std::span<const double> v);  // population variance
double stddev(std::span<const double> v);

// Total-variation distance 0.5 * sum |p - q| between equal-length vectors.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace grbert
