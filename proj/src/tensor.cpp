#include "grbert/tensor.hpp"

#include <cmath>

namespace grbert {

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::check_finite(const std::string& what) const {
    if (!all_finite()) throw NumericError("non-finite value in " + what);
}

namespace kernels {

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    if (b.shape()[0] != k || c.shape()[0] != n || c.shape()[1] != m)
        throw ContractError("matmul_acc: shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += a.at(i, t) * b.at(t, j);
            c.at(i, j) += acc;
        }
    }
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[0];
    if (b.shape()[1] != k || c.shape()[0] != n || c.shape()[1] != m)
        throw ContractError("matmul_nt_acc: shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += a.at(i, t) * b.at(j, t);
            c.at(i, j) += acc;
        }
    }
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t k = a.shape()[0], n = a.shape()[1], m = b.shape()[1];
    if (b.shape()[0] != k || c.shape()[0] != n || c.shape()[1] != m)
        throw ContractError("matmul_tn_acc: shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += a.at(t, i) * b.at(t, j);
            c.at(i, j) += acc;
        }
    }
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) throw ContractError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace kernels

}  // namespace grbert
