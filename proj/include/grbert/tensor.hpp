#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "grbert/error.hpp"
#include "grbert/rng.hpp"

namespace grbert {

// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1 and 2 cover
// every use in this project. Values are plain data; gradients live on the
// tape, not here.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_numel(shape_))
            throw ContractError("Tensor: data length does not match shape");
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = rng.normal(0.0, stddev);
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }

    bool is_scalar() const { return shape_.empty(); }
    double scalar_value() const {
        if (numel() != 1) throw ContractError("Tensor: not a scalar");
        return data_[0];
    }

    std::size_t rows() const { return ndim() == 2 ? shape_[0] : (ndim() == 1 ? 1 : 0); }
    std::size_t cols() const {
        if (ndim() == 2) return shape_[1];
        if (ndim() == 1) return shape_[0];
        throw ContractError("Tensor: cols() needs rank 1 or 2");
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool requires_grad() const { return requires_grad_; }
    Tensor& set_requires_grad(bool v) {
        requires_grad_ = v;
        return *this;
    }

    bool all_finite() const;
    // Throws NumericError when any entry is NaN/Inf; `what` names the tensor.
    void check_finite(const std::string& what) const;

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

private:
    static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw ContractError("Tensor: zero extent in shape");
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
};

// Raw (tape-free) kernels shared by forward ops and their backward passes.
// Summation order is fixed row-major left-to-right everywhere.
namespace kernels {

// c += a * b   (a: [n,k], b: [k,m], c: [n,m])
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c);
// c += a * b^T (a: [n,k], b: [m,k], c: [n,m])
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c);
// c += a^T * b (a: [k,n], b: [k,m], c: [n,m])
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c);

double dot(const Tensor& a, const Tensor& b);
double norm(const Tensor& a);

}  // namespace kernels

}  // namespace grbert
