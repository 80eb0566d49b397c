#pragma once

#include <string>
#include <utility>
#include <vector>

#include "grbert/tensor.hpp"

namespace grbert {

// Ordered collection of named parameter tensors. Order is creation order and
// is part of the training determinism contract.
class ParamSet {
public:
    void add(std::string name, Tensor t) {
        if (has(name)) throw ContractError("ParamSet: duplicate name " + name);
        items_.emplace_back(std::move(name), std::move(t));
    }

    bool has(const std::string& name) const {
        for (const auto& [n, t] : items_)
            if (n == name) return true;
        return false;
    }

    Tensor& at(const std::string& name) {
        for (auto& [n, t] : items_)
            if (n == name) return t;
        throw ContractError("ParamSet: unknown name " + name);
    }

    const Tensor& at(const std::string& name) const {
        for (const auto& [n, t] : items_)
            if (n == name) return t;
        throw ContractError("ParamSet: unknown name " + name);
    }

    std::size_t size() const { return items_.size(); }
    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    std::size_t total_scalars() const {
        std::size_t n = 0;
        for (const auto& [name, t] : items_) n += t.numel();
        return n;
    }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

// Linear warm-up to a constant rate. warmup_fraction is relative to
// total_steps; 0 disables warm-up.
struct LrSchedule {
    double base_lr = 1e-3;
    double warmup_fraction = 0.0;
    std::size_t total_steps = 0;

    double at(std::size_t step) const {
        const std::size_t warm =
            static_cast<std::size_t>(warmup_fraction * static_cast<double>(total_steps));
        if (warm == 0 || step >= warm) return base_lr;
        return base_lr * static_cast<double>(step + 1) / static_cast<double>(warm);
    }
};

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction; state is keyed positionally against the order
// of the ParamSet it was created for.
class AdamOptimizer {
public:
    using Options = AdamOptions;

    AdamOptimizer(const ParamSet& params, LrSchedule schedule, Options opt = {});

    // grads holds one tensor per parameter, same order and shapes.
    void step(ParamSet& params, const std::vector<Tensor>& grads);

    std::size_t steps_taken() const { return step_; }

private:
    LrSchedule schedule_;
    Options opt_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::size_t step_ = 0;
};

}  // namespace grbert
