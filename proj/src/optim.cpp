#include "grbert/optim.hpp"

#include <cmath>

namespace grbert {

AdamOptimizer::AdamOptimizer(const ParamSet& params, LrSchedule schedule, Options opt)
    : schedule_(schedule), opt_(opt) {
    for (const auto& [name, t] : params) {
        m_.push_back(Tensor::zeros(t.shape().empty() ? std::vector<std::size_t>{1}
                                                     : t.shape()));
        v_.push_back(Tensor::zeros(t.shape().empty() ? std::vector<std::size_t>{1}
                                                     : t.shape()));
    }
}

void AdamOptimizer::step(ParamSet& params, const std::vector<Tensor>& grads) {
    if (grads.size() != m_.size()) throw ContractError("AdamOptimizer: gradient count mismatch");
    const double lr = schedule_.at(step_);
    ++step_;
    const double b1t = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
    const double b2t = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
    std::size_t k = 0;
    for (auto& [name, t] : params) {
        const Tensor& g = grads[k];
        if (g.numel() != t.numel())
            throw ContractError("AdamOptimizer: gradient shape mismatch for " + name);
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < t.numel(); ++i) {
            m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
            v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
            const double mhat = m[i] / b1t;
            const double vhat = v[i] / b2t;
            t[i] -= lr * mhat / (std::sqrt(vhat) + opt_.epsilon);
        }
        ++k;
    }
}

}  // namespace grbert
