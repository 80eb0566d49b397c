#include "grbert/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "grbert/rng.hpp"

namespace grbert {

GradCheckReport finite_diff_check(
    const std::function<double(const ParamSet&)>& eval,
    const std::function<std::vector<Tensor>(const ParamSet&)>& grad, ParamSet params,
    double step, double tol, std::size_t max_coords_per_tensor, std::uint64_t seed) {
    if (!(step > 0.0)) throw ContractError("finite_diff_check: step must be positive");
    const std::vector<Tensor> analytic = grad(params);
    if (analytic.size() != params.size())
        throw ContractError("finite_diff_check: gradient count mismatch");

    GradCheckReport report;
    Rng rng(Rng::derive(seed, "gradcheck"));
    std::size_t k = 0;
    for (auto& [name, tensor] : params) {
        const Tensor& ga = analytic[k];
        std::vector<std::size_t> coords;
        if (max_coords_per_tensor == 0 || tensor.numel() <= max_coords_per_tensor) {
            coords.resize(tensor.numel());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        } else {
            for (std::size_t i = 0; i < max_coords_per_tensor; ++i)
                coords.push_back(rng.uniform_index(tensor.numel()));
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        }
        for (std::size_t c : coords) {
            const double saved = tensor[c];
            tensor[c] = saved + step;
            const double up = eval(params);
            tensor[c] = saved - step;
            const double down = eval(params);
            tensor[c] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = ga[c];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            const double rel = std::abs(a - numeric) / denom;
            ++report.coords_checked;
            if (rel > report.max_rel_dev) {
                report.max_rel_dev = rel;
                report.worst = {name, c, a, numeric, rel};
            }
        }
        ++k;
    }
    report.pass = report.max_rel_dev <= tol;
    return report;
}

}  // namespace grbert
