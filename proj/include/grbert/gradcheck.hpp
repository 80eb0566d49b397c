#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "grbert/optim.hpp"

namespace grbert {

// Compares analytic gradients against central finite differences.
//
// eval must be a pure function of the parameters. grad must return one
// gradient tensor per parameter in ParamSet order. When max_coords_per_tensor
// is positive, only a seeded random subset of coordinates per tensor is
// probed, which keeps large checks fast without biasing which entries are
// covered across seeds.
struct GradCheckReport {
    struct Entry {
        std::string name;
        std::size_t coord = 0;
        double analytic = 0.0;
        double numeric = 0.0;
        double rel_dev = 0.0;
    };

    double max_rel_dev = 0.0;
    bool pass = false;
    Entry worst;
    std::size_t coords_checked = 0;
};

GradCheckReport finite_diff_check(
    const std::function<double(const ParamSet&)>& eval,
    const std::function<std::vector<Tensor>(const ParamSet&)>& grad, ParamSet params,
    double step, double tol, std::size_t max_coords_per_tensor = 0,
    std::uint64_t seed = 0);

}  // namespace grbert
