#pragma once

#include <functional>
#include <span>

namespace nlheat {

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Unpreconditioned conjugate gradients for an SPD operator given as a
/// matvec. `x` holds the initial guess on entry. Stops when
/// |b - A x| <= tol |b|. A zero right-hand side returns x = 0 exactly.
CgResult conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                            std::span<const double> b, std::span<double> x, double tol, int max_iters);

}  // namespace nlheat
