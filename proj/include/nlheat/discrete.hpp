#pragma once

#include <span>
#include <vector>

#include "nlheat/model.hpp"

namespace nlheat {

/// A ProblemSpec bound to its grid: B is tabulated at the nodes so the
/// per-step work touches h(z) once instead of a(x, z) per node.
class DiscreteProblem {
public:
    explicit DiscreteProblem(const ProblemSpec& spec);

    const ProblemSpec& spec() const noexcept { return spec_; }
    const RectDomain& domain() const noexcept { return spec_.domain; }

    /// a(x_k, z) for node k, bit-identical to a_eval.
    double coefficient(std::size_t k, double hz) const noexcept {
        return hz == 0.0 ? 1.0 : 1.0 + b_[k] * hz;
    }
    double cutoff(double z) const { return spec_.a.h.eval(z); }
    double cutoff_derivative(double z) const { return spec_.a.h.derivative(z); }
    double profile(std::size_t k) const noexcept { return b_[k]; }

    /// out = f(u) + Psi(x, u, z). Returns true if any evaluation overflowed.
    bool forcing(std::span<const double> u, double z, std::span<double> out) const;
    /// out = Psi(x, u, z). Returns true on overflow.
    bool psi(std::span<const double> u, double z, std::span<double> out) const;

    /// max_k |f'(u_k)|.
    double max_abs_fprime(std::span<const double> u) const;

private:
    ProblemSpec spec_;
    std::vector<double> b_;
};

}  // namespace nlheat
