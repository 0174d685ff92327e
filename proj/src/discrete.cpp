#include "nlheat/discrete.hpp"

#include <cmath>

namespace nlheat {

DiscreteProblem::DiscreteProblem(const ProblemSpec& spec) : spec_(spec), b_(spec.domain.size(), 0.0) {
    for (std::size_t k = 0; k < b_.size(); ++k) b_[k] = spec_.a.B.eval(spec_.domain.node(k));
}

bool DiscreteProblem::forcing(std::span<const double> u, double z, std::span<double> out) const {
    const double hz = cutoff(z);
    bool overflow = false;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const Evaluated fv = f_eval(spec_.f, u[k]);
        overflow = overflow || fv.overflow;
        const double a = coefficient(k, hz);
        const double psi = a == 1.0 ? 0.0 : (1.0 / a - 1.0) * fv.value;
        out[k] = fv.value + psi;
    }
    return overflow;
}

bool DiscreteProblem::psi(std::span<const double> u, double z, std::span<double> out) const {
    const double hz = cutoff(z);
    bool overflow = false;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double a = coefficient(k, hz);
        if (a == 1.0) {
            out[k] = 0.0;
            continue;
        }
        const Evaluated fv = f_eval(spec_.f, u[k]);
        overflow = overflow || fv.overflow;
        out[k] = (1.0 / a - 1.0) * fv.value;
    }
    return overflow;
}

double DiscreteProblem::max_abs_fprime(std::span<const double> u) const {
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(fprime_eval(spec_.f, v).value));
    return m;
}

}  // namespace nlheat
