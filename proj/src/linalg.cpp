#include "nlheat/linalg.hpp"

#include <cmath>
#include <vector>

namespace nlheat {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

}  // namespace

CgResult conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                            std::span<const double> b, std::span<double> x, double tol, int max_iters) {
    const std::size_t n = b.size();
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) {
        for (double& v : x) v = 0.0;
        return {0, 0.0, true};
    }
    std::vector<double> r(n), p(n), ap(n);
    apply(x, ap);
    for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - ap[k];
    double rr = dot(r, r);
    const double target = tol * bnorm;
    if (std::sqrt(rr) <= target) return {0, std::sqrt(rr) / bnorm, true};
    p = r;
    for (int it = 1; it <= max_iters; ++it) {
        apply(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) return {it, std::sqrt(rr) / bnorm, false};
        const double alpha = rr / pap;
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        const double rr_new = dot(r, r);
        if (std::sqrt(rr_new) <= target) return {it, std::sqrt(rr_new) / bnorm, true};
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * p[k];
    }
    return {max_iters, std::sqrt(rr) / bnorm, false};
}

}  // namespace nlheat
