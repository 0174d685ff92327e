#include "nlheat/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "nlheat/errors.hpp"
#include "nlheat/grid.hpp"

namespace nlheat {

const char* to_string(ConditionVerdict v) {
    switch (v) {
        case ConditionVerdict::Pass: return "pass";
        case ConditionVerdict::Fail: return "fail";
        case ConditionVerdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

const ConditionResult& ConditionReport::get(const std::string& name) const {
    for (const ConditionResult& r : results)
        if (r.name == name) return r;
    throw ConfigError("no condition named " + name);
}

bool ConditionReport::all_pass() const {
    return std::all_of(results.begin(), results.end(),
                       [](const ConditionResult& r) { return r.verdict == ConditionVerdict::Pass; });
}

namespace {

struct Sample {
    double t, f, fp, g, gp, F;
};

/// Evaluates everything at t; false if any piece overflows or fails.
bool evaluate(const ProblemSpec& spec, double t, Sample& s) {
    const Evaluated f = f_eval(spec.f, t), fp = fprime_eval(spec.f, t);
    const Evaluated g = g_eval(spec.g, t), gp = gprime_eval(spec.g, t);
    if (f.overflow || fp.overflow || g.overflow || gp.overflow) return false;
    double F;
    try {
        F = F_eval(spec.f, t);
    } catch (const NumericError&) {
        return false;
    }
    s = {t, f.value, fp.value, g.value, gp.value, F};
    return std::isfinite(f.value) && std::isfinite(fp.value) && std::isfinite(g.value) && std::isfinite(gp.value) &&
           std::isfinite(F);
}

struct Samples {
    std::vector<Sample> pos;    ///< ascending |t|, t > 0
    std::vector<Sample> neg;    ///< same |t|, t < 0
    std::vector<Sample> small;  ///< |t| = 10^-k, both signs interleaved
    double t_hi = 0.0;
    bool truncated = false;
};

Samples collect(const ProblemSpec& spec, const SamplePlan& plan) {
    Samples s;
    const int m = std::max(2, plan.t_samples / 2);
    const double ratio = std::log(plan.t_max / plan.t_min);
    for (int i = 0; i < m; ++i) {
        const double t = plan.t_min * std::exp(ratio * i / (m - 1));
        Sample a, b;
        if (!evaluate(spec, t, a) || !evaluate(spec, -t, b)) {
            s.truncated = true;
            break;
        }
        s.pos.push_back(a);
        s.neg.push_back(b);
        s.t_hi = t;
    }
    for (int k = 1; k <= plan.small_t_decades; ++k) {
        const double t = std::pow(10.0, -k);
        Sample a, b;
        if (evaluate(spec, t, a)) s.small.push_back(a);
        if (evaluate(spec, -t, b)) s.small.push_back(b);
    }
    return s;
}

void add_witness(ConditionResult& r, const SamplePlan& plan, Witness w) {
    if (r.witnesses.size() < plan.max_witnesses) r.witnesses.push_back(w);
}

/// Least-squares slope of log|y| against log t over the upper half of the
/// sampled range; NaN if some |y| vanishes there.
double tail_loglog_slope(const std::vector<Sample>& pos, double (*pick)(const Sample&)) {
    if (pos.size() < 4) return std::numeric_limits<double>::quiet_NaN();
    const double t_hi = pos.back().t;
    std::vector<double> x, y;
    for (const Sample& s : pos) {
        if (s.t < 0.5 * t_hi) continue;
        const double v = std::abs(pick(s));
        if (!(v > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        x.push_back(std::log(s.t));
        y.push_back(std::log(v));
    }
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

/// True if rho is nonincreasing (up to rounding) over the upper half of the
/// sampled |t| range on both signs.
template <class Rho>
bool tail_nonincreasing(const Samples& s, Rho rho) {
    for (const auto* side : {&s.pos, &s.neg}) {
        double prev = std::numeric_limits<double>::infinity();
        for (const Sample& x : *side) {
            if (std::abs(x.t) < 0.5 * s.t_hi) continue;
            const double v = rho(x);
            if (v > prev * (1.0 + 1e-12) + 1e-300) return false;
            prev = v;
        }
    }
    return true;
}

template <class Fn>
void for_each_sample(const Samples& s, Fn fn) {
    for (const Sample& x : s.small) fn(x);
    for (const Sample& x : s.pos) fn(x);
    for (const Sample& x : s.neg) fn(x);
}

std::string range_note(const Samples& s, const SamplePlan& plan) {
    if (!s.truncated) return fmt::format("sampled |t| <= {}", plan.t_max);
    return fmt::format("sampled |t| <= {} (evaluation overflows beyond)", s.t_hi);
}

ConditionResult check_H(const ProblemSpec& spec, const Samples& s, const SamplePlan& plan) {
    ConditionResult r{"H", ConditionVerdict::Pass, 0.0, "C", plan.t_min, s.t_hi, {}, {}};
    bool negative = false;
    double C = 0.0;
    for_each_sample(s, [&](const Sample& x) {
        if (x.g < 0.0) {
            negative = true;
            add_witness(r, plan, {x.t, 0, 0, 0, x.g, 0.0});
            return;
        }
        C = std::max(C, std::max(x.f * x.f, std::abs(x.f * x.t)) / (x.g + 1.0));
    });
    (void)spec;
    if (negative) {
        r.verdict = ConditionVerdict::Fail;
        r.detail = "g(t) < 0 at the witnesses (lhs = g(t), rhs = 0)";
        return r;
    }
    r.estimate = C;
    const bool bounded = tail_nonincreasing(s, [](const Sample& x) {
        return std::max(x.f * x.f, std::abs(x.f * x.t)) / (x.g + 1.0);
    });
    if (!bounded) {
        r.verdict = ConditionVerdict::Inconclusive;
        r.detail = "max(f^2, |f t|)/(g + 1) still grows at the edge of the " + range_note(s, plan);
    } else {
        r.detail = "smallest feasible C over samples; " + range_note(s, plan);
    }
    return r;
}

ConditionResult check_a(const ProblemSpec& spec, const SamplePlan& plan, bool saturation) {
    ConditionResult r{saturation ? "a2" : "a1", ConditionVerdict::Pass, 0.0, saturation ? "max|a-1|" : "min a",
                      0.0, 0.0, {}, {}};
    const CoefficientModel& c = spec.a;
    const double zmax = plan.z_span * c.K;
    r.t_lo = -zmax;
    r.t_hi = zmax;
    double extreme = saturation ? 0.0 : std::numeric_limits<double>::infinity();
    const int nl = std::max(2, plan.x_lattice);
    const int nz = std::max(3, plan.z_samples);
    for (int iz = 0; iz < nz; ++iz) {
        const double z = -zmax + 2.0 * zmax * iz / (nz - 1);
        if (saturation && std::abs(z) < c.K) continue;
        for (int iy = 0; iy < nl; ++iy) {
            for (int ix = 0; ix < nl; ++ix) {
                const Point x{spec.domain.lx() * ix / (nl - 1), spec.domain.ly() * iy / (nl - 1)};
                const double a = a_eval(c, x, z);
                if (saturation) {
                    extreme = std::max(extreme, std::abs(a - 1.0));
                    if (a != 1.0) add_witness(r, plan, {0.0, x.x, x.y, z, a, 1.0});
                } else {
                    extreme = std::min(extreme, a);
                    if (!(a >= c.a0)) add_witness(r, plan, {0.0, x.x, x.y, z, a, c.a0});
                }
            }
        }
    }
    r.estimate = extreme;
    if (!r.witnesses.empty()) {
        r.verdict = ConditionVerdict::Fail;
        r.detail = saturation ? "a(x, z) != 1 for |z| >= K at the witnesses (lhs = a, rhs = 1)"
                              : "a(x, z) < a0 at the witnesses (lhs = a, rhs = a0)";
    } else {
        r.detail = fmt::format("{}x{} lattice over the closed rectangle, {} z samples in [-{}K, {}K]", nl, nl, nz,
                               plan.z_span, plan.z_span);
    }
    return r;
}

ConditionResult check_f2(const Samples& s, const SamplePlan& plan) {
    ConditionResult r{"f2", ConditionVerdict::Pass, 0.0, "|f(t)/t| at smallest t", 0.0, 0.1, {}, {}};
    // Pair up both signs per decade: small holds (t, -t) for each k.
    std::vector<std::pair<double, double>> rho;  // (|t|, max over signs of |f/t|)
    for (const Sample& x : s.small) {
        const double v = std::abs(x.f / x.t);
        if (!rho.empty() && rho.back().first == std::abs(x.t)) rho.back().second = std::max(rho.back().second, v);
        else rho.emplace_back(std::abs(x.t), v);
    }
    if (rho.size() < 2) {
        r.verdict = ConditionVerdict::Inconclusive;
        r.detail = "too few small-t samples";
        return r;
    }
    r.t_lo = rho.back().first;
    r.estimate = rho.back().second;
    bool monotone = true;
    for (std::size_t i = 1; i < rho.size(); ++i) monotone = monotone && rho[i].second <= rho[i - 1].second;
    const double first = rho.front().second, last = rho.back().second;
    if (last == 0.0 || (monotone && last <= 0.1 * first)) {
        r.detail = fmt::format("|f(t)/t| declines from {} at t = {} to {} at t = {}", first, rho.front().first, last,
                               rho.back().first);
        return r;
    }
    if (last >= first) {
        r.verdict = ConditionVerdict::Fail;
        r.detail = "|f(t)/t| does not decline as t -> 0 (lhs = |f(t)/t|, rhs = its value at t = 0.1)";
        add_witness(r, plan, {rho.back().first, 0, 0, 0, last, first});
        return r;
    }
    r.verdict = ConditionVerdict::Inconclusive;
    r.detail = fmt::format("|f(t)/t| declines only from {} to {} over the sampled decades", first, last);
    return r;
}

ConditionResult check_f3(const ProblemSpec& spec, const Samples& s, const SamplePlan& plan) {
    ConditionResult r{"f3", ConditionVerdict::Pass, 0.0, "gamma_max", plan.t_min, s.t_hi, {}, {}};
    const double gamma = spec.f.gamma;
    double gmax = std::numeric_limits<double>::infinity();
    for_each_sample(s, [&](const Sample& x) {
        if (x.t == 0.0) return;
        const double fs = x.f * x.t;
        const double rhs = (2.0 + gamma) * x.F;
        if (x.F > 0.0) gmax = std::min(gmax, fs / x.F - 2.0);
        if (!(x.F > 0.0) || fs - rhs < -1e-10 * std::abs(fs)) add_witness(r, plan, {x.t, 0, 0, 0, fs, rhs});
    });
    r.estimate = gmax;
    if (!r.witnesses.empty()) {
        r.verdict = ConditionVerdict::Fail;
        r.detail = fmt::format("f(s)s >= (2+gamma)F(s) > 0 fails with gamma = {} (lhs = f(s)s, rhs = (2+gamma)F(s))",
                               gamma);
    } else {
        r.detail = fmt::format("holds with gamma = {}; largest admissible gamma over samples {}", gamma, gmax);
    }
    if (!(gamma > 0.0)) {
        r.verdict = ConditionVerdict::Fail;
        r.detail = "gamma must be > 0";
        if (r.witnesses.empty()) add_witness(r, plan, {0.0, 0, 0, 0, gamma, 0.0});
    }
    return r;
}

double critical_exponent(int dim) { return 2.0 * dim / (dim - 2.0); }

ConditionResult check_g(const ProblemSpec& spec, const Samples& s, const SamplePlan& plan, double* q_fit_out) {
    ConditionResult r{"g", ConditionVerdict::Pass, 0.0, "", plan.t_min, s.t_hi, {}, {}};
    if (spec.hypothesis_dim == 2) {
        r.estimate_name = "log(1+g)/t^2 at edge";
        const bool ok = tail_nonincreasing(s, [](const Sample& x) { return std::log1p(x.g) / (x.t * x.t); }) &&
                        tail_nonincreasing(s, [](const Sample& x) { return std::log1p(std::abs(x.gp)) / (x.t * x.t); });
        r.estimate = s.pos.empty() ? 0.0 : std::log1p(s.pos.back().g) / (s.t_hi * s.t_hi);
        r.verdict = ok ? ConditionVerdict::Pass : ConditionVerdict::Inconclusive;
        r.detail = std::string(ok ? "log g / t^2 and log g' / t^2 decrease on the sampled tail"
                                  : "log g / t^2 or log g' / t^2 increases on the sampled tail") +
                   "; limit at infinity, " + range_note(s, plan);
        return r;
    }
    r.estimate_name = "q_fit";
    const double qmax = critical_exponent(spec.hypothesis_dim);
    bool positive = false;
    for (const Sample& x : s.pos) positive = positive || x.g > 0.0;
    if (!positive) {
        *q_fit_out = qmax;
        r.estimate = 0.0;
        r.detail = "g <= 0 on the sampled range, so any q bounds it";
        return r;
    }
    const double q = tail_loglog_slope(s.pos, [](const Sample& x) { return x.g; });
    *q_fit_out = q;
    r.estimate = q;
    if (!std::isfinite(q)) {
        r.verdict = ConditionVerdict::Inconclusive;
        r.detail = "g vanishes on the sampled tail; no growth exponent";
    } else if (q < 1.0 - 1e-6 || q > qmax + 1e-6) {
        r.verdict = ConditionVerdict::Fail;
        r.detail = fmt::format("fitted growth exponent {} outside [1, 2*] = [1, {}] (lhs = q_fit, rhs = bound)", q, qmax);
        add_witness(r, plan, {s.t_hi, 0, 0, 0, q, q > qmax ? qmax : 1.0});
    } else {
        r.detail = fmt::format("fitted growth exponent {} in [1, {}]; {}", q, qmax, range_note(s, plan));
    }
    return r;
}

ConditionResult check_f1(const ProblemSpec& spec, const Samples& s, const SamplePlan& plan, double q_fit) {
    ConditionResult r{"f1", ConditionVerdict::Pass, 0.0, "", plan.t_min, s.t_hi, {}, {}};
    if (spec.hypothesis_dim == 2) {
        r.estimate_name = "log(1+|f'|)/t^2 at edge";
        const bool ok =
            tail_nonincreasing(s, [](const Sample& x) { return std::log1p(std::abs(x.fp)) / (x.t * x.t); });
        r.estimate = s.pos.empty() ? 0.0 : std::log1p(std::abs(s.pos.back().fp)) / (s.t_hi * s.t_hi);
        r.verdict = ok ? ConditionVerdict::Pass : ConditionVerdict::Inconclusive;
        r.detail = std::string(ok ? "log|f'| / t^2 decreases on the sampled tail"
                                  : "log|f'| / t^2 increases on the sampled tail") +
                   "; limit at infinity, " + range_note(s, plan);
        return r;
    }
    r.estimate_name = "p_fit";
    bool nonzero = false;
    for (const Sample& x : s.pos) nonzero = nonzero || x.f != 0.0;
    if (!nonzero) {
        r.detail = "f vanishes on the sampled range";
        return r;
    }
    const double p = tail_loglog_slope(s.pos, [](const Sample& x) { return x.f; });
    r.estimate = p;
    if (!std::isfinite(p) || !std::isfinite(q_fit)) {
        r.verdict = ConditionVerdict::Inconclusive;
        r.detail = "no growth exponent could be fitted on the sampled tail";
    } else if (p >= 0.5 * q_fit || 0.5 * q_fit <= 1.0) {
        r.verdict = ConditionVerdict::Fail;
        r.detail = fmt::format("fitted exponent {} leaves no p in (1, q/2) = (1, {}) (lhs = p_fit, rhs = q/2)", p,
                               0.5 * q_fit);
        add_witness(r, plan, {s.t_hi, 0, 0, 0, p, 0.5 * q_fit});
    } else {
        r.detail = fmt::format("fitted exponent {} < q/2 = {}; {}", p, 0.5 * q_fit, range_note(s, plan));
    }
    return r;
}

ConditionResult check_neweq1(const ProblemSpec& spec, const Samples& s, const SamplePlan& plan) {
    ConditionResult r{"NEWEQ1", ConditionVerdict::Pass, 0.0, "c3", plan.t_min, s.t_hi, {}, {}};
    const double e = 2.0 + spec.f.gamma;
    double c3 = 0.0;
    bool sign_ok = true;
    for_each_sample(s, [&](const Sample& x) {
        if (std::abs(x.t) < 1.0) return;
        const double ft = x.f * x.t;
        if (!(ft > 0.0)) {
            sign_ok = false;
            add_witness(r, plan, {x.t, 0, 0, 0, ft, 0.0});
            return;
        }
        c3 = std::max(c3, std::pow(std::abs(x.t), e) / ft);
    });
    if (!sign_ok) {
        r.verdict = ConditionVerdict::Fail;
        r.detail = "f(t)t <= 0 for some |t| >= 1, so |t|^{2+gamma} cannot be dominated (lhs = f(t)t, rhs = 0)";
        return r;
    }
    double c4 = 0.0;
    for_each_sample(s, [&](const Sample& x) { c4 = std::max(c4, std::pow(std::abs(x.t), e) - c3 * x.f * x.t); });
    r.estimate = c3;
    const bool bounded = tail_nonincreasing(s, [e](const Sample& x) { return std::pow(std::abs(x.t), e) / (x.f * x.t); });
    r.verdict = bounded ? ConditionVerdict::Pass : ConditionVerdict::Inconclusive;
    r.detail = fmt::format("c3 = {}, c4 = {}; {}{}", c3, c4, bounded ? "" : "ratio still grows at the edge, ",
                           range_note(s, plan));
    return r;
}

}  // namespace

ConditionReport verify_conditions(const ProblemSpec& spec, const SamplePlan& plan) {
    if (!(plan.t_max > plan.t_min && plan.t_min > 0.0)) throw ConfigError("sample plan needs 0 < t_min < t_max");
    if (plan.t_samples < 8) throw ConfigError("sample plan needs at least 8 t samples");
    if (spec.hypothesis_dim != 2 && spec.hypothesis_dim < 3) throw ConfigError("hypothesis dimension must be 2 or >= 3");
    const Samples s = collect(spec, plan);
    if (s.pos.size() < 4) throw NumericError("fewer than 4 usable t samples before overflow");

    ConditionReport rep;
    rep.dimension = spec.hypothesis_dim;
    double q_fit = std::numeric_limits<double>::quiet_NaN();
    ConditionResult g = check_g(spec, s, plan, &q_fit);
    rep.results.push_back(check_H(spec, s, plan));
    rep.results.push_back(check_a(spec, plan, false));
    rep.results.push_back(check_a(spec, plan, true));
    rep.results.push_back(check_f1(spec, s, plan, q_fit));
    rep.results.push_back(check_f2(s, plan));
    rep.results.push_back(check_f3(spec, s, plan));
    rep.results.push_back(std::move(g));
    rep.results.push_back(check_neweq1(spec, s, plan));
    return rep;
}

void write_condition_report(std::ostream& os, const ConditionReport& report) {
    os << "condition,verdict,estimate_name,estimate,t_lo,t_hi,witnesses,detail\n";
    for (const ConditionResult& r : report.results) {
        std::string w;
        for (const Witness& x : r.witnesses) {
            if (!w.empty()) w += '|';
            w += format_real(x.t) + ':' + format_real(x.x) + ':' + format_real(x.y) + ':' + format_real(x.z) + ':' +
                 format_real(x.lhs) + ':' + format_real(x.rhs);
        }
        std::string detail = r.detail;
        std::replace(detail.begin(), detail.end(), '"', '\'');
        os << r.name << ',' << to_string(r.verdict) << ',' << r.estimate_name << ',' << format_real(r.estimate) << ','
           << format_real(r.t_lo) << ',' << format_real(r.t_hi) << ',' << w << ",\"" << detail << "\"\n";
    }
}

}  // namespace nlheat
