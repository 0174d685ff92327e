#include "nlheat/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "nlheat/errors.hpp"
#include "nlheat/linalg.hpp"

namespace nlheat {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::DecayToZero: return "DecayToZero";
        case Verdict::BlowUp: return "BlowUp";
        case Verdict::Undecided: return "Undecided";
    }
    return "unknown";
}

const char* to_string(Trigger t) {
    switch (t) {
        case Trigger::None: return "none";
        case Trigger::NormThreshold: return "norm_threshold";
        case Trigger::Overflow: return "overflow";
        case Trigger::Concavity: return "concavity";
        case Trigger::ExpGrowth: return "exp_growth";
        case Trigger::SufficientCondition: return "sufficient_condition";
    }
    return "unknown";
}

void ClassifierConfig::validate() const {
    if (!(M_blow > 0.0)) throw ConfigError("classifier.M_blow must be > 0");
    if (eps_decay > 0.0 && !(eps_decay * 1e3 <= M_blow))
        throw ConfigError("classifier.eps_decay must be far below classifier.M_blow");
    if (!(T_max > 0.0)) throw ConfigError("classifier.T_max must be > 0");
    if (growth_window < 5) throw ConfigError("classifier.growth_window must be >= 5");
    if (!(growth_slope > 0.0)) throw ConfigError("classifier.growth_slope must be > 0");
    if (delta_e < 0.0) throw ConfigError("classifier.delta_e must be >= 0");
    if (trace_stride < 1) throw ConfigError("classifier.trace_stride must be >= 1");
    if (mhat.restarts < 1) throw ConfigError("classifier.mhat_restarts must be >= 1");
    if (mhat.max_iters < 1) throw ConfigError("classifier.mhat_iters must be >= 1");
    stepper.validate();
}

double ClassifierConfig::resolved_blowup_l2(const GridFunction& u0) const {
    return M_blow * std::max(1.0, norm_l2(u0));
}

double ClassifierConfig::resolved_eps_decay(const GridFunction& u0) const {
    return eps_decay > 0.0 ? eps_decay : 1e-6 * std::max(1.0, norm_h1(u0));
}

double ClassifierConfig::resolved_Kstar(const RectDomain& d) const {
    return Kstar > 0.0 ? Kstar : 10.0 * norm_h1(first_mode(d));
}

namespace {

/// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

Classification classify_trajectory(const GridFunction& u0, const ProblemSpec& spec, const ClassifierConfig& cfg) {
    cfg.validate();
    Classification c;
    c.h1_0 = norm_h1(u0);
    c.eps_decay = cfg.resolved_eps_decay(u0);
    c.observed_decrease_rate = std::numeric_limits<double>::quiet_NaN();
    try {
        c.E0 = energy(u0, spec);
    } catch (const NumericError& e) {
        c.verdict = Verdict::BlowUp;
        c.trigger = Trigger::Overflow;
        c.diagnostic = e.what();
        return c;
    }

    if (cfg.use_certificate && blowup_sufficient(u0, spec, cfg).holds) {
        c.verdict = Verdict::BlowUp;
        c.trigger = Trigger::SufficientCondition;
        return c;
    }

    StopRules rules;
    rules.T_max = cfg.T_max;
    rules.decay_h1 = c.eps_decay;
    rules.blowup_l2 = cfg.resolved_blowup_l2(u0);
    rules.trace_stride = cfg.trace_stride;

    const auto window = static_cast<std::size_t>(cfg.growth_window);
    int streak = 0;
    bool growth_fired = false;
    double t_growth = 0.0;
    std::vector<double> xs(window), ys(window);
    rules.halt = [&](const FlowTrace& tr) -> std::optional<TerminalStatus> {
        const auto& rows = tr.rows;
        if (rows.size() < window) return std::nullopt;
        bool usable = rows.back().energy < 0.0;
        for (std::size_t i = 0; i < window && usable; ++i) {
            const TraceRow& r = rows[rows.size() - window + i];
            if (!(r.l2 > 0.0)) usable = false;
            xs[i] = r.t;
            ys[i] = usable ? std::log(r.l2 * r.l2) : 0.0;
        }
        if (growth_fired) return std::nullopt;
        streak = (usable && ls_slope(xs, ys) > cfg.growth_slope) ? streak + 1 : 0;
        if (streak >= 2) {
            growth_fired = true;
            t_growth = rows.back().t;
            if (!cfg.confirm_growth) return TerminalStatus::BlowupFlag;
        }
        return std::nullopt;
    };

    c.trace = evolve(u0, spec, cfg.stepper, rules);
    const FlowTrace& tr = c.trace;
    const double t_end = tr.final_state.t;

    switch (tr.status) {
        case TerminalStatus::Decayed:
            c.verdict = Verdict::DecayToZero;
            c.t_detect = t_end;
            break;
        case TerminalStatus::BlowupFlag:
            c.verdict = Verdict::BlowUp;
            c.t_detect = growth_fired ? t_growth : t_end;
            c.trigger = growth_fired ? Trigger::ExpGrowth : Trigger::NormThreshold;
            break;
        case TerminalStatus::Overflow:
            c.verdict = Verdict::BlowUp;
            c.t_detect = growth_fired ? t_growth : t_end;
            c.trigger = growth_fired ? Trigger::ExpGrowth : Trigger::Overflow;
            c.diagnostic = tr.diagnostic;
            break;
        case TerminalStatus::SolverFailure: {
            const std::size_t n = std::min(window, tr.rows.size());
            bool growing = n >= 2;
            for (std::size_t i = tr.rows.size() - n + 1; i < tr.rows.size() && growing; ++i)
                growing = tr.rows[i].l2 > tr.rows[i - 1].l2;
            growing = growing || growth_fired;
            c.verdict = growing ? Verdict::BlowUp : Verdict::Undecided;
            c.trigger = growing ? Trigger::Overflow : Trigger::None;
            c.t_detect = growing ? t_end : cfg.T_max;
            c.diagnostic = tr.diagnostic;
            break;
        }
        case TerminalStatus::ReachedTmax:
        case TerminalStatus::Stationary:
            c.verdict = growth_fired ? Verdict::BlowUp : Verdict::Undecided;
            c.trigger = growth_fired ? Trigger::ExpGrowth : Trigger::None;
            c.t_detect = growth_fired ? t_growth : cfg.T_max;
            break;
    }

    const double kstar = cfg.resolved_Kstar(spec.domain);
    for (std::size_t i = 1; i < tr.rows.size(); ++i) {
        const TraceRow& a = tr.rows[i - 1];
        const TraceRow& b = tr.rows[i];
        if (a.h1 > kstar && b.h1 > kstar && b.t > a.t) {
            const double rate = -(b.energy - a.energy) / (b.t - a.t);
            if (std::isnan(c.observed_decrease_rate) || rate < c.observed_decrease_rate)
                c.observed_decrease_rate = rate;
        }
    }
    if (cfg.delta_e > 0.0 && !std::isnan(c.observed_decrease_rate) && c.observed_decrease_rate < cfg.delta_e) {
        if (!c.diagnostic.empty()) c.diagnostic += "; ";
        c.diagnostic += fmt::format("energy decrease rate {} above K* is below delta_e {}",
                                    c.observed_decrease_rate, cfg.delta_e);
    }
    return c;
}

ConcavitySeries concavity_indicator(const FlowTrace& trace, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("concavity_indicator needs gamma > 0");
    if (trace.rows.size() < 3) throw ConfigError("concavity_indicator needs at least 3 samples");
    ConcavitySeries out;
    const auto& rows = trace.rows;
    double H = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double dt = rows[i].t - rows[i - 1].t;
        H += 0.25 * dt * (rows[i].l2 * rows[i].l2 + rows[i - 1].l2 * rows[i - 1].l2);
        if (H > 0.0) {
            out.t.push_back(rows[i].t);
            out.H.push_back(H);
            out.ell.push_back(std::pow(H, -0.5 * gamma));
        }
    }
    if (out.t.empty()) return out;

    const std::size_t n = out.t.size();
    const std::size_t start = n / 2;
    double scale = 0.0;
    for (std::size_t i = start; i < n; ++i) scale = std::max(scale, std::abs(out.ell[i]));
    std::size_t total = 0, concave = 0;
    for (std::size_t i = std::max<std::size_t>(start + 1, 1); i + 1 < n; ++i) {
        const double h1 = out.t[i] - out.t[i - 1];
        const double h2 = out.t[i + 1] - out.t[i];
        // Undivided second difference, compared against rounding of ell.
        const double d2 = (h1 * (out.ell[i + 1] - out.ell[i]) - h2 * (out.ell[i] - out.ell[i - 1])) / (h1 + h2);
        ++total;
        if (d2 < -1e-12 * scale) ++concave;
    }
    out.tail_fraction = total > 0 ? static_cast<double>(concave) / static_cast<double>(total) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct SphereDescent {
    double energy = 0.0;
    GridFunction u;
    bool converged = false;
};

SphereDescent descend_on_sphere(GridFunction u, const ProblemSpec& spec, double radius, const MhatBudget& budget) {
    const RectDomain& d = spec.domain;
    const std::size_t n = d.size();
    u *= radius / norm_h1(u);
    SphereDescent out{energy(u, spec), u, false};

    GridFunction w(d), f(d), au(d), g(d), ag(d);
    std::vector<double> scratch(n);
    auto apply_a = [&](std::span<const double> x, std::span<double> y) { apply_laplacian(d, x, y); };
    double alpha = 1.0;

    for (int it = 0; it < budget.max_iters; ++it) {
        for (std::size_t k = 0; k < n; ++k) {
            const Evaluated fv = f_eval(spec.f, u[k]);
            if (fv.overflow) return out;
            f[k] = fv.value;
        }
        const CgResult cg = conjugate_gradient(apply_a, f.values(), w.data(), 1e-12, 10 * static_cast<int>(n));
        if (!cg.converged) return out;
        // H1 gradient u - A^{-1} f, projected onto the tangent space of the sphere.
        g = u - w;
        apply_laplacian(d, u.values(), au.data());
        const double coef = inner(g, au) / (radius * radius);
        g -= coef * u;
        apply_laplacian(d, g.values(), ag.data());
        const double gnorm = std::sqrt(std::max(0.0, inner(g, ag)));
        if (gnorm <= 1e-12 * radius) {
            out.converged = true;
            return out;
        }
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving) {
            GridFunction trial = u - (alpha / gnorm * radius * 0.1) * g;
            trial *= radius / norm_h1(trial);
            double e_trial;
            try {
                e_trial = energy(trial, spec);
            } catch (const NumericError&) {
                alpha *= 0.5;
                continue;
            }
            if (e_trial < out.energy) {
                const double change = out.energy - e_trial;
                u = std::move(trial);
                out.u = u;
                out.energy = e_trial;
                accepted = true;
                alpha = std::min(1.0, 1.5 * alpha);
                if (change <= budget.tol * std::max(1.0, std::abs(e_trial))) {
                    out.converged = true;
                    return out;
                }
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // No descent at any resolvable step: stationary to rounding.
            out.converged = true;
            return out;
        }
    }
    return out;
}

}  // namespace

MhatEstimate estimate_Mhat(const ProblemSpec& spec, double Kstar, const MhatBudget& budget) {
    if (!(Kstar > 0.0)) throw ConfigError("estimate_Mhat needs Kstar > 0");
    if (budget.restarts < 1) throw ConfigError("estimate_Mhat needs at least one restart");
    const RectDomain& d = spec.domain;
    const SpectralBasis basis(d);
    const std::size_t n_modes = std::min<std::size_t>(4, basis.size());

    MhatEstimate est;
    est.best_energy = std::numeric_limits<double>::infinity();
    for (int i = 0; i < budget.restarts; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        GridFunction start = idx < n_modes
                                 ? basis.eigenvector(idx)
                                 : random_smooth_field(d, budget.seed * 0x9E3779B97F4A7C15ULL + idx, 16);
        ++est.restarts;
        SphereDescent run;
        try {
            run = descend_on_sphere(std::move(start), spec, Kstar, budget);
        } catch (const NumericError&) {
            continue;
        }
        if (run.converged) ++est.converged_restarts;
        if (run.energy < est.best_energy) {
            est.best_energy = run.energy;
            est.best_u = run.u;
        }
    }
    est.Mhat = -est.best_energy;
    est.no_negative_energy = est.best_energy >= 0.0;
    return est;
}

BlowupCertificate blowup_sufficient(const GridFunction& u0, const ProblemSpec& spec, const ClassifierConfig& cfg) {
    BlowupCertificate c;
    c.Kstar = cfg.resolved_Kstar(spec.domain);
    c.h1_0 = norm_h1(u0);
    c.E0 = energy(u0, spec);
    const MhatEstimate est = estimate_Mhat(spec, c.Kstar, cfg.mhat);
    if (est.converged_restarts == 0) {
        throw NumericError(fmt::format("sphere minimisation for M-hat did not converge in {} restarts x {} iterations",
                                       cfg.mhat.restarts, cfg.mhat.max_iters));
    }
    c.Mhat = est.Mhat;
    c.bound = std::min(-c.Mhat, -spec.a.K / (2.0 + spec.f.gamma));
    c.holds = c.h1_0 > c.Kstar && c.E0 < c.bound;
    return c;
}

void write_classification_csv(std::ostream& os, const Classification& c, const BlowupCertificate* cert) {
    os << "verdict,t_detect,trigger,E0,h1_0";
    if (cert) os << ",Kstar,Mhat,E_bound,certificate";
    os << '\n' << to_string(c.verdict) << ',' << format_real(c.t_detect) << ',' << to_string(c.trigger) << ','
       << format_real(c.E0) << ',' << format_real(c.h1_0);
    if (cert) {
        os << ',' << format_real(cert->Kstar) << ',' << format_real(cert->Mhat) << ',' << format_real(cert->bound)
           << ',' << (cert->holds ? "true" : "false");
    }
    os << '\n';
}

}  // namespace nlheat
