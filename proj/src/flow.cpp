#include "nlheat/flow.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "nlheat/errors.hpp"
#include "nlheat/linalg.hpp"

namespace nlheat {

FlowState FlowState::initial(const GridFunction& u0, const ProblemSpec& spec) {
    FlowState s;
    s.u = u0;
    s.t = 0.0;
    bool of = false;
    s.z = nonlocal_value(u0, spec.g, &of);
    s.overflow = of || !u0.all_finite();
    return s;
}

double default_dt(const RectDomain& d) {
    const double h = std::min(d.hx(), d.hy());
    return std::min(0.25 * h * h, 1e-3);
}

void StepperConfig::validate() const {
    if (!(solver_tol > 0.0 && solver_tol <= 1e-4))
        throw ConfigError(fmt::format("stepper.solver_tol must lie in (0, 1e-4], got {}", solver_tol));
    if (max_cg_iters < 1) throw ConfigError("stepper.max_cg_iters must be >= 1");
    if (!(growth_ratio > 1.0)) throw ConfigError("stepper.growth_ratio must be > 1");
    if (!(stability_factor > 0.0)) throw ConfigError("stepper.stability_factor must be > 0");
}

const char* to_string(TerminalStatus s) {
    switch (s) {
        case TerminalStatus::ReachedTmax: return "reached_Tmax";
        case TerminalStatus::Decayed: return "decayed";
        case TerminalStatus::BlowupFlag: return "blowup_flag";
        case TerminalStatus::Stationary: return "stationary";
        case TerminalStatus::Overflow: return "overflow";
        case TerminalStatus::SolverFailure: return "solver_failure";
    }
    return "unknown";
}

StepOutcome step_imex(const FlowState& s, const DiscreteProblem& problem, const StepperConfig& cfg) {
    const RectDomain& d = problem.domain();
    const double dt = cfg.resolved_dt(d);
    const std::size_t n = d.size();

    std::vector<double> rhs(n);
    const bool overflow = problem.forcing(s.u.values(), s.z, rhs);
    if (overflow) {
        StepOutcome out{s, 0.0, 0};
        out.state.overflow = true;
        return out;
    }
    // Solve for the increment, (I + dt A) du = dt (f + Psi - A u), so the
    // relative CG tolerance applies to the update rather than to u itself.
    std::vector<double> scratch(n);
    apply_laplacian(d, s.u.values(), scratch);
    for (std::size_t k = 0; k < n; ++k) rhs[k] = dt * (rhs[k] - scratch[k]);

    std::vector<double> du(n, 0.0);
    auto op = [&](std::span<const double> x, std::span<double> y) {
        apply_laplacian(d, x, scratch);
        for (std::size_t k = 0; k < n; ++k) y[k] = x[k] + dt * scratch[k];
    };
    const CgResult cg = conjugate_gradient(op, rhs, du, cfg.solver_tol, cfg.max_cg_iters);
    if (!cg.converged) {
        throw NumericError(fmt::format("CG did not converge at t={}: {} iterations, relative residual {}",
                                       s.t, cg.iterations, cg.relative_residual));
    }
    GridFunction next = s.u;
    for (std::size_t k = 0; k < n; ++k) next[k] += du[k];

    StepOutcome out;
    out.cg_iterations = cg.iterations;
    double diff = 0.0;
    for (std::size_t k = 0; k < n; ++k) diff += (next[k] - s.u[k]) * (next[k] - s.u[k]);
    out.ut_l2 = std::sqrt(diff * d.cell_area()) / dt;
    bool gof = false;
    out.state.z = nonlocal_value(next, problem.spec().g, &gof);
    out.state.overflow = gof || !next.all_finite();
    out.state.u = std::move(next);
    out.state.t = s.t + dt;
    return out;
}

StepOutcome step_imex(const FlowState& s, const ProblemSpec& spec, const StepperConfig& cfg) {
    return step_imex(s, DiscreteProblem(spec), cfg);
}

namespace {

double l2_of(std::span<const double> v, const RectDomain& d) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s * d.cell_area());
}

/// |dE/dt + |u_t|^2 - <Psi(mid), u_t>| given the energies at both ends.
double lyapunov_residual_with(const FlowState& prev, const FlowState& next, double e_prev, double e_next,
                              const DiscreteProblem& problem) {
    const RectDomain& d = problem.domain();
    const double dt = next.t - prev.t;
    const std::size_t n = d.size();
    std::vector<double> mid(n), psi(n);
    double ut2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mid[k] = 0.5 * (prev.u[k] + next.u[k]);
        const double ut = (next.u[k] - prev.u[k]) / dt;
        ut2 += ut * ut;
    }
    ut2 *= d.cell_area();
    problem.psi(mid, 0.5 * (prev.z + next.z), psi);
    double work = 0.0;
    for (std::size_t k = 0; k < n; ++k) work += psi[k] * (next.u[k] - prev.u[k]) / dt;
    work *= d.cell_area();
    return std::abs((e_next - e_prev) / dt + ut2 - work);
}

}  // namespace

double lyapunov_residual(const FlowState& prev, const FlowState& next, const ProblemSpec& spec) {
    const DiscreteProblem problem(spec);
    return lyapunov_residual_with(prev, next, energy(prev.u, spec), energy(next.u, spec), problem);
}

FlowTrace evolve(const GridFunction& u0, const ProblemSpec& spec, const StepperConfig& cfg,
                 const StopRules& rules) {
    cfg.validate();
    if (!(rules.T_max > 0.0)) throw ConfigError("stop rules need T_max > 0");
    if (!rules.has_halting_predicate()) throw ConfigError("stop rules need at least one halting predicate");
    const int stride = std::max(1, rules.trace_stride);

    const DiscreteProblem problem(spec);
    const RectDomain& d = spec.domain;
    const std::size_t n = d.size();
    const double base_dt = cfg.resolved_dt(d);

    FlowTrace tr;
    FlowState st = FlowState::initial(u0, spec);
    tr.final_state = st;
    tr.min_dt = base_dt;
    tr.max_dt = 0.0;

    double e_cur = 0.0;
    try {
        e_cur = energy(st.u, spec);
    } catch (const NumericError& e) {
        tr.status = TerminalStatus::Overflow;
        tr.diagnostic = e.what();
        return tr;
    }

    // Row 0: u_t(0) from the equation itself.
    {
        std::vector<double> rhs(n), au(n);
        const bool of = problem.forcing(st.u.values(), st.z, rhs);
        apply_laplacian(d, st.u.values(), au);
        for (std::size_t k = 0; k < n; ++k) rhs[k] -= au[k];
        TraceRow row{0.0, norm_l2(st.u), norm_h1(st.u), e_cur, l2_of(rhs, d), st.z, 0.0};
        tr.rows.push_back(row);
        if (of || st.overflow) {
            tr.status = TerminalStatus::Overflow;
            tr.diagnostic = "initial data overflow";
            return tr;
        }
        if (rules.decay_h1 && row.h1 <= *rules.decay_h1) {
            tr.status = TerminalStatus::Decayed;
            return tr;
        }
        if (rules.blowup_l2 && row.l2 >= *rules.blowup_l2) {
            tr.status = TerminalStatus::BlowupFlag;
            return tr;
        }
    }

    const double a0 = spec.a.a0;
    std::vector<double> fbuf(n);
    auto f_norm = [&](const GridFunction& u) {
        for (std::size_t k = 0; k < n; ++k) fbuf[k] = f_eval(spec.f, u[k]).value;
        return l2_of(fbuf, d);
    };

    const double t_eps = 1e-12 * std::max(1.0, rules.T_max);
    while (true) {
        if (rules.T_max - st.t <= t_eps) {
            tr.status = TerminalStatus::ReachedTmax;
            break;
        }
        double dt = std::min(base_dt, rules.T_max - st.t);
        double f_old = 0.0;
        if (cfg.adaptive) {
            const double fp = problem.max_abs_fprime(st.u.values());
            if (fp > 0.0) dt = std::min(dt, cfg.stability_factor * std::min(1.0, a0) / fp);
            f_old = f_norm(st.u);
        }

        StepOutcome out;
        StepperConfig step_cfg = cfg;
        try {
            for (int halving = 0;; ++halving) {
                step_cfg.dt = dt;
                out = step_imex(st, problem, step_cfg);
                if (!cfg.adaptive || out.state.overflow || f_old == 0.0 || halving >= cfg.max_halvings) break;
                if (f_norm(out.state.u) <= cfg.growth_ratio * f_old) break;
                dt *= 0.5;
            }
        } catch (const NumericError& e) {
            tr.status = TerminalStatus::SolverFailure;
            tr.diagnostic = e.what();
            break;
        }
        if (out.state.overflow) {
            tr.status = TerminalStatus::Overflow;
            tr.diagnostic = fmt::format("nonlinearity overflow at t={}", st.t);
            tr.final_state.overflow = true;
            break;
        }
        // Step control shrank dt below the resolution of t: the solution
        // escapes in no representable time.
        if (out.state.t == st.t) {
            tr.status = TerminalStatus::Overflow;
            tr.diagnostic = fmt::format("time step underflow at t={} (dt={})", st.t, dt);
            tr.final_state.overflow = true;
            break;
        }

        double e_next = 0.0;
        try {
            e_next = energy(out.state.u, spec);
        } catch (const NumericError& e) {
            tr.status = TerminalStatus::Overflow;
            tr.diagnostic = e.what();
            tr.final_state = out.state;
            tr.final_state.overflow = true;
            break;
        }
        const double lres = lyapunov_residual_with(st, out.state, e_cur, e_next, problem);
        st = std::move(out.state);
        e_cur = e_next;
        ++tr.steps;
        tr.min_dt = std::min(tr.min_dt, dt);
        tr.max_dt = std::max(tr.max_dt, dt);
        tr.final_state = st;
        if (rules.observer) rules.observer(st, out.ut_l2);

        const double l2 = norm_l2(st.u);
        const double h1 = norm_h1(st.u);
        const TraceRow row{st.t, l2, h1, e_cur, out.ut_l2, st.z, lres};

        std::optional<TerminalStatus> stop;
        if (rules.decay_h1 && h1 <= *rules.decay_h1) stop = TerminalStatus::Decayed;
        else if (rules.blowup_l2 && l2 >= *rules.blowup_l2) stop = TerminalStatus::BlowupFlag;
        else if (rules.stationary_ut && out.ut_l2 <= *rules.stationary_ut &&
                 (!rules.decay_h1 || h1 > *rules.decay_h1))
            stop = TerminalStatus::Stationary;
        else if (rules.T_max - st.t <= t_eps) stop = TerminalStatus::ReachedTmax;

        if (stop || tr.steps % stride == 0) {
            tr.rows.push_back(row);
            if (!stop && rules.halt) stop = rules.halt(tr);
        }
        if (stop) {
            if (tr.rows.back().t != row.t) tr.rows.push_back(row);
            tr.status = *stop;
            break;
        }
    }
    return tr;
}

// ---------------------------------------------------------------------------

MildSolution mild_solution_oracle(const GridFunction& u0, const ProblemSpec& spec, double t_end, int n_sub) {
    if (n_sub < 16) throw ConfigError("mild_solution_oracle needs n_sub >= 16");
    if (t_end < 0.0) throw ConfigError("mild_solution_oracle needs t_end >= 0");
    if (t_end == 0.0) return {u0, 0, 0.0};

    const SpectralBasis basis(u0.domain());
    const DiscreteProblem problem(spec);
    const std::size_t nm = basis.size();
    const std::size_t nt = static_cast<std::size_t>(n_sub) + 1;
    const double ds = t_end / n_sub;

    std::vector<double> lam(nm), decay_step(nm);
    for (std::size_t m = 0; m < nm; ++m) {
        lam[m] = basis.eigenvalue(m);
        decay_step[m] = std::exp(-lam[m] * ds);
    }
    const std::vector<double> c0 = basis.to_modal(u0);

    // Free evolution e^{-A t_j} u0, also the first Picard iterate.
    std::vector<double> free(nt * nm);
    for (std::size_t j = 0; j < nt; ++j)
        for (std::size_t m = 0; m < nm; ++m) free[j * nm + m] = std::exp(-lam[m] * (ds * j)) * c0[m];

    std::vector<double> traj = free;
    std::vector<double> phi(nt * nm);
    std::vector<double> next(nt * nm);
    std::vector<double> work(u0.size());
    double prev_update = std::numeric_limits<double>::infinity();
    int growth_streak = 0;
    MildSolution out;

    for (int sweep = 1; sweep <= 50; ++sweep) {
        for (std::size_t j = 0; j < nt; ++j) {
            const GridFunction u = basis.from_modal(std::span<const double>(traj.data() + j * nm, nm));
            bool gof = false;
            const double z = nonlocal_value(u, spec.g, &gof);
            const bool fof = problem.forcing(u.values(), z, work);
            if (gof || fof) throw NumericError("mild solution oracle: nonlinearity overflow; reduce t_end");
            const std::vector<double> pm = basis.to_modal(GridFunction(u.domain(), work));
            std::copy(pm.begin(), pm.end(), phi.begin() + static_cast<std::ptrdiff_t>(j * nm));
        }
        double update = 0.0;
        for (std::size_t m = 0; m < nm; ++m) {
            double integral = 0.0;
            next[m] = free[m];
            for (std::size_t j = 1; j < nt; ++j) {
                integral = decay_step[m] * integral +
                           0.5 * ds * (decay_step[m] * phi[(j - 1) * nm + m] + phi[j * nm + m]);
                next[j * nm + m] = free[j * nm + m] + integral;
            }
        }
        for (std::size_t j = 0; j < nt; ++j) {
            double s = 0.0;
            for (std::size_t m = 0; m < nm; ++m) {
                const double dlt = next[j * nm + m] - traj[j * nm + m];
                s += dlt * dlt;
            }
            update = std::max(update, std::sqrt(s));
        }
        traj.swap(next);
        out.picard_iterations = sweep;
        out.last_update = update;
        if (!std::isfinite(update)) throw NumericError("mild solution oracle: Picard iterates diverged; reduce t_end");
        if (update < 1e-8) break;
        growth_streak = (sweep > 2 && update > prev_update) ? growth_streak + 1 : 0;
        if (growth_streak >= 3) {
            throw NumericError(fmt::format(
                "mild solution oracle: Picard map is not contracting on [0, {}] (update {} after {} sweeps); "
                "reduce t_end",
                t_end, update, sweep));
        }
        prev_update = update;
    }
    out.u = basis.from_modal(std::span<const double>(traj.data() + (nt - 1) * nm, nm));
    return out;
}

void write_trace_csv(std::ostream& os, const FlowTrace& trace) {
    os << "t,l2,h1,energy,ut_l2,z,lyap_res\n";
    for (const TraceRow& r : trace.rows) {
        os << format_real(r.t) << ',' << format_real(r.l2) << ',' << format_real(r.h1) << ','
           << format_real(r.energy) << ',' << format_real(r.ut_l2) << ',' << format_real(r.z) << ','
           << format_real(r.lyap_res) << '\n';
    }
}

}  // namespace nlheat
