#include "nlheat/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "nlheat/discrete.hpp"
#include "nlheat/errors.hpp"

namespace nlheat {

void ThresholdConfig::validate() const {
    if (!(tol_s > 0.0 && tol_s < 1.0)) throw ConfigError("threshold.tol_s must lie in (0, 1)");
    if (max_iters < 1) throw ConfigError("threshold.max_iters must be >= 1");
    if (!(s_start > 0.0)) throw ConfigError("threshold.s_start must be > 0");
    if (!(s_cap > s_start)) throw ConfigError("threshold.s_cap must exceed threshold.s_start");
    if (!(s_floor > 0.0 && s_floor < s_start)) throw ConfigError("threshold.s_floor must lie in (0, s_start)");
    if (!(plateau_ut > 0.0)) throw ConfigError("threshold.plateau_ut must be > 0");
    if (!(cauchy_tol > 0.0)) throw ConfigError("threshold.cauchy_tol must be > 0");
    if (snapshot_stride < 1) throw ConfigError("threshold.snapshot_stride must be >= 1");
    if (!(newton_tol > 0.0)) throw ConfigError("threshold.newton_tol must be > 0");
    if (newton_max_iters < 1) throw ConfigError("threshold.newton_max_iters must be >= 1");
}

// ---------------------------------------------------------------------------
// Ray search.

EscalatedClassification classify_escalated(const GridFunction& u0, const ProblemSpec& spec,
                                           const ClassifierConfig& cfg) {
    EscalatedClassification out;
    out.c = classify_trajectory(u0, spec, cfg);
    if (out.c.verdict != Verdict::Undecided) {
        out.effective = out.c.verdict;
        return out;
    }
    ClassifierConfig longer = cfg;
    longer.T_max *= 4.0;
    out.c = classify_trajectory(u0, spec, longer);
    out.escalation = 1;
    if (out.c.verdict != Verdict::Undecided) {
        out.effective = out.c.verdict;
        return out;
    }
    ClassifierConfig finer = longer;
    finer.stepper.dt = cfg.stepper.resolved_dt(spec.domain) / 4.0;
    out.c = classify_trajectory(u0, spec, finer);
    out.escalation = 2;
    if (out.c.verdict != Verdict::Undecided) {
        out.effective = out.c.verdict;
        return out;
    }
    out.escalation = 3;
    const double e_end = out.c.trace.rows.empty() ? out.c.E0 : out.c.trace.rows.back().energy;
    out.effective = e_end < 0.0 ? Verdict::BlowUp : Verdict::DecayToZero;
    return out;
}

namespace {

RayProbe probe_of(double s, const EscalatedClassification& ec) {
    return {s, ec.effective, ec.c.trigger, ec.c.t_detect, ec.escalation};
}

}  // namespace

Bracket bracket_ray(const GridFunction& v, const ProblemSpec& spec, const ClassifierConfig& ccfg,
                    const ThresholdConfig& tcfg, std::vector<RayProbe>* history) {
    tcfg.validate();
    if (!(norm_h1(v) > 0.0)) throw ConfigError("ray direction must be nonzero");
    auto probe = [&](double s) {
        const RayProbe p = probe_of(s, classify_escalated(s * v, spec, ccfg));
        if (history) history->push_back(p);
        return p;
    };

    double s = tcfg.s_start;
    RayProbe p = probe(s);
    if (p.verdict != Verdict::BlowUp) {
        double low = s;
        while (true) {
            s *= 2.0;
            if (s > tcfg.s_cap)
                throw MethodError(fmt::format("no upper bracket: every probe up to s = {} decays", low));
            p = probe(s);
            if (p.verdict == Verdict::BlowUp) return {low, s};
            low = s;
        }
    }
    double high = s;
    while (true) {
        s *= 0.5;
        if (s < tcfg.s_floor)
            throw MethodError(fmt::format("no lower bracket: every probe down to s = {} blows up", high));
        p = probe(s);
        if (p.verdict != Verdict::BlowUp) return {s, high};
        high = s;
    }
}

bool ray_monotonicity_violation(const std::vector<RayProbe>& history) {
    double max_decay = -std::numeric_limits<double>::infinity();
    double min_blow = std::numeric_limits<double>::infinity();
    for (const RayProbe& p : history) {
        if (p.verdict == Verdict::BlowUp) min_blow = std::min(min_blow, p.s);
        else max_decay = std::max(max_decay, p.s);
    }
    return min_blow < max_decay;
}

ThresholdResult bisect_with(const RayOracle& oracle, Bracket bracket, const ThresholdConfig& tcfg) {
    tcfg.validate();
    if (!(bracket.s_low >= 0.0 && bracket.s_low < bracket.s_high))
        throw ConfigError("bisection needs 0 <= s_low < s_high");
    ThresholdResult r;
    double lo = bracket.s_low, hi = bracket.s_high;
    while (hi - lo > tcfg.tol_s * hi && r.iterations < tcfg.max_iters) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;  // bracket at floating-point resolution
        const RayProbe p = oracle(mid);
        r.history.push_back(p);
        if (p.escalation >= 3) r.inconclusive = true;
        if (p.verdict == Verdict::BlowUp) hi = mid;
        else lo = mid;
        ++r.iterations;
    }
    if (hi - lo > tcfg.tol_s * hi) r.inconclusive = true;
    r.s_low = lo;
    r.s_high = hi;
    r.s_star = 0.5 * (lo + hi);

    r.monotonicity_violation = ray_monotonicity_violation(r.history);
    return r;
}

ThresholdResult bisect(const GridFunction& v, Bracket bracket, const ProblemSpec& spec, const ClassifierConfig& ccfg,
                       const ThresholdConfig& tcfg) {
    FlowTrace decay_trace, blowup_trace;
    auto oracle = [&](double s) {
        EscalatedClassification ec = classify_escalated(s * v, spec, ccfg);
        if (ec.effective == Verdict::BlowUp) blowup_trace = std::move(ec.c.trace);
        else decay_trace = std::move(ec.c.trace);
        return probe_of(s, ec);
    };
    ThresholdResult r = bisect_with(oracle, bracket, tcfg);
    r.decay_trace = std::move(decay_trace);
    r.blowup_trace = std::move(blowup_trace);
    return r;
}

// ---------------------------------------------------------------------------
// Residuals.

namespace {

double weighted_l2(const std::vector<double>& v, const RectDomain& d) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s * d.cell_area());
}

}  // namespace

double residual(const GridFunction& u, const ProblemSpec& spec) {
    const DiscreteProblem problem(spec);
    const RectDomain& d = spec.domain;
    std::vector<double> au(d.size()), r(d.size());
    apply_laplacian(d, u.values(), au);
    const double hz = problem.cutoff(nonlocal_value(u, spec.g));
    for (std::size_t k = 0; k < d.size(); ++k) r[k] = problem.coefficient(k, hz) * au[k] - f_eval(spec.f, u[k]).value;
    return weighted_l2(r, d);
}

double residual_rewritten(const GridFunction& u, const ProblemSpec& spec) {
    const DiscreteProblem problem(spec);
    const RectDomain& d = spec.domain;
    std::vector<double> au(d.size()), rhs(d.size()), r(d.size());
    apply_laplacian(d, u.values(), au);
    const double z = nonlocal_value(u, spec.g);
    problem.forcing(u.values(), z, rhs);
    const double hz = problem.cutoff(z);
    for (std::size_t k = 0; k < d.size(); ++k) r[k] = problem.coefficient(k, hz) * (au[k] - rhs[k]);
    return weighted_l2(r, d);
}

double stationary_defect(const GridFunction& u, const ProblemSpec& spec) {
    const DiscreteProblem problem(spec);
    const RectDomain& d = spec.domain;
    std::vector<double> au(d.size()), rhs(d.size());
    apply_laplacian(d, u.values(), au);
    problem.forcing(u.values(), nonlocal_value(u, spec.g), rhs);
    for (std::size_t k = 0; k < d.size(); ++k) au[k] -= rhs[k];
    return weighted_l2(au, d);
}

// ---------------------------------------------------------------------------
// omega-limit extraction.

namespace {

struct Snapshot {
    GridFunction u;
    double t = 0.0;
    double ut = 0.0;
};

struct SideResult {
    bool found = false;
    SteadyState best;
};

constexpr std::size_t kMaxSnapshots = 4000;

SideResult plateau_side(const GridFunction& u0, const ProblemSpec& spec, const ClassifierConfig& ccfg,
                        const ThresholdConfig& tcfg, double eps_nontrivial) {
    StopRules rules;
    rules.T_max = ccfg.T_max;
    rules.decay_h1 = ccfg.resolved_eps_decay(u0);
    rules.blowup_l2 = ccfg.resolved_blowup_l2(u0);
    rules.trace_stride = 1000;

    std::vector<Snapshot> snaps;
    long plateau_steps = 0;
    rules.observer = [&](const FlowState& st, double ut) {
        const double h1 = norm_h1(st.u);
        if (h1 <= eps_nontrivial || ut > tcfg.plateau_ut * std::max(1.0, h1)) {
            plateau_steps = 0;
            return;
        }
        if (plateau_steps++ % tcfg.snapshot_stride == 0 && snaps.size() < kMaxSnapshots)
            snaps.push_back({st.u, st.t, ut});
    };
    evolve(u0, spec, ccfg.stepper, rules);

    SideResult out;
    if (snaps.empty()) return out;
    std::size_t best = 0;
    double best_res = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        const double res = residual(snaps[i].u, spec);
        if (res < best_res) {
            best_res = res;
            best = i;
        }
    }
    const Snapshot& s = snaps[best];
    out.found = true;
    SteadyState& ss = out.best;
    ss.u_s = s.u;
    ss.residual_l2 = best_res;
    ss.energy = energy(s.u, spec);
    ss.z_s = nonlocal_value(s.u, spec.g);
    ss.h1_norm = norm_h1(s.u);
    ss.method = "snapshot";
    ss.t_snapshot = s.t;
    ss.ut_snapshot = s.ut;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j : {best - 1, best + 1}) {
        if (j < snaps.size()) gap = std::min(gap, norm_h1(snaps[j].u - s.u));
    }
    if (std::isfinite(gap)) {
        ss.cauchy_h1 = gap;
        ss.cauchy_ok = gap <= tcfg.cauchy_tol * std::max(1.0, ss.h1_norm);
    }
    return out;
}

}  // namespace

SteadyState extract_omega_limit(const GridFunction& v, const ThresholdResult& tr, const ProblemSpec& spec,
                                const ClassifierConfig& ccfg, const ThresholdConfig& tcfg) {
    tcfg.validate();
    if (tr.inconclusive) throw MethodError("cannot extract an omega-limit from an inconclusive threshold search");
    const double eps_nontrivial = 10.0 * ccfg.resolved_eps_decay(tr.s_star * v);
    SideResult low = plateau_side(tr.s_low * v, spec, ccfg, tcfg, eps_nontrivial);
    SideResult high = plateau_side(tr.s_high * v, spec, ccfg, tcfg, eps_nontrivial);
    if (!low.found && !high.found) throw MethodError("omega-limit not captured; tighten tol_s");
    if (!high.found) return low.best;
    if (!low.found) return high.best;
    return low.best.residual_l2 <= high.best.residual_l2 ? low.best : high.best;
}

// ---------------------------------------------------------------------------
// Newton refinement.

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

SpMat assemble_laplacian(const RectDomain& d) {
    const int nx = static_cast<int>(d.nx()), ny = static_cast<int>(d.ny());
    const double cx = 1.0 / (d.hx() * d.hx()), cy = 1.0 / (d.hy() * d.hy());
    const bool periodic = d.y_boundary() == YBoundary::Periodic;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(d.size() * 5);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int k = static_cast<int>(d.index(i, j));
            trip.emplace_back(k, k, 2.0 * cx + 2.0 * cy);
            if (i > 0) trip.emplace_back(k, static_cast<int>(d.index(i - 1, j)), -cx);
            if (i + 1 < nx) trip.emplace_back(k, static_cast<int>(d.index(i + 1, j)), -cx);
            if (periodic) {
                trip.emplace_back(k, static_cast<int>(d.index(i, (j + ny - 1) % ny)), -cy);
                trip.emplace_back(k, static_cast<int>(d.index(i, (j + 1) % ny)), -cy);
            } else {
                if (j > 0) trip.emplace_back(k, static_cast<int>(d.index(i, j - 1)), -cy);
                if (j + 1 < ny) trip.emplace_back(k, static_cast<int>(d.index(i, j + 1)), -cy);
            }
        }
    }
    SpMat a(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

/// Sparse LU of M = A - diag(diag_shift) with a singularity test.
class LocalSolver {
public:
    explicit LocalSolver(const SpMat& a) : a_(a) { lu_.analyzePattern(a_); }

    void factor(const Vec& diag_shift) {
        m_ = a_;
        for (Eigen::Index k = 0; k < m_.rows(); ++k) m_.coeffRef(k, k) -= diag_shift[k];
        lu_.factorize(m_);
        if (lu_.info() != Eigen::Success) throw NumericError("Jacobian is singular: sparse LU failed");
        // Inverse iteration for the eigenvalue of M nearest zero.
        double norm_m = 0.0;
        for (Eigen::Index k = 0; k < m_.outerSize(); ++k) {
            double s = 0.0;
            for (SpMat::InnerIterator it(m_, k); it; ++it) s += std::abs(it.value());
            norm_m = std::max(norm_m, s);
        }
        Vec x = Vec::LinSpaced(m_.rows(), 1.0, 2.0).normalized();
        double sigma = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 3; ++it) {
            Vec y = lu_.solve(x);
            const double ny = y.norm();
            if (!std::isfinite(ny)) throw NumericError("Jacobian is singular: non-finite inverse iterate");
            sigma = 1.0 / ny;
            x = y / ny;
        }
        sigma_rel_ = sigma / norm_m;
        if (sigma_rel_ < 1e-12)
            throw NumericError(fmt::format("Jacobian is singular: smallest eigenvalue estimate {} relative to |M|",
                                           sigma_rel_));
    }

    Vec solve(const Vec& rhs) const { return lu_.solve(rhs); }

private:
    SpMat a_;
    SpMat m_;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
    double sigma_rel_ = 0.0;
};

struct Defect {
    Vec r;
    double norm = 0.0;
    double z = 0.0;
};

Defect defect_of(const Vec& u, const DiscreteProblem& problem, const SpMat& a, const double* frozen_z = nullptr) {
    const RectDomain& d = problem.domain();
    const std::size_t n = d.size();
    Defect out;
    bool gof = false;
    const GridFunction gu(d, std::vector<double>(u.data(), u.data() + n));
    out.z = frozen_z ? *frozen_z : nonlocal_value(gu, problem.spec().g, &gof);
    std::vector<double> rhs(n);
    const bool fof = problem.forcing(gu.values(), out.z, rhs);
    out.r = a * u;
    for (std::size_t k = 0; k < n; ++k) out.r[static_cast<Eigen::Index>(k)] -= rhs[k];
    out.norm = (gof || fof || !out.r.allFinite()) ? std::numeric_limits<double>::infinity()
                                                  : out.r.norm() * std::sqrt(d.cell_area());
    return out;
}

/// f'(u)/a and, for the nonlocal column, b = -f B h'(z) / a^2 and c = hx hy g'(u).
void linearise(const Vec& u, double z, const DiscreteProblem& problem, Vec& diag, Vec& b, Vec& c) {
    const RectDomain& d = problem.domain();
    const ProblemSpec& spec = problem.spec();
    const Eigen::Index n = u.size();
    const double hz = problem.cutoff(z);
    const double dhz = problem.cutoff_derivative(z);
    diag.resize(n);
    b.resize(n);
    c.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const double a = problem.coefficient(kk, hz);
        diag[k] = fprime_eval(spec.f, u[k]).value / a;
        b[k] = dhz == 0.0 ? 0.0 : -f_eval(spec.f, u[k]).value * problem.profile(kk) * dhz / (a * a);
        c[k] = d.cell_area() * gprime_eval(spec.g, u[k]).value;
    }
}

SteadyState finish(const Vec& u, const ProblemSpec& spec, int iterations, const char* method) {
    SteadyState s;
    s.u_s = GridFunction(spec.domain, std::vector<double>(u.data(), u.data() + u.size()));
    s.residual_l2 = residual(s.u_s, spec);
    s.energy = energy(s.u_s, spec);
    s.z_s = nonlocal_value(s.u_s, spec.g);
    s.h1_norm = norm_h1(s.u_s);
    s.iterations = iterations;
    s.method = method;
    return s;
}

/// Backtracking on |R|; returns false when no step reduces it.
bool line_search(Vec& u, Defect& cur, const Vec& step, const DiscreteProblem& problem, const SpMat& a,
                 const double* frozen_z) {
    double lambda = 1.0;
    for (int k = 0; k < 30; ++k) {
        const Vec trial = u + lambda * step;
        Defect next = defect_of(trial, problem, a, frozen_z);
        if (next.norm < (1.0 - 1e-4 * lambda) * cur.norm) {
            u = trial;
            cur = std::move(next);
            return true;
        }
        lambda *= 0.5;
    }
    return false;
}

}  // namespace

SteadyState newton_refine(const GridFunction& u_in, const ProblemSpec& spec, double tol, double eps_nontrivial,
                          int max_iters) {
    if (!(tol > 0.0)) throw ConfigError("newton tolerance must be > 0");
    const double h1 = norm_h1(u_in);
    if (!(h1 >= eps_nontrivial))
        throw MethodError(fmt::format("refusing to refine a trivial candidate: |u|_H1 = {} < eps_nontrivial = {}", h1,
                                      eps_nontrivial));
    const DiscreteProblem problem(spec);
    const SpMat a = assemble_laplacian(spec.domain);
    LocalSolver solver(a);
    const Eigen::Index n = static_cast<Eigen::Index>(u_in.size());
    Vec u = Eigen::Map<const Vec>(u_in.values().data(), n);
    Vec diag, b, c;

    auto converged = [&](const Vec& x, double defect_norm) {
        if (defect_norm > tol) return false;
        const GridFunction g(spec.domain, std::vector<double>(x.data(), x.data() + n));
        return residual(g, spec) <= tol;
    };

    // Full Newton with the rank-one nonlocal column.
    Defect cur = defect_of(u, problem, a);
    bool newton_failed = false;
    std::string newton_note;
    int it = 0;
    for (; it < max_iters; ++it) {
        if (converged(u, cur.norm)) return finish(u, spec, it, "newton");
        linearise(u, cur.z, problem, diag, b, c);
        solver.factor(diag);
        const Vec y = solver.solve(-cur.r);
        Vec step = y;
        if (b.squaredNorm() > 0.0) {
            const Vec w = solver.solve(b);
            const double cw = c.dot(w);
            const double denom = 1.0 - cw;
            if (std::abs(denom) < 1e-12 * std::max(1.0, std::abs(cw)))
                throw NumericError("Jacobian is singular: rank-one update denominator vanishes");
            step += w * (c.dot(y) / denom);
        }
        if (!line_search(u, cur, step, problem, a, nullptr)) {
            newton_failed = true;
            newton_note = fmt::format("Newton stalled at |R| = {}", cur.norm);
            break;
        }
    }
    if (converged(u, cur.norm)) return finish(u, spec, it, "newton");
    if (!newton_failed) newton_note = fmt::format("Newton hit {} iterations at |R| = {}", max_iters, cur.norm);

    // Frozen-z Picard: Newton on the local problem, then update z.
    u = Eigen::Map<const Vec>(u_in.values().data(), n);
    int total = it;
    for (int outer = 0; outer < 50; ++outer) {
        const Defect full = defect_of(u, problem, a);
        if (converged(u, full.norm)) return finish(u, spec, total, "picard");
        const double z = full.z;
        Defect local = defect_of(u, problem, a, &z);
        for (int inner = 0; inner < max_iters && local.norm > 0.1 * tol; ++inner, ++total) {
            linearise(u, z, problem, diag, b, c);
            solver.factor(diag);
            const Vec step = solver.solve(-local.r);
            if (!line_search(u, local, step, problem, a, &z)) break;
        }
    }
    const Defect last = defect_of(u, problem, a);
    if (converged(u, last.norm)) return finish(u, spec, total, "picard");
    throw NumericError(fmt::format("steady-state refinement diverged: {}; Picard fallback ended at |R| = {}",
                                   newton_note, last.norm));
}

// ---------------------------------------------------------------------------

SteadyPipeline run_steady_pipeline(const GridFunction& v, const ProblemSpec& spec, const ClassifierConfig& ccfg,
                                   const ThresholdConfig& tcfg) {
    SteadyPipeline p;
    std::vector<RayProbe> history;
    p.bracket = bracket_ray(v, spec, ccfg, tcfg, &history);
    p.threshold = bisect(v, p.bracket, spec, ccfg, tcfg);
    p.threshold.history.insert(p.threshold.history.begin(), history.begin(), history.end());
    p.threshold.monotonicity_violation = ray_monotonicity_violation(p.threshold.history);
    if (p.threshold.inconclusive) throw MethodError("threshold bisection inconclusive");
    p.candidate = extract_omega_limit(v, p.threshold, spec, ccfg, tcfg);
    const double eps_nontrivial = 10.0 * ccfg.resolved_eps_decay(p.threshold.s_star * v);
    p.refined = newton_refine(p.candidate.u_s, spec, tcfg.newton_tol, eps_nontrivial, tcfg.newton_max_iters);
    p.refined.t_snapshot = p.candidate.t_snapshot;
    p.refined.ut_snapshot = p.candidate.ut_snapshot;
    p.refined.cauchy_h1 = p.candidate.cauchy_h1;
    p.refined.cauchy_ok = p.candidate.cauchy_ok;
    return p;
}

void write_ray_history_csv(std::ostream& os, const std::vector<RayProbe>& history) {
    os << "s,verdict,trigger,t_detect,escalation\n";
    for (const RayProbe& p : history) {
        os << format_real(p.s) << ',' << to_string(p.verdict) << ',' << to_string(p.trigger) << ','
           << format_real(p.t_detect) << ',' << p.escalation << '\n';
    }
}

}  // namespace nlheat
