#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nlheat/classify.hpp"

namespace nlheat {

struct ThresholdConfig {
    double tol_s = 1e-10;  ///< bracket width relative to s_high
    int max_iters = 80;
    double s_start = 1.0;
    double s_cap = 1e9;     ///< give up on an upper bracket beyond this
    double s_floor = 1e-12; ///< give up on a lower bracket below this
    /// Plateau test |u_t|_L2 <= plateau_ut * max(1, |u|_H1).
    double plateau_ut = 1e-6;
    /// Cauchy test between neighbouring plateau snapshots, in H1, scaled
    /// like plateau_ut.
    double cauchy_tol = 1e-3;
    int snapshot_stride = 10;
    double newton_tol = 1e-8;
    int newton_max_iters = 30;

    void validate() const;
};

/// One classified point on the ray.
struct RayProbe {
    double s = 0.0;
    Verdict verdict = Verdict::Undecided;
    Trigger trigger = Trigger::None;
    double t_detect = 0.0;
    int escalation = 0;      ///< 0 none, 1 T_max x4, 2 dt / 4, 3 energy-sign tie-break
};

/// Classification with the Undecided escalation applied: T_max x4, then
/// dt / 4, then E(u(T)) < 0 counts as BlowUp and anything else as decay.
struct EscalatedClassification {
    Classification c;
    Verdict effective = Verdict::Undecided;
    int escalation = 0;
};

EscalatedClassification classify_escalated(const GridFunction& u0, const ProblemSpec& spec,
                                           const ClassifierConfig& cfg);

struct Bracket {
    double s_low = 0.0;
    double s_high = 0.0;
};

/// Doubles up (or halves down) from tcfg.s_start until s_low v decays and
/// s_high v blows up. Throws MethodError "no upper bracket" / "no lower
/// bracket".
Bracket bracket_ray(const GridFunction& v, const ProblemSpec& spec, const ClassifierConfig& ccfg,
                    const ThresholdConfig& tcfg, std::vector<RayProbe>* history = nullptr);

struct ThresholdResult {
    double s_star = 0.0;
    double s_low = 0.0;
    double s_high = 0.0;
    int iterations = 0;
    std::vector<RayProbe> history;
    bool inconclusive = false;           ///< a midpoint needed the energy-sign tie-break
    bool monotonicity_violation = false; ///< some BlowUp probe lies below a decay probe
    FlowTrace decay_trace;
    FlowTrace blowup_trace;
};

/// True if some BlowUp probe lies below a decaying one.
bool ray_monotonicity_violation(const std::vector<RayProbe>& history);

/// Verdict oracle for bisect_with; lets the bisection run on synthetic
/// classifiers.
using RayOracle = std::function<RayProbe(double s)>;

ThresholdResult bisect_with(const RayOracle& oracle, Bracket bracket, const ThresholdConfig& tcfg);

ThresholdResult bisect(const GridFunction& v, Bracket bracket, const ProblemSpec& spec, const ClassifierConfig& ccfg,
                       const ThresholdConfig& tcfg);

struct SteadyState {
    GridFunction u_s;
    double residual_l2 = 0.0;  ///< |a (A u) - f(u)|_L2
    double energy = 0.0;
    double z_s = 0.0;
    double h1_norm = 0.0;
    int iterations = 0;
    std::string method;        ///< "snapshot", "newton" or "picard"
    double t_snapshot = 0.0;   ///< plateau time of the chosen snapshot
    double ut_snapshot = 0.0;  ///< |u_t|_L2 at that time
    double cauchy_h1 = 0.0;    ///< H1 gap to the neighbouring plateau snapshot
    bool cauchy_ok = false;
};

/// |a(., z)(A u) - f(u)|_L2 with z = int g(u).
double residual(const GridFunction& u, const ProblemSpec& spec);
/// The same residual assembled from the rewritten form, |a (A u - f - Psi)|_L2.
double residual_rewritten(const GridFunction& u, const ProblemSpec& spec);
/// |A u - f(u) - Psi(u, int g(u))|_L2, the quantity Newton drives to zero.
double stationary_defect(const GridFunction& u, const ProblemSpec& spec);

/// Evolves from s_low v and s_high v, keeps snapshots where |u_t| is on a
/// plateau and |u|_H1 > eps_nontrivial, and returns the one with the
/// smallest residual. Throws MethodError if no plateau is seen.
SteadyState extract_omega_limit(const GridFunction& v, const ThresholdResult& tr, const ProblemSpec& spec,
                                const ClassifierConfig& ccfg, const ThresholdConfig& tcfg);

/// Newton on R(u) = A u - f(u) - Psi(u, int g(u)) with the rank-one
/// nonlocal term solved by Sherman-Morrison on a sparse LU of the local
/// part; frozen-z Picard as fallback. Refuses |u|_H1 < eps_nontrivial.
SteadyState newton_refine(const GridFunction& u, const ProblemSpec& spec, double tol, double eps_nontrivial,
                          int max_iters = 30);

struct SteadyPipeline {
    Bracket bracket;
    ThresholdResult threshold;
    SteadyState candidate;
    SteadyState refined;
};

/// bracket_ray, bisect, extract_omega_limit and newton_refine in sequence.
SteadyPipeline run_steady_pipeline(const GridFunction& v, const ProblemSpec& spec, const ClassifierConfig& ccfg,
                                   const ThresholdConfig& tcfg);

/// Flat CSV of the bracket history: s,verdict,trigger,t_detect,escalation.
void write_ray_history_csv(std::ostream& os, const std::vector<RayProbe>& history);

}  // namespace nlheat
