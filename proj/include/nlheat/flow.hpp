#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlheat/discrete.hpp"
#include "nlheat/grid.hpp"

namespace nlheat {

/// State of u_t + A u = f(u) + Psi(x, u, z) with the cached nonlocal value
/// z = int g(u).
struct FlowState {
    GridFunction u;
    double t = 0.0;
    double z = 0.0;
    bool overflow = false;

    static FlowState initial(const GridFunction& u0, const ProblemSpec& spec);
};

/// min(0.25 h^2, 1e-3) with h the smaller spacing.
double default_dt(const RectDomain& d);

struct StepperConfig {
    double dt = 0.0;  ///< <= 0 selects default_dt
    double solver_tol = 1e-10;
    int max_cg_iters = 2000;
    /// Step control used by evolve: the step is capped at
    /// stability_factor * a0 / max|f'(u)| and halved while |f(u+)|/|f(u)|
    /// exceeds growth_ratio.
    bool adaptive = true;
    double growth_ratio = 10.0;
    double stability_factor = 0.1;
    int max_halvings = 60;

    void validate() const;
    double resolved_dt(const RectDomain& d) const { return dt > 0.0 ? dt : default_dt(d); }
};

struct StepOutcome {
    FlowState state;
    double ut_l2 = 0.0;  ///< |(u+ - u)/dt|_L2
    int cg_iterations = 0;
};

/// One semi-implicit step of size cfg.dt (or the default):
/// (I + dt A) u+ = u + dt (f(u) + Psi(x, u, z)), z frozen at the old level,
/// solved in increment form so solver_tol is relative to u+ - u.
/// On overflow the returned state keeps u and t and carries the flag.
/// Throws NumericError when CG does not converge.
StepOutcome step_imex(const FlowState& s, const DiscreteProblem& problem, const StepperConfig& cfg);
StepOutcome step_imex(const FlowState& s, const ProblemSpec& spec, const StepperConfig& cfg);

enum class TerminalStatus { ReachedTmax, Decayed, BlowupFlag, Stationary, Overflow, SolverFailure };

const char* to_string(TerminalStatus s);

struct TraceRow {
    double t = 0.0;
    double l2 = 0.0;
    double h1 = 0.0;
    double energy = 0.0;
    double ut_l2 = 0.0;
    double z = 0.0;
    double lyap_res = 0.0;
};

struct FlowTrace {
    std::vector<TraceRow> rows;
    TerminalStatus status = TerminalStatus::ReachedTmax;
    FlowState final_state;
    std::string diagnostic;
    long steps = 0;
    double min_dt = 0.0;
    double max_dt = 0.0;
};

struct StopRules {
    double T_max = 50.0;
    std::optional<double> decay_h1;       ///< Decayed once |u|_H1 <= value
    std::optional<double> blowup_l2;      ///< BlowupFlag once |u|_L2 >= value
    std::optional<double> stationary_ut;  ///< Stationary once |u_t|_L2 <= value
    int trace_stride = 1;
    /// Extra predicate checked after each recorded row.
    std::function<std::optional<TerminalStatus>(const FlowTrace&)> halt;
    /// Called after every accepted step with the new state and |u_t|_L2.
    std::function<void(const FlowState&, double)> observer;

    bool has_halting_predicate() const {
        return decay_h1 || blowup_l2 || stationary_ut || static_cast<bool>(halt);
    }
};

/// Integrates from u0 until a stop rule fires, recording a row at t = 0,
/// every trace_stride steps, and at the terminal state.
FlowTrace evolve(const GridFunction& u0, const ProblemSpec& spec, const StepperConfig& cfg,
                 const StopRules& rules);

/// |dE/dt + |u_t|^2 - <Psi, u_t>| for two consecutive states, with E
/// differenced across the step and Psi taken at the midpoint state.
double lyapunov_residual(const FlowState& prev, const FlowState& next, const ProblemSpec& spec);

struct MildSolution {
    GridFunction u;
    int picard_iterations = 0;
    double last_update = 0.0;
};

/// Picard iteration of u(t) = e^{-At}u0 + int_0^t e^{-A(t-s)} Phi(u(s)) ds on
/// [0, t_end] in the exact eigenbasis, with composite trapezoid quadrature on
/// n_sub panels. Stops when successive trajectories differ by < 1e-8 in
/// sup-L2 or after 50 sweeps. Throws NumericError when the iterates grow.
MildSolution mild_solution_oracle(const GridFunction& u0, const ProblemSpec& spec, double t_end, int n_sub);

/// CSV with header t,l2,h1,energy,ut_l2,z,lyap_res.
void write_trace_csv(std::ostream& os, const FlowTrace& trace);

}  // namespace nlheat
