#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nlheat/flow.hpp"

namespace nlheat {

enum class Verdict { DecayToZero, BlowUp, Undecided };
enum class Trigger { None, NormThreshold, Overflow, Concavity, ExpGrowth, SufficientCondition };

const char* to_string(Verdict v);
const char* to_string(Trigger t);

/// Multi-start budget for the sphere minimisation behind M-hat.
struct MhatBudget {
    int restarts = 4;  ///< eigenmode starts first, then seeded random ones
    int max_iters = 400;
    double tol = 1e-9;  ///< relative energy change that counts as converged
    std::uint64_t seed = 1;
};

struct ClassifierConfig {
    double eps_decay = 0.0;  ///< <= 0: 1e-6 max(1, |u0|_H1)
    double M_blow = 1e6;  ///< scaled by max(1, |u0|_L2), see resolved_blowup_l2
    double T_max = 50.0;
    int growth_window = 10;
    double growth_slope = 0.5;
    double Kstar = 0.0;  ///< <= 0: 10 |e1|_H1 with |e1|_L2 = 1
    /// Floor for the energy decrease rate above K*; 0 disables the check.
    double delta_e = 0.0;
    int trace_stride = 1;
    /// Decide BlowUp up front when blowup_sufficient holds.
    bool use_certificate = false;
    /// Keep integrating after the growth detector fires, until the norm
    /// threshold, overflow or T_max; the detection time is kept.
    bool confirm_growth = false;
    StepperConfig stepper;
    MhatBudget mhat;

    void validate() const;
    double resolved_eps_decay(const GridFunction& u0) const;
    /// M_blow max(1, |u0|_L2): large data must still grow to count as blow-up.
    double resolved_blowup_l2(const GridFunction& u0) const;
    double resolved_Kstar(const RectDomain& d) const;
};

struct Classification {
    Verdict verdict = Verdict::Undecided;
    double t_detect = 0.0;
    Trigger trigger = Trigger::None;
    double E0 = 0.0;
    double h1_0 = 0.0;
    double eps_decay = 0.0;
    /// Smallest observed -dE/dt between recorded rows with |u|_H1 > K*
    /// (NaN if no such pair).
    double observed_decrease_rate = 0.0;
    std::string diagnostic;
    FlowTrace trace;
};

Classification classify_trajectory(const GridFunction& u0, const ProblemSpec& spec, const ClassifierConfig& cfg);

struct ConcavitySeries {
    std::vector<double> t;
    std::vector<double> H;
    std::vector<double> ell;
    /// Share of the tail (last half) second differences of ell that are
    /// negative. Zero when the series is empty.
    double tail_fraction = 0.0;
    bool empty() const noexcept { return t.empty(); }
};

/// H(t) = 1/2 int_0^t |u|_L2^2 by cumulative trapezoid, ell = H^{-gamma/2}
/// for t > 0. Empty when H vanishes identically.
ConcavitySeries concavity_indicator(const FlowTrace& trace, double gamma);

struct MhatEstimate {
    double Mhat = 0.0;         ///< -(lowest energy found on the sphere)
    double best_energy = 0.0;
    GridFunction best_u;
    int restarts = 0;
    int converged_restarts = 0;
    bool no_negative_energy = false;
};

/// Projected H1-gradient descent of E on |u|_H1 = Kstar from
/// budget.restarts starts. Restart i depends only on (i, seed), so a
/// larger budget extends the same sequence.
MhatEstimate estimate_Mhat(const ProblemSpec& spec, double Kstar, const MhatBudget& budget);

struct BlowupCertificate {
    bool holds = false;
    double Kstar = 0.0;
    double Mhat = 0.0;
    double E0 = 0.0;
    double h1_0 = 0.0;
    double bound = 0.0;  ///< min(-Mhat, -K/(2+gamma))
};

/// |u0|_H1 > K* and E(u0) < min(-M-hat, -K/(2+gamma)). Throws NumericError
/// when no restart of the sphere minimisation converged.
BlowupCertificate blowup_sufficient(const GridFunction& u0, const ProblemSpec& spec, const ClassifierConfig& cfg);

/// verdict,t_detect,trigger,E0,h1_0 and, with a certificate,
/// Kstar,Mhat,E_bound,certificate.
void write_classification_csv(std::ostream& os, const Classification& c, const BlowupCertificate* cert = nullptr);

}  // namespace nlheat
