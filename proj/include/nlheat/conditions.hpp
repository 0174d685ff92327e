#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nlheat/model.hpp"

namespace nlheat {

enum class ConditionVerdict { Pass, Fail, Inconclusive };

const char* to_string(ConditionVerdict v);

/// A sample where an inequality failed: lhs should have been <= rhs (or the
/// stated relation held the wrong way).
struct Witness {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ConditionResult {
    std::string name;  ///< H, a1, a2, f1, f2, f3, g, NEWEQ1
    ConditionVerdict verdict = ConditionVerdict::Pass;
    double estimate = 0.0;  ///< the condition's fitted constant, if any
    std::string estimate_name;
    double t_lo = 0.0;      ///< sampled |t| range actually used
    double t_hi = 0.0;
    std::vector<Witness> witnesses;
    std::string detail;
};

/// Where and how densely the verifier samples.
struct SamplePlan {
    double t_max = 1e3;
    double t_min = 1e-3;
    int t_samples = 10000;   ///< geometric in |t|, split between both signs
    int small_t_decades = 12;  ///< |t| = 10^-1 ... 10^-k for (f2)
    int x_lattice = 9;         ///< per axis, over the closed rectangle
    int z_samples = 401;       ///< over [-z_span K, z_span K]
    double z_span = 4.0;
    std::size_t max_witnesses = 5;
};

struct ConditionReport {
    std::vector<ConditionResult> results;
    int dimension = 2;

    const ConditionResult& get(const std::string& name) const;
    bool all_pass() const;
};

/// Sampled audit of (H), (a1), (a2), (f1), (f2), (f3), (g) and the
/// |t|^{2+gamma} <= c3 f(t) t + c4 consequence of (f3). Samples where an
/// evaluation overflows cut the |t| range, which is reported.
ConditionReport verify_conditions(const ProblemSpec& spec, const SamplePlan& plan = {});

/// CSV: condition,verdict,estimate_name,estimate,t_lo,t_hi,witnesses,detail
/// with witnesses as "t:x:y:z:lhs:rhs" joined by '|'.
void write_condition_report(std::ostream& os, const ConditionReport& report);

}  // namespace nlheat
