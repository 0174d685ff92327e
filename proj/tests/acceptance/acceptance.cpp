// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance OUTPUT_DIR

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nlheat/classify.hpp"
#include "nlheat/conditions.hpp"
#include "nlheat/config.hpp"
#include "nlheat/discrete.hpp"
#include "nlheat/flow.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/presets.hpp"
#include "nlheat/runner.hpp"
#include "nlheat/threshold.hpp"

using namespace nlheat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

std::string find_result(const RunManifest& m, const std::string& key) {
    for (const auto& [k, v] : m.results)
        if (k == key) return v;
    return "nan";
}

fs::path g_out;

RunConfig steady_example2(const std::string& dir) {
    return resolve_config({{"preset", "example2"}, {"run.out", (g_out / dir).string()}});
}

// 1. Heat decay rate against the closed-form discrete eigenvalue.
Outcome linear_decay() {
    const RectDomain d(1, 1, 32, 32);
    StepperConfig sc;
    sc.dt = 1e-4;
    StopRules rules;
    rules.T_max = 0.5;
    rules.blowup_l2 = 1e300;
    const FlowTrace tr = evolve(first_mode(d), make_preset("heat", d), sc, rules);
    double st = 0, sy = 0, stt = 0, sty = 0;
    const double n = static_cast<double>(tr.rows.size());
    for (const TraceRow& r : tr.rows) {
        st += r.t;
        sy += std::log(r.l2);
        stt += r.t * r.t;
        sty += r.t * std::log(r.l2);
    }
    const double rate = -(n * sty - st * sy) / (n * stt - st * st);
    const double lambda = dirichlet_eigenvalue(d, 1, 1);
    const double rel = std::abs(rate - lambda) / lambda;
    return {tr.status == TerminalStatus::ReachedTmax && rel <= 0.01,
            "rate=" + num(rate) + " lambda1=" + num(lambda) + " rel_err=" + num(rel) + " (tol 0.01)"};
}

// 2. IMEX against the Picard mild-solution oracle.
Outcome mild_equivalence() {
    const RectDomain d(1, 1, 9, 9);
    const ProblemSpec spec = make_preset("example2", d);
    GridFunction u0 = first_mode(d);
    u0 *= 0.1 / norm_h1(u0);
    StepperConfig sc;
    sc.dt = 1e-4;
    StopRules rules;
    rules.T_max = 0.05;
    rules.blowup_l2 = 1e300;
    const FlowTrace tr = evolve(u0, spec, sc, rules);
    const MildSolution mild = mild_solution_oracle(u0, spec, 0.05, 500);
    const double diff = norm_l2(tr.final_state.u - mild.u);
    return {tr.status == TerminalStatus::ReachedTmax && diff < 1e-4, "l2_diff=" + num(diff) + " (tol 1e-4)"};
}

// 3. Lyapunov residual along a trajectory, and exact gradient flow when saturated.
Outcome lyapunov() {
    const RectDomain d(1, 1, 32, 32);
    StepperConfig sc;
    sc.dt = 1e-4;
    StopRules rules;
    rules.T_max = 0.5;
    rules.blowup_l2 = 1e300;
    const FlowTrace tr = evolve(first_mode(d), make_preset("cubic", d), sc, rules);
    double max_dEdt = 0.0;
    std::vector<double> res;
    for (std::size_t i = 1; i < tr.rows.size(); ++i) {
        const double h = tr.rows[i].t - tr.rows[i - 1].t;
        max_dEdt = std::max(max_dEdt, std::abs(tr.rows[i].energy - tr.rows[i - 1].energy) / h);
        res.push_back(tr.rows[i].lyap_res);
    }
    const double med = median(res);
    const bool identity_ok = med <= 5.0 * sc.dt * max_dEdt;

    const ProblemSpec ex2 = make_preset("example2", d);
    const DiscreteProblem dp(ex2);
    FlowState s = FlowState::initial(3.0 * first_mode(d), ex2);
    bool saturated = true, psi_zero = true, monotone = true;
    std::vector<double> psi(s.u.size());
    double worst = -1e300;
    for (int k = 0; k < 200; ++k) {
        saturated = saturated && s.z >= ex2.a.K;
        dp.psi(s.u.values(), s.z, psi);
        psi_zero = psi_zero && std::all_of(psi.begin(), psi.end(), [](double x) { return x == 0.0; });
        const double E0 = energy(s.u, ex2);
        s = step_imex(s, ex2, sc).state;
        const double rise = energy(s.u, ex2) - E0;
        worst = std::max(worst, rise);
        monotone = monotone && rise <= 10.0 * sc.dt * sc.dt * std::max(1.0, std::abs(E0));
    }
    return {identity_ok && saturated && psi_zero && monotone,
            "median_res=" + num(med) + " bound=" + num(5.0 * sc.dt * max_dEdt) +
                " saturated=" + (saturated ? "yes" : "no") + " psi_zero=" + (psi_zero ? "yes" : "no") +
                " max_energy_rise=" + num(worst)};
}

// 4. Cubic blow-up with certificate, classifier and concavity indicator.
Outcome blowup() {
    const RectDomain d(1, 1, 32, 32);
    const ProblemSpec spec = make_preset("cubic", d);
    const GridFunction u0 = 50.0 * first_mode(d);
    ClassifierConfig cfg;
    cfg.confirm_growth = true;
    const BlowupCertificate cert = blowup_sufficient(u0, spec, cfg);
    const Classification c = classify_trajectory(u0, spec, cfg);
    const ConcavitySeries cs = concavity_indicator(c.trace, spec.f.gamma);
    return {cert.holds && c.verdict == Verdict::BlowUp && std::isfinite(c.t_detect) && cs.tail_fraction >= 0.9,
            std::string("certificate=") + (cert.holds ? "yes" : "no") + " verdict=" + to_string(c.verdict) +
                " t_detect=" + num(c.t_detect) + " concavity_fraction=" + num(cs.tail_fraction) + " (min 0.9)"};
}

RunManifest g_steady;
RunConfig g_steady_cfg;

// 5. steady end to end on Example 2.
Outcome steady_pipeline() {
    g_steady_cfg = steady_example2("c5_steady");
    g_steady = run_subcommand(g_steady_cfg, "steady");
    const double res = std::stod(find_result(g_steady, "residual_l2"));
    const double h1 = std::stod(find_result(g_steady, "h1_norm"));
    const double s_star = std::stod(find_result(g_steady, "s_star"));
    const double eps = g_steady_cfg.classifier.resolved_eps_decay(s_star * make_direction(g_steady_cfg));
    return {g_steady.exit_code == 0 && res <= 1e-8 && h1 >= 10.0 * eps,
            "exit=" + std::to_string(g_steady.exit_code) + " s_star=" + num(s_star) + " residual_l2=" + num(res) +
                " h1=" + num(h1) + " 10*eps_decay=" + num(10.0 * eps)};
}

// Independent RK4 shooting for -u'' = u^3 on (0, 1), u(0) = u(1) = 0, u > 0.
double shoot_end(double sigma, int steps, std::vector<double>* samples, int per_node) {
    double y = 0.0, p = sigma;
    const double h = 1.0 / steps;
    for (int k = 1; k <= steps; ++k) {
        const double k1y = p, k1p = -y * y * y;
        const double y2 = y + 0.5 * h * k1y, p2 = p + 0.5 * h * k1p;
        const double k2y = p2, k2p = -y2 * y2 * y2;
        const double y3 = y + 0.5 * h * k2y, p3 = p + 0.5 * h * k2p;
        const double k3y = p3, k3p = -y3 * y3 * y3;
        const double y4 = y + h * k3y, p4 = p + h * k3p;
        const double k4y = p4, k4p = -y4 * y4 * y4;
        y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y);
        p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
        if (samples && k % per_node == 0) samples->push_back(y);
    }
    return y;
}

std::vector<double> shooting_profile(int nx) {
    const int per_node = 200, steps = per_node * (nx + 1);
    double lo = 5.0, hi = 14.0;  // u(1) > 0 at lo, < 0 at hi
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (shoot_end(mid, steps, nullptr, per_node) > 0.0 ? lo : hi) = mid;
    }
    std::vector<double> u;
    shoot_end(0.5 * (lo + hi), steps, &u, per_node);
    u.resize(static_cast<std::size_t>(nx));
    return u;
}

// 6. Channel steady state against shooting.
Outcome channel_shooting() {
    const RunConfig cfg = resolve_config({{"preset", "cubic"},
                                          {"grid.nx", "63"},
                                          {"grid.ny", "3"},
                                          {"grid.y_boundary", "periodic"},
                                          {"run.out", (g_out / "c6_channel").string()}});
    const RunManifest m = run_subcommand(cfg, "steady");
    if (m.exit_code != 0) return {false, "steady exit=" + std::to_string(m.exit_code) + " " + m.error};
    const GridFunction us = read_field_dump((cfg.output_dir / "steady_state.dat").string(), YBoundary::Periodic);
    const std::vector<double> prof = shooting_profile(63);
    const RectDomain& d = us.domain();
    const GridFunction ref = sample(d, [&](Point p) {
        return prof[static_cast<std::size_t>(std::lround(p.x / d.hx()) - 1)];
    });
    const double err = norm_l2(us - ref);
    return {err <= 1e-3, "l2_err=" + num(err) + " (tol 1e-3) max_shoot=" +
                             num(*std::max_element(prof.begin(), prof.end()))};
}

// 7. The two residual forms on random fields.
Outcome form_equivalence() {
    const RectDomain d(1, 1, 32, 32);
    const ProblemSpec spec = make_preset("example2", d);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        GridFunction u = random_smooth_field(d, seed);
        u *= 0.05 * static_cast<double>(seed % 20 + 1);
        const double p = residual(u, spec), q = residual_rewritten(u, spec);
        worst = std::max(worst, std::abs(p - q) / std::max(1.0, p));
    }
    return {worst <= 1e-12, "max_rel_diff=" + num(worst) + " (tol 1e-12)"};
}

// 8. Hypothesis verifier on the examples and three violators.
Outcome verifier() {
    const RectDomain d(1, 1, 32, 32);
    bool ok = true;
    std::string detail;
    for (const char* name : {"example1", "example2"}) {
        const bool pass = verify_conditions(make_preset(name, d)).all_pass();
        ok = ok && pass;
        detail += std::string(name) + (pass ? "=pass " : "=FAIL ");
    }
    const auto expect_fail = [&](const char* label, ProblemSpec s, const char* cond) {
        const ConditionResult& r = verify_conditions(s).get(cond);
        const bool failed = r.verdict == ConditionVerdict::Fail && !r.witnesses.empty();
        ok = ok && failed;
        detail += std::string(label) + ":" + cond + "=" + to_string(r.verdict) + "/" +
                  std::to_string(r.witnesses.size()) + "w ";
    };
    ProblemSpec s = make_preset("example2", d);
    s.g = NonlocalModel::constant(-1.0);
    expect_fail("negative_g", s, "H");
    s = make_preset("example2", d);
    s.f = NonlinearityModel::linear(1.0, 0.5);
    expect_fail("linear_f", s, "f3");
    s = make_preset("example2", d);
    s.a = CoefficientModel::product(0.5, 1.0, SpatialProfile::sine(1.0, 1.0), CutoffProfile::gaussian(0.5, 1.0));
    expect_fail("gaussian_h", s, "a2");
    return {ok, detail};
}

// 9. A second steady run reproduces every output CSV byte for byte.
Outcome determinism() {
    const RunConfig cfg = steady_example2("c9_steady");
    const RunManifest m = run_subcommand(cfg, "steady");
    int compared = 0, differing = 0;
    for (const FileEntry& a : g_steady.files) {
        if (a.path.size() < 4 || a.path.substr(a.path.size() - 4) != ".csv") continue;
        ++compared;
        const auto it = std::find_if(m.files.begin(), m.files.end(), [&](const FileEntry& b) { return b.path == a.path; });
        if (it == m.files.end() || it->sha256 != a.sha256) ++differing;
    }
    return {m.exit_code == 0 && g_steady.exit_code == 0 && compared >= 5 && differing == 0,
            "csv_files=" + std::to_string(compared) + " differing=" + std::to_string(differing)};
}

struct Criterion {
    int id;
    const char* name;
    double max_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    g_out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::remove_all(g_out);
    fs::create_directories(g_out);

    const std::vector<Criterion> criteria{
        {1, "linear decay rate", 10.0, linear_decay},
        {2, "mild solution equivalence", 30.0, mild_equivalence},
        {3, "lyapunov identity", 1e300, lyapunov},
        {4, "cubic blow-up", 20.0, blowup},
        {5, "steady pipeline", 300.0, steady_pipeline},
        {6, "channel vs shooting", 120.0, channel_shooting},
        {7, "residual form equivalence", 1e300, form_equivalence},
        {8, "hypothesis verifier", 5.0, verifier},
        {9, "steady determinism", 1e300, determinism},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.max_seconds;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::string limit = c.max_seconds < 1e300 ? " limit=" + num(c.max_seconds) + "s" : "";
        std::printf("criterion %d %s: %s %s time=%.2fs%s%s\n", c.id, c.name, pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs, limit.c_str(), in_time ? "" : " (over time limit)");
        std::fflush(stdout);
    }
    std::printf("%s: %d of %zu criteria failed\n", failures ? "FAIL" : "PASS", failures, criteria.size());
    return failures ? 1 : 0;
}
