#include "nlheat/runner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <functional>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "nlheat/errors.hpp"
#include "nlheat/grid.hpp"

#ifndef NLHEAT_VERSION
#define NLHEAT_VERSION "unknown"
#endif

namespace nlheat {

namespace fs = std::filesystem;

const char* software_version() { return NLHEAT_VERSION; }

const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names{"simulate", "classify", "threshold",
                                                "steady", "verify-conditions", "oracle-check"};
    return names;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string() + " for hashing");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw NumericError("sha256: digest initialisation failed");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

void write_manifest(std::ostream& os, const RunManifest& m) {
    os << "subcommand=" << m.subcommand << '\n';
    os << "version=" << m.version << '\n';
    for (const auto& [k, v] : m.config) os << "config." << k << '=' << v << '\n';
    os << "wall_clock_s=" << fmt::format("{:.3f}", m.wall_clock_s) << '\n';
    for (const StageStatus& s : m.stages) os << "stage." << s.name << '=' << s.status << '\n';
    for (const auto& [k, v] : m.results) os << "result." << k << '=' << v << '\n';
    for (const FileEntry& f : m.files) {
        os << "file." << f.path << ".bytes=" << f.bytes << '\n';
        os << "file." << f.path << ".sha256=" << f.sha256 << '\n';
    }
    os << "exit_code=" << m.exit_code << '\n';
    if (!m.error.empty()) os << "error=" << m.error << '\n';
}

namespace {

class Run {
public:
    Run(const RunConfig& cfg, RunManifest& m) : cfg_(cfg), m_(m) {}

    fs::path path(const std::string& name) const { return cfg_.output_dir / name; }

    std::ofstream open(const std::string& name) const {
        std::ofstream os(path(name));
        if (!os) throw ConfigError("cannot open " + path(name).string() + " for writing");
        return os;
    }

    /// Runs body as a named stage; on failure records it and rethrows.
    template <class Body>
    void stage(const std::string& name, Body&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            m_.stages.push_back({name, std::string("error: ") + e.what()});
            throw;
        }
        m_.stages.push_back({name, "ok"});
    }

    void result(const std::string& key, const std::string& value) { m_.results.emplace_back(key, value); }
    void result(const std::string& key, double value) { result(key, format_real(value)); }

    const RunConfig& cfg() const { return cfg_; }

private:
    const RunConfig& cfg_;
    RunManifest& m_;
};

void write_trace(const Run& run, const std::string& name, const FlowTrace& trace) {
    auto os = run.open(name);
    write_trace_csv(os, trace);
}

void run_simulate(Run& run) {
    const RunConfig& cfg = run.cfg();
    const GridFunction u0 = make_initial_datum(cfg);
    FlowTrace trace;
    run.stage("evolve", [&] {
        StopRules rules;
        rules.T_max = cfg.run.T_end;
        rules.blowup_l2 = cfg.classifier.resolved_blowup_l2(u0);
        rules.trace_stride = cfg.run.trace_stride;
        long step = 0;
        if (cfg.run.snapshot_stride > 0) {
            fs::create_directories(run.path("snapshots"));
            write_field_dump(run.path("snapshots/snap_000000.dat").string(), u0);
            rules.observer = [&](const FlowState& s, double) {
                if (++step % cfg.run.snapshot_stride == 0)
                    write_field_dump(run.path(fmt::format("snapshots/snap_{:06d}.dat", step)).string(), s.u);
            };
        }
        trace = evolve(u0, cfg.spec, cfg.stepper, rules);
    });
    write_trace(run, "trace.csv", trace);
    write_field_dump(run.path("final_state.dat").string(), trace.final_state.u);
    write_field_csv(run.path("final_state.csv").string(), trace.final_state.u);
    run.result("status", to_string(trace.status));
    run.result("t_final", trace.final_state.t);
    run.result("steps", std::to_string(trace.steps));
    if (trace.status == TerminalStatus::SolverFailure) throw NumericError(trace.diagnostic);
}

void run_classify(Run& run) {
    const RunConfig& cfg = run.cfg();
    const GridFunction u0 = make_initial_datum(cfg);
    std::optional<BlowupCertificate> cert;
    if (cfg.classifier.use_certificate)
        run.stage("certificate", [&] { cert = blowup_sufficient(u0, cfg.spec, cfg.classifier); });
    Classification c;
    run.stage("classify", [&] { c = classify_trajectory(u0, cfg.spec, cfg.classifier); });
    {
        auto os = run.open("classification.csv");
        write_classification_csv(os, c, cert ? &*cert : nullptr);
    }
    write_trace(run, "trace.csv", c.trace);
    run.result("verdict", to_string(c.verdict));
    run.result("trigger", to_string(c.trigger));
    run.result("t_detect", c.t_detect);
}

void write_threshold_record(const Run& run, const ThresholdResult& tr) {
    auto os = run.open("threshold.csv");
    os << "s_star,s_low,s_high,iterations,inconclusive,monotonicity_violation\n";
    os << format_real(tr.s_star) << ',' << format_real(tr.s_low) << ',' << format_real(tr.s_high) << ','
       << tr.iterations << ',' << (tr.inconclusive ? 1 : 0) << ',' << (tr.monotonicity_violation ? 1 : 0) << '\n';
}

/// Bracket and bisect with outputs; the returned result carries the full
/// probe history.
ThresholdResult threshold_stages(Run& run, const GridFunction& v) {
    const RunConfig& cfg = run.cfg();
    std::vector<RayProbe> history;
    Bracket b;
    try {
        run.stage("bracket", [&] { b = bracket_ray(v, cfg.spec, cfg.classifier, cfg.threshold, &history); });
    } catch (...) {
        auto os = run.open("ray_history.csv");
        write_ray_history_csv(os, history);
        throw;
    }
    ThresholdResult tr;
    run.stage("bisect", [&] { tr = bisect(v, b, cfg.spec, cfg.classifier, cfg.threshold); });
    tr.history.insert(tr.history.begin(), history.begin(), history.end());
    tr.monotonicity_violation = ray_monotonicity_violation(tr.history);
    {
        auto os = run.open("ray_history.csv");
        write_ray_history_csv(os, tr.history);
    }
    write_threshold_record(run, tr);
    write_trace(run, "decay_trace.csv", tr.decay_trace);
    write_trace(run, "blowup_trace.csv", tr.blowup_trace);
    run.result("s_star", tr.s_star);
    run.result("s_low", tr.s_low);
    run.result("s_high", tr.s_high);
    run.result("iterations", std::to_string(tr.iterations));
    run.result("monotonicity_violation", tr.monotonicity_violation ? "true" : "false");
    if (tr.inconclusive) throw MethodError("threshold bisection inconclusive");
    return tr;
}

void run_threshold(Run& run) { threshold_stages(run, make_direction(run.cfg())); }

void run_steady(Run& run) {
    const RunConfig& cfg = run.cfg();
    const GridFunction v = make_direction(cfg);
    const ThresholdResult tr = threshold_stages(run, v);
    SteadyState cand;
    run.stage("extract", [&] { cand = extract_omega_limit(v, tr, cfg.spec, cfg.classifier, cfg.threshold); });
    write_field_dump(run.path("candidate_state.dat").string(), cand.u_s);
    run.result("candidate_residual_l2", cand.residual_l2);
    run.result("candidate_ut_l2", cand.ut_snapshot);
    run.result("cauchy_h1", cand.cauchy_h1);
    run.result("cauchy_ok", cand.cauchy_ok ? "true" : "false");

    const double eps_nontrivial = 10.0 * cfg.classifier.resolved_eps_decay(tr.s_star * v);
    SteadyState st;
    run.stage("refine", [&] {
        st = newton_refine(cand.u_s, cfg.spec, cfg.threshold.newton_tol, eps_nontrivial,
                           cfg.threshold.newton_max_iters);
    });
    write_field_dump(run.path("steady_state.dat").string(), st.u_s);
    write_field_csv(run.path("steady_state.csv").string(), st.u_s);
    const nlohmann::ordered_json summary{
        {"s_star", tr.s_star},       {"residual_l2", st.residual_l2}, {"energy", st.energy},
        {"z_s", st.z_s},             {"h1_norm", st.h1_norm},         {"iterations", st.iterations},
        {"method", st.method},       {"eps_nontrivial", eps_nontrivial}, {"residual_gate", cfg.run.steady_gate},
    };
    run.open("steady_summary.json") << summary.dump(2) << '\n';
    run.result("residual_l2", st.residual_l2);
    run.result("h1_norm", st.h1_norm);
    run.result("newton_iterations", std::to_string(st.iterations));
    run.stage("gate", [&] {
        if (!(st.residual_l2 <= cfg.run.steady_gate))
            throw NumericError(fmt::format("residual_l2 {} above gate {}", format_real(st.residual_l2),
                                           format_real(cfg.run.steady_gate)));
        if (!(st.h1_norm >= eps_nontrivial))
            throw MethodError(fmt::format("steady state |u|_H1 = {} below eps_nontrivial {}",
                                          format_real(st.h1_norm), format_real(eps_nontrivial)));
    });
}

void run_verify(Run& run) {
    ConditionReport report;
    run.stage("verify", [&] { report = verify_conditions(run.cfg().spec, run.cfg().verify); });
    {
        auto os = run.open("conditions.csv");
        write_condition_report(os, report);
    }
    for (const ConditionResult& r : report.results) run.result(r.name, to_string(r.verdict));
    run.result("all_pass", report.all_pass() ? "true" : "false");
}

void run_oracle_check(Run& run) {
    const RunConfig& cfg = run.cfg();
    const GridFunction u0 = make_initial_datum(cfg);
    const double t_end = cfg.run.oracle_t_end;
    MildSolution mild;
    run.stage("mild_oracle", [&] { mild = mild_solution_oracle(u0, cfg.spec, t_end, cfg.run.oracle_n_sub); });
    auto os = run.open("oracle_check.csv");
    os << "dt,t_end,l2_imex,l2_mild,l2_diff,picard_iterations\n";
    double finest = 0.0;
    run.stage("imex", [&] {
        for (const double factor : {4.0, 2.0, 1.0}) {
            StepperConfig sc = cfg.stepper;
            sc.dt = factor * cfg.run.oracle_dt;
            sc.adaptive = false;
            StopRules rules;
            rules.T_max = t_end;
            rules.blowup_l2 = cfg.classifier.resolved_blowup_l2(u0);
            rules.trace_stride = 1 << 30;
            const FlowTrace tr = evolve(u0, cfg.spec, sc, rules);
            if (tr.status != TerminalStatus::ReachedTmax)
                throw NumericError(fmt::format("IMEX run at dt={} stopped early: {}", format_real(sc.dt),
                                               to_string(tr.status)));
            finest = norm_l2(tr.final_state.u - mild.u);
            os << format_real(sc.dt) << ',' << format_real(t_end) << ',' << format_real(norm_l2(tr.final_state.u))
               << ',' << format_real(norm_l2(mild.u)) << ',' << format_real(finest) << ','
               << mild.picard_iterations << '\n';
        }
    });
    run.result("l2_diff", finest);
}

}  // namespace

RunManifest run_subcommand(const RunConfig& cfg, const std::string& name) {
    const auto start = std::chrono::steady_clock::now();
    RunManifest m;
    m.subcommand = name;
    m.version = software_version();
    m.config = cfg.echo;
    Run run(cfg, m);
    try {
        fs::create_directories(cfg.output_dir);
        if (name == "simulate")
            run_simulate(run);
        else if (name == "classify")
            run_classify(run);
        else if (name == "threshold")
            run_threshold(run);
        else if (name == "steady")
            run_steady(run);
        else if (name == "verify-conditions")
            run_verify(run);
        else if (name == "oracle-check")
            run_oracle_check(run);
        else
            throw ConfigError("unknown subcommand '" + name + "'");
    } catch (const Error& e) {
        m.exit_code = static_cast<int>(e.kind());
        m.error = e.what();
    } catch (const fs::filesystem_error& e) {
        m.exit_code = static_cast<int>(ErrorKind::Config);
        m.error = e.what();
    } catch (const std::exception& e) {
        m.exit_code = static_cast<int>(ErrorKind::Numeric);
        m.error = e.what();
    }
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::error_code ec;
    if (fs::is_directory(cfg.output_dir, ec)) {
        for (const auto& entry : fs::recursive_directory_iterator(cfg.output_dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string rel = fs::relative(entry.path(), cfg.output_dir).generic_string();
            if (rel == "manifest.txt") continue;
            m.files.push_back({rel, entry.file_size(), sha256_file(entry.path())});
        }
        std::sort(m.files.begin(), m.files.end(),
                  [](const FileEntry& a, const FileEntry& b) { return a.path < b.path; });
        std::ofstream os(cfg.output_dir / "manifest.txt");
        write_manifest(os, m);
    }
    return m;
}

}  // namespace nlheat
