#include "nlheat/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "nlheat/errors.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/presets.hpp"

namespace nlheat {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

const RawConfig& generic_defaults() {
    static const RawConfig d{
        {"preset", "example2"},
        {"grid.nx", "32"},
        {"grid.ny", "32"},
        {"grid.Lx", "1"},
        {"grid.Ly", "1"},
        {"grid.y_boundary", "dirichlet"},
        {"stepper.dt", "0"},
        {"stepper.solver_tol", "1e-10"},
        {"stepper.max_cg_iters", "2000"},
        {"stepper.adaptive", "true"},
        {"classifier.eps_decay", "0"},
        {"classifier.M_blow", "1e6"},
        {"classifier.T_max", "50"},
        {"classifier.Kstar", "0"},
        {"classifier.growth_window", "10"},
        {"classifier.growth_slope", "0.5"},
        {"classifier.delta_e", "0"},
        {"classifier.trace_stride", "1"},
        {"classifier.use_certificate", "false"},
        {"classifier.confirm_growth", "false"},
        {"classifier.mhat_restarts", "4"},
        {"classifier.mhat_max_iters", "400"},
        {"threshold.tol_s", "1e-10"},
        {"threshold.max_iters", "80"},
        {"threshold.s_start", "1"},
        {"threshold.plateau_ut", "1e-6"},
        {"threshold.cauchy_tol", "1e-3"},
        {"threshold.snapshot_stride", "10"},
        {"threshold.newton_tol", "1e-8"},
        {"threshold.newton_max_iters", "30"},
        {"verify.t_max", "1e3"},
        {"verify.t_min", "1e-3"},
        {"verify.t_samples", "10000"},
        {"run.u0", "e1"},
        {"run.u0_scale", "1"},
        {"run.u0_norm", "l2"},
        {"run.direction", "e1"},
        {"run.T_end", "1"},
        {"run.trace_stride", "1"},
        {"run.snapshot_stride", "0"},
        {"run.steady_gate", "1e-8"},
        {"run.seed", "1"},
        {"run.out", "out"},
        {"oracle.t_end", "0.05"},
        {"oracle.dt", "1e-4"},
        {"oracle.n_sub", "200"},
    };
    return d;
}

/// Problem keys default to the preset's own parameters.
RawConfig problem_defaults(const std::string& preset, double lx, double ly) {
    RawConfig d{
        {"f.kind", "zero"}, {"f.p", "1.4"}, {"f.r", "1.2"}, {"f.tau", "0.6"}, {"f.gamma", "0.2"},
        {"f.c", "1"},       {"g.kind", "powerq"}, {"g.q", "2"}, {"g.xi", "1.5"}, {"g.c", "1"},
        {"a.a0", "0.5"},    {"a.K", "1"},   {"a.B", "zero"}, {"a.h", "none"}, {"a.c", "0.5"},
        {"hypothesis.dim", "2"},
    };
    if (preset == "example2") {
        d["f.kind"] = "polynomial";
        d["g.q"] = "3";
        d["a.B"] = "sine";
        d["a.h"] = "bump";
        d["hypothesis.dim"] = "3";
    } else if (preset == "example1") {
        d["f.kind"] = "exponential";
        d["f.p"] = "3";
        d["f.gamma"] = "1";
        d["g.kind"] = "exponential";
        d["a.K"] = format_real(2.0 * lx * ly);
        d["a.B"] = "sine";
        d["a.h"] = "bump";
    } else if (preset == "cubic") {
        d["f.kind"] = "power";
        d["f.p"] = "3";
        d["f.gamma"] = "2";
    } else if (preset != "heat") {
        throw ConfigError(fmt::format("preset: unknown preset '{}'", preset));
    }
    return d;
}

class Reader {
public:
    explicit Reader(const RawConfig& m) : m_(m) {}

    const std::string& str(const std::string& key) const { return m_.at(key); }

    double real(const std::string& key) const {
        const std::string& s = str(key);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
            throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, s));
        return v;
    }

    double real(const std::string& key, double lo, bool lo_open, double hi = std::numeric_limits<double>::infinity()) const {
        const double v = real(key);
        if (lo_open ? !(v > lo) : !(v >= lo))
            throw ConfigError(fmt::format("{}: {} out of range (must be {} {})", key, str(key), lo_open ? ">" : ">=", lo));
        if (!(v <= hi)) throw ConfigError(fmt::format("{}: {} out of range (must be <= {})", key, str(key), hi));
        return v;
    }

    long long integer(const std::string& key, long long lo) const {
        const std::string& s = str(key);
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw ConfigError(fmt::format("{}: '{}' is not an integer", key, s));
        if (v < lo) throw ConfigError(fmt::format("{}: {} out of range (must be >= {})", key, v, lo));
        return v;
    }

    bool boolean(const std::string& key) const {
        const std::string& s = str(key);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw ConfigError(fmt::format("{}: '{}' is not a boolean (true/false)", key, s));
    }

    std::string choice(const std::string& key, std::initializer_list<const char*> allowed) const {
        const std::string& s = str(key);
        for (const char* a : allowed)
            if (s == a) return s;
        std::string list;
        for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        throw ConfigError(fmt::format("{}: '{}' is not one of {}", key, s, list));
    }

    /// e1, random or file:PATH.
    std::string field_source(const std::string& key) const {
        const std::string& s = str(key);
        if (s == "e1" || s == "random" || (s.rfind("file:", 0) == 0 && s.size() > 5)) return s;
        throw ConfigError(fmt::format("{}: '{}' is not one of e1, random, file:PATH", key, s));
    }

private:
    const RawConfig& m_;
};

ProblemSpec build_spec(const Reader& r, const std::string& preset, const RectDomain& domain) {
    const std::string fk = r.choice("f.kind", {"polynomial", "exponential", "power", "linear", "zero"});
    const std::string gk = r.choice("g.kind", {"powerq", "exponential", "constant"});
    const double gamma = r.real("f.gamma");
    NonlinearityModel f;
    if (fk == "polynomial")
        f = NonlinearityModel::polynomial(r.real("f.p"), r.real("f.r"), gamma);
    else if (fk == "exponential")
        f = NonlinearityModel::exponential_n2(r.real("f.p"), r.real("f.tau"), r.real("g.xi"), gamma);
    else if (fk == "power")
        f = NonlinearityModel::power(r.real("f.p"), gamma);
    else if (fk == "linear")
        f = NonlinearityModel::linear(r.real("f.c"), gamma);
    else
        f = NonlinearityModel::zero();

    NonlocalModel g;
    if (gk == "powerq")
        g = NonlocalModel::power_q(r.real("g.q"));
    else if (gk == "exponential")
        g = NonlocalModel::exponential(r.real("g.xi"));
    else
        g = NonlocalModel::constant(r.real("g.c"));

    const double K = r.real("a.K");
    const double c = r.real("a.c");
    const std::string bk = r.choice("a.B", {"zero", "one", "sine"});
    const std::string hk = r.choice("a.h", {"none", "bump", "hat", "gaussian"});
    SpatialProfile B = bk == "one"    ? SpatialProfile::one()
                       : bk == "sine" ? SpatialProfile::sine(domain.lx(), domain.ly())
                                      : SpatialProfile::zero();
    CutoffProfile h = hk == "bump"       ? CutoffProfile::bump(c, K)
                      : hk == "hat"      ? CutoffProfile::hat(c, K)
                      : hk == "gaussian" ? CutoffProfile::gaussian(c, K)
                                         : CutoffProfile::none();
    ProblemSpec spec{domain, std::move(f), std::move(g),
                     CoefficientModel::product(r.real("a.a0"), K, std::move(B), std::move(h)),
                     static_cast<int>(r.integer("hypothesis.dim", 2)), preset};
    spec.validate();
    return spec;
}

}  // namespace

RawConfig read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("config: cannot open '{}'", path.string()));
    RawConfig raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(fmt::format("config: {}:{}: expected KEY = VALUE", path.string(), lineno));
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw ConfigError(fmt::format("config: {}:{}: empty key", path.string(), lineno));
        if (!raw.emplace(key, value).second)
            throw ConfigError(fmt::format("config: {}:{}: key '{}' given twice", path.string(), lineno, key));
    }
    return raw;
}

void apply_override(RawConfig& raw, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--set: '{}' is not KEY=VALUE", assignment));
    const std::string key = trim(std::string_view(assignment).substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("--set: '{}' has an empty key", assignment));
    raw[key] = trim(std::string_view(assignment).substr(eq + 1));
}

std::vector<std::string> config_keys() {
    RawConfig all = generic_defaults();
    all.merge(problem_defaults("heat", 1.0, 1.0));
    std::vector<std::string> keys;
    for (const auto& [k, v] : all) keys.push_back(k);
    return keys;
}

RunConfig resolve_config(const RawConfig& raw) {
    RawConfig merged = generic_defaults();
    const auto take = [&](const std::string& key) {
        if (auto it = raw.find(key); it != raw.end()) merged[key] = it->second;
    };
    take("preset");
    take("grid.Lx");
    take("grid.Ly");
    const std::string preset = merged["preset"];
    {
        const Reader early(merged);
        const double lx = early.real("grid.Lx", 0.0, true);
        const double ly = early.real("grid.Ly", 0.0, true);
        merged.merge(problem_defaults(preset, lx, ly));
    }
    for (const auto& [key, value] : raw) {
        auto it = merged.find(key);
        if (it == merged.end()) throw ConfigError(fmt::format("unknown key '{}'", key));
        it->second = value;
    }

    const Reader r(merged);
    RunConfig cfg;
    cfg.preset = preset;

    const std::string ybc = r.choice("grid.y_boundary", {"dirichlet", "periodic"});
    const RectDomain domain(r.real("grid.Lx", 0.0, true), r.real("grid.Ly", 0.0, true),
                            static_cast<int>(r.integer("grid.nx", 3)), static_cast<int>(r.integer("grid.ny", 3)),
                            ybc == "periodic" ? YBoundary::Periodic : YBoundary::Dirichlet);
    cfg.spec = build_spec(r, preset, domain);

    cfg.stepper.dt = r.real("stepper.dt", 0.0, false);
    cfg.stepper.solver_tol = r.real("stepper.solver_tol", 0.0, true, 0.1);
    cfg.stepper.max_cg_iters = static_cast<int>(r.integer("stepper.max_cg_iters", 1));
    cfg.stepper.adaptive = r.boolean("stepper.adaptive");
    cfg.stepper.validate();

    cfg.seed = static_cast<std::uint64_t>(r.integer("run.seed", 0));

    ClassifierConfig& c = cfg.classifier;
    c.eps_decay = r.real("classifier.eps_decay", 0.0, false);
    c.M_blow = r.real("classifier.M_blow", 0.0, true);
    c.T_max = r.real("classifier.T_max", 0.0, true);
    c.Kstar = r.real("classifier.Kstar", 0.0, false);
    c.growth_window = static_cast<int>(r.integer("classifier.growth_window", 3));
    c.growth_slope = r.real("classifier.growth_slope", 0.0, true);
    c.delta_e = r.real("classifier.delta_e", 0.0, false);
    c.trace_stride = static_cast<int>(r.integer("classifier.trace_stride", 1));
    c.use_certificate = r.boolean("classifier.use_certificate");
    c.confirm_growth = r.boolean("classifier.confirm_growth");
    c.mhat.restarts = static_cast<int>(r.integer("classifier.mhat_restarts", 1));
    c.mhat.max_iters = static_cast<int>(r.integer("classifier.mhat_max_iters", 1));
    c.mhat.seed = cfg.seed;
    c.stepper = cfg.stepper;
    c.validate();

    ThresholdConfig& t = cfg.threshold;
    t.tol_s = r.real("threshold.tol_s", 0.0, true, 0.5);
    t.max_iters = static_cast<int>(r.integer("threshold.max_iters", 1));
    t.s_start = r.real("threshold.s_start", 0.0, true);
    t.plateau_ut = r.real("threshold.plateau_ut", 0.0, true);
    t.cauchy_tol = r.real("threshold.cauchy_tol", 0.0, true);
    t.snapshot_stride = static_cast<int>(r.integer("threshold.snapshot_stride", 1));
    t.newton_tol = r.real("threshold.newton_tol", 0.0, true);
    t.newton_max_iters = static_cast<int>(r.integer("threshold.newton_max_iters", 1));
    t.validate();

    cfg.verify.t_min = r.real("verify.t_min", 0.0, true);
    cfg.verify.t_max = r.real("verify.t_max", cfg.verify.t_min, true);
    cfg.verify.t_samples = static_cast<int>(r.integer("verify.t_samples", 4));

    RunSettings& s = cfg.run;
    s.u0 = r.field_source("run.u0");
    s.u0_scale = r.real("run.u0_scale");
    s.u0_norm = r.choice("run.u0_norm", {"l2", "h1", "none"});
    s.direction = r.field_source("run.direction");
    s.T_end = r.real("run.T_end", 0.0, true);
    s.trace_stride = static_cast<int>(r.integer("run.trace_stride", 1));
    s.snapshot_stride = static_cast<int>(r.integer("run.snapshot_stride", 0));
    s.steady_gate = r.real("run.steady_gate", 0.0, true);
    s.oracle_t_end = r.real("oracle.t_end", 0.0, true);
    s.oracle_dt = r.real("oracle.dt", 0.0, true);
    s.oracle_n_sub = static_cast<int>(r.integer("oracle.n_sub", 16));

    if (r.str("run.out").empty()) throw ConfigError("run.out: empty output directory");
    cfg.output_dir = r.str("run.out");

    for (const auto& [k, v] : merged) cfg.echo.emplace_back(k, v);
    return cfg;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file, const std::optional<std::string>& preset,
                       const std::vector<std::string>& sets, const std::optional<std::uint64_t>& seed,
                       const std::optional<std::filesystem::path>& out) {
    RawConfig raw;
    if (file) raw = read_config_file(*file);
    if (preset) raw["preset"] = *preset;
    for (const std::string& s : sets) apply_override(raw, s);
    if (seed) raw["run.seed"] = std::to_string(*seed);
    if (out) raw["run.out"] = out->string();
    return resolve_config(raw);
}

namespace {

GridFunction field_shape(const std::string& source, const RunConfig& cfg, const char* key) {
    const RectDomain& d = cfg.spec.domain;
    if (source == "e1") return first_mode(d);
    if (source == "random") return random_smooth_field(d, cfg.seed);
    const std::string path = source.substr(5);
    GridFunction u;
    try {
        u = read_field_dump(path, d.y_boundary());
    } catch (const Error& e) {
        throw ConfigError(fmt::format("{}: {}", key, e.what()));
    }
    if (!(u.domain() == d))
        throw ConfigError(fmt::format("{}: field in '{}' is {}x{}, grid is {}x{}", key, path, u.domain().nx(),
                                      u.domain().ny(), d.nx(), d.ny()));
    return u;
}

}  // namespace

GridFunction make_initial_datum(const RunConfig& cfg) {
    GridFunction u = field_shape(cfg.run.u0, cfg, "run.u0");
    if (cfg.run.u0_norm != "none") {
        const double n = cfg.run.u0_norm == "h1" ? norm_h1(u) : norm_l2(u);
        if (!(n > 0.0)) throw ConfigError("run.u0: shape has zero norm");
        u *= 1.0 / n;
    }
    u *= cfg.run.u0_scale;
    return u;
}

GridFunction make_direction(const RunConfig& cfg) {
    GridFunction v = field_shape(cfg.run.direction, cfg, "run.direction");
    const double n = norm_h1(v);
    if (!(n > 0.0)) throw ConfigError("run.direction: direction has zero norm");
    v *= 1.0 / n;
    return v;
}

}  // namespace nlheat
