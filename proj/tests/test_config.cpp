#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "nlheat/config.hpp"
#include "nlheat/errors.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/presets.hpp"

using namespace nlheat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "nlheat_test_config";
    fs::create_directories(dir);
    return dir / name;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const fs::path p = scratch(name);
    std::ofstream(p) << text;
    return p;
}

std::string error_of(const RawConfig& raw) {
    try {
        resolve_config(raw);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("a one-line file resolves to the example 2 defaults") {
    const RunConfig cfg = parse_config(write_file("min.cfg", "# minimal\npreset = example2\n"), {}, {}, {}, {});
    CHECK(cfg.preset == "example2");
    CHECK(cfg.spec.domain.nx() == 32);
    CHECK(cfg.spec.domain.ny() == 32);
    CHECK(cfg.spec.f.p == 1.4);
    CHECK(cfg.spec.f.r == 1.2);
    CHECK(cfg.spec.f.gamma == 0.2);
    CHECK(cfg.spec.g.q == 3.0);
    CHECK(cfg.spec.hypothesis_dim == 3);
    CHECK(cfg.spec.a.K == 1.0);
    CHECK(cfg.spec.a.a0 == 0.5);
    CHECK(cfg.seed == 1);
    CHECK(cfg.output_dir == fs::path("out"));
    CHECK(cfg.threshold.newton_tol == 1e-8);
    CHECK_NOTHROW(cfg.spec.validate());
}

TEST_CASE("echo lists every known key once, sorted") {
    const RunConfig cfg = resolve_config({});
    REQUIRE(cfg.echo.size() == config_keys().size());
    CHECK(std::is_sorted(cfg.echo.begin(), cfg.echo.end()));
    for (std::size_t i = 0; i < cfg.echo.size(); ++i) CHECK(cfg.echo[i].first == config_keys()[i]);
}

TEST_CASE("resolved problem matches the preset factory") {
    for (const std::string& name : preset_names()) {
        CAPTURE(name);
        const RunConfig cfg = resolve_config({{"preset", name}, {"grid.nx", "12"}, {"grid.ny", "10"}});
        const ProblemSpec ref = make_preset(name, cfg.spec.domain);
        CHECK(cfg.spec.f.kind == ref.f.kind);
        CHECK(cfg.spec.f.p == ref.f.p);
        CHECK(cfg.spec.f.gamma == ref.f.gamma);
        CHECK(cfg.spec.g.kind == ref.g.kind);
        CHECK(cfg.spec.a.K == ref.a.K);
        CHECK(cfg.spec.a.is_unit() == ref.a.is_unit());
        CHECK(cfg.spec.hypothesis_dim == ref.hypothesis_dim);
        const GridFunction u = random_smooth_field(cfg.spec.domain, 3);
        CHECK(energy(u, cfg.spec) == energy(u, ref));
    }
}

TEST_CASE("example 1 cutoff K defaults to twice the area") {
    CHECK(resolve_config({{"preset", "example1"}}).spec.a.K == 2.0);
    CHECK(resolve_config({{"preset", "example1"}, {"grid.Lx", "2"}, {"grid.Ly", "1.5"}}).spec.a.K == 6.0);
    CHECK(resolve_config({{"preset", "example1"}, {"a.K", "0.5"}}).spec.a.K == 0.5);
}

TEST_CASE("negative q is rejected naming the field") {
    const std::string e = error_of({{"g.q", "-1"}});
    CHECK(contains(e, "q"));
    CHECK(contains(e, "-1"));
}

TEST_CASE("tau must stay below xi for the exponential nonlinearity") {
    CHECK(error_of({{"preset", "example1"}, {"f.tau", "1.6"}}) != "");
    CHECK(error_of({{"preset", "example1"}, {"f.tau", "0.6"}}) == "");
}

TEST_CASE("unknown keys are rejected by name") {
    CHECK(contains(error_of({{"grid.nz", "4"}}), "unknown key 'grid.nz'"));
}

TEST_CASE("bad values name the key") {
    CHECK(contains(error_of({{"stepper.dt", "fast"}}), "stepper.dt"));
    CHECK(contains(error_of({{"grid.nx", "2"}}), "grid.nx"));
    CHECK(contains(error_of({{"grid.nx", "3.5"}}), "grid.nx"));
    CHECK(contains(error_of({{"classifier.M_blow", "-1"}}), "classifier.M_blow"));
    CHECK(contains(error_of({{"threshold.tol_s", "0.9"}}), "threshold.tol_s"));
    CHECK(contains(error_of({{"grid.y_boundary", "neumann"}}), "grid.y_boundary"));
    CHECK(contains(error_of({{"run.u0", "bogus"}}), "run.u0"));
    CHECK(contains(error_of({{"preset", "nope"}}), "preset"));
    CHECK(contains(error_of({{"stepper.dt", "nan"}}), "stepper.dt"));
}

TEST_CASE("booleans accept true/false and 1/0 only") {
    CHECK(resolve_config({{"stepper.adaptive", "false"}}).stepper.adaptive == false);
    CHECK(resolve_config({{"stepper.adaptive", "1"}}).stepper.adaptive == true);
    CHECK(contains(error_of({{"stepper.adaptive", "maybe"}}), "stepper.adaptive"));
}

TEST_CASE("malformed and duplicate lines are rejected") {
    CHECK_THROWS_AS(read_config_file(write_file("bad.cfg", "grid.nx 12\n")), ConfigError);
    CHECK_THROWS_AS(read_config_file(write_file("dup.cfg", "grid.nx = 12\ngrid.nx = 14\n")), ConfigError);
    CHECK_THROWS_AS(read_config_file(write_file("empty_key.cfg", " = 3\n")), ConfigError);
    CHECK_THROWS_AS(read_config_file(scratch("missing.cfg")), ConfigError);
}

TEST_CASE("comments and blank lines are skipped and values are trimmed") {
    const RawConfig raw =
        read_config_file(write_file("comments.cfg", "\n# header\n  grid.nx =  12   # trailing\n\nrun.T_end=2\n"));
    CHECK(raw.size() == 2);
    CHECK(raw.at("grid.nx") == "12");
    CHECK(raw.at("run.T_end") == "2");
}

TEST_CASE("flags override the file in order") {
    const fs::path file = write_file("prec.cfg", "preset = cubic\ngrid.nx = 10\nrun.seed = 4\nrun.out = a\n");
    RunConfig cfg = parse_config(file, {}, {}, {}, {});
    CHECK(cfg.preset == "cubic");
    CHECK(cfg.seed == 4);
    cfg = parse_config(file, std::string("heat"), {"grid.nx=11", "grid.nx=12", "run.seed=5"}, 9, fs::path("b"));
    CHECK(cfg.preset == "heat");
    CHECK(cfg.spec.domain.nx() == 12);
    CHECK(cfg.seed == 9);
    CHECK(cfg.output_dir == fs::path("b"));
    CHECK(parse_config(file, {}, {"preset=example2"}, {}, {}).preset == "example2");
}

TEST_CASE("--set needs KEY=VALUE") {
    RawConfig raw;
    CHECK_THROWS_AS(apply_override(raw, "grid.nx"), ConfigError);
    CHECK_THROWS_AS(apply_override(raw, "=4"), ConfigError);
    apply_override(raw, "run.u0 = file:a=b.dat");
    CHECK(raw.at("run.u0") == "file:a=b.dat");
}

TEST_CASE("initial datum is normalized then scaled") {
    RunConfig cfg = resolve_config({{"grid.nx", "10"}, {"grid.ny", "10"}, {"run.u0_scale", "3"}});
    CHECK(norm_l2(make_initial_datum(cfg)) == doctest::Approx(3.0).epsilon(1e-13));
    cfg.run.u0_norm = "h1";
    CHECK(norm_h1(make_initial_datum(cfg)) == doctest::Approx(3.0).epsilon(1e-13));
    cfg.run.u0_norm = "none";
    CHECK(make_initial_datum(cfg).vector() == (3.0 * first_mode(cfg.spec.domain)).vector());
    cfg.run.u0 = "random";
    cfg.run.u0_norm = "l2";
    const GridFunction a = make_initial_datum(cfg);
    CHECK(a.vector() == make_initial_datum(cfg).vector());
    cfg.seed = 2;
    CHECK(a.vector() != make_initial_datum(cfg).vector());
}

TEST_CASE("zero-scale data is exactly zero") {
    const RunConfig cfg = resolve_config({{"grid.nx", "6"}, {"grid.ny", "6"}, {"run.u0_scale", "0"}});
    CHECK(norm_l2(make_initial_datum(cfg)) == 0.0);
}

TEST_CASE("direction has unit H1 norm") {
    const RunConfig cfg = resolve_config({{"grid.nx", "10"}, {"grid.ny", "8"}, {"run.direction", "random"}});
    CHECK(norm_h1(make_direction(cfg)) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("file sources round-trip and must match the grid") {
    const RectDomain d(1, 1, 7, 5);
    const GridFunction u = random_smooth_field(d, 21);
    const fs::path p = scratch("field.dat");
    write_field_dump(p.string(), u);
    RunConfig cfg = resolve_config({{"grid.nx", "7"}, {"grid.ny", "5"}, {"run.u0", "file:" + p.string()},
                                    {"run.u0_norm", "none"}});
    CHECK(make_initial_datum(cfg).vector() == u.vector());
    cfg = resolve_config({{"grid.nx", "8"}, {"grid.ny", "5"}, {"run.u0", "file:" + p.string()}});
    CHECK_THROWS_AS(make_initial_datum(cfg), ConfigError);
    cfg.run.u0 = "file:" + scratch("absent.dat").string();
    CHECK_THROWS_AS(make_initial_datum(cfg), ConfigError);
}
