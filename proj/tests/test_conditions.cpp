#include <doctest.h>

#include <chrono>
#include <cmath>
#include <sstream>
#include <string>

#include "nlheat/conditions.hpp"
#include "nlheat/presets.hpp"

using namespace nlheat;

namespace {

const RectDomain kDomain(1, 1, 16, 16);

ProblemSpec example2() { return make_preset("example2", kDomain); }

}  // namespace

TEST_CASE("both worked examples pass every condition") {
    for (const char* name : {"example1", "example2"}) {
        CAPTURE(name);
        const ConditionReport r = verify_conditions(make_preset(name, kDomain));
        CHECK(r.all_pass());
        CHECK(r.results.size() == 8);
        for (const ConditionResult& c : r.results) CHECK(c.witnesses.empty());
    }
}

TEST_CASE("example dimensions follow the growth class of g") {
    CHECK(verify_conditions(make_preset("example1", kDomain)).dimension == 2);
    CHECK(verify_conditions(example2()).dimension == 3);
}

TEST_CASE("fitted constants on example 2") {
    const ConditionReport r = verify_conditions(example2());
    CHECK(r.get("g").estimate == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(r.get("f3").estimate >= 0.2);
    CHECK(r.get("f1").estimate < 1.5);
}

TEST_CASE("negative g fails (H) with witnesses where g < 0") {
    ProblemSpec s = example2();
    s.g = NonlocalModel::constant(-1.0);
    const ConditionResult& h = verify_conditions(s).get("H");
    CHECK(h.verdict == ConditionVerdict::Fail);
    REQUIRE_FALSE(h.witnesses.empty());
    for (const Witness& w : h.witnesses) CHECK(w.lhs < w.rhs);
}

TEST_CASE("linear f fails (f3) with witnesses") {
    ProblemSpec s = example2();
    s.f = NonlinearityModel::linear(1.0, 0.5);
    const ConditionReport r = verify_conditions(s);
    const ConditionResult& f3 = r.get("f3");
    CHECK(f3.verdict == ConditionVerdict::Fail);
    REQUIRE_FALSE(f3.witnesses.empty());
    // f(s)s = s^2 against (2 + 1/2) s^2 / 2.
    for (const Witness& w : f3.witnesses) CHECK(w.lhs == doctest::Approx(0.8 * w.rhs));
    CHECK_FALSE(r.all_pass());
}

TEST_CASE("a non-saturating coefficient fails (a2) with witnesses") {
    ProblemSpec s = example2();
    s.a = CoefficientModel::product(0.5, 1.0, SpatialProfile::sine(1.0, 1.0), CutoffProfile::gaussian(0.5, 1.0));
    const ConditionResult& a2 = verify_conditions(s).get("a2");
    CHECK(a2.verdict == ConditionVerdict::Fail);
    REQUIRE_FALSE(a2.witnesses.empty());
    for (const Witness& w : a2.witnesses) {
        CHECK(std::abs(w.z) >= 1.0);
        CHECK(w.lhs != w.rhs);
    }
}

TEST_CASE("heat fails (f3) because gamma must be positive") {
    CHECK(verify_conditions(make_preset("heat", kDomain)).get("f3").verdict == ConditionVerdict::Fail);
}

TEST_CASE("witness count is capped by the plan") {
    ProblemSpec s = example2();
    s.g = NonlocalModel::constant(-1.0);
    SamplePlan plan;
    plan.max_witnesses = 2;
    CHECK(verify_conditions(s, plan).get("H").witnesses.size() == 2);
}

TEST_CASE("report CSV lists one row per condition") {
    ProblemSpec s = example2();
    s.g = NonlocalModel::constant(-1.0);
    std::ostringstream os;
    write_condition_report(os, verify_conditions(s));
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "condition,verdict,estimate_name,estimate,t_lo,t_hi,witnesses,detail");
    int rows = 0;
    bool h_row = false;
    while (std::getline(is, line)) {
        ++rows;
        if (line.rfind("H,fail,", 0) == 0) h_row = line.find('|') != std::string::npos;
    }
    CHECK(rows == 8);
    CHECK(h_row);
}

TEST_CASE("unknown condition names throw") { CHECK_THROWS(verify_conditions(example2()).get("f9")); }

TEST_CASE("verification is fast") {
    const auto t0 = std::chrono::steady_clock::now();
    for (const char* name : {"example1", "example2", "cubic", "heat"}) verify_conditions(make_preset(name, kDomain));
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
}
