#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nlheat/classify.hpp"
#include "nlheat/errors.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/presets.hpp"

using namespace nlheat;

TEST_CASE("zero data decays at t = 0") {
    const RectDomain d(1, 1, 8, 8);
    const Classification c = classify_trajectory(GridFunction(d), make_preset("example2", d), ClassifierConfig{});
    CHECK(c.verdict == Verdict::DecayToZero);
    CHECK(c.t_detect == 0.0);
    CHECK(c.eps_decay == doctest::Approx(1e-6));
}

TEST_CASE("eps_decay and the blow-up norm scale with the data") {
    const RectDomain d(1, 1, 8, 8);
    ClassifierConfig cfg;
    const GridFunction u = 100.0 * first_mode(d);
    CHECK(cfg.resolved_eps_decay(u) == doctest::Approx(1e-6 * norm_h1(u)));
    CHECK(cfg.resolved_blowup_l2(u) == doctest::Approx(1e8));
    CHECK(cfg.resolved_eps_decay(1e-3 * u) == doctest::Approx(1e-6));
    CHECK(cfg.resolved_Kstar(d) == doctest::Approx(10.0 * norm_h1(first_mode(d))));
}

TEST_CASE("small Example 2 data decays") {
    const RectDomain d(1, 1, 12, 12);
    const Classification c = classify_trajectory(first_mode(d), make_preset("example2", d), ClassifierConfig{});
    CHECK(c.verdict == Verdict::DecayToZero);
    CHECK(c.trigger == Trigger::None);
    CHECK(c.trace.rows.back().h1 <= c.eps_decay);
}

TEST_CASE("heat decays for arbitrarily large data") {
    const RectDomain d(1, 1, 8, 8);
    const Classification c =
        classify_trajectory(1e9 * first_mode(d), make_preset("heat", d), ClassifierConfig{});
    CHECK(c.verdict == Verdict::DecayToZero);
}

TEST_CASE("large cubic data blows up with a concave indicator tail") {
    const RectDomain d(1, 1, 16, 16);
    const ProblemSpec spec = make_preset("cubic", d);
    ClassifierConfig cfg;
    cfg.confirm_growth = true;
    const Classification c = classify_trajectory(50.0 * first_mode(d), spec, cfg);
    CHECK(c.verdict == Verdict::BlowUp);
    CHECK(std::isfinite(c.t_detect));
    CHECK(c.t_detect > 0.0);
    CHECK(c.E0 < 0.0);
    const ConcavitySeries cs = concavity_indicator(c.trace, spec.f.gamma);
    CHECK(cs.tail_fraction >= 0.9);
}

TEST_CASE("decaying trajectories have a convex indicator") {
    const RectDomain d(1, 1, 8, 8);
    const Classification c = classify_trajectory(first_mode(d), make_preset("cubic", d), ClassifierConfig{});
    REQUIRE(c.verdict == Verdict::DecayToZero);
    CHECK(concavity_indicator(c.trace, 2.0).tail_fraction <= 0.1);
}

TEST_CASE("concavity indicator integrates |u|^2 by trapezoid") {
    FlowTrace tr;
    for (int i = 0; i <= 4; ++i) tr.rows.push_back({0.5 * i, 2.0, 0, 0, 0, 0, 0});
    const ConcavitySeries cs = concavity_indicator(tr, 1.0);
    REQUIRE(cs.H.size() == 4);  // t > 0 only
    CHECK(cs.H.back() == doctest::Approx(0.5 * 4.0 * 2.0));
    CHECK(cs.ell.back() == doctest::Approx(std::pow(4.0, -0.5)));
    CHECK_THROWS_AS(concavity_indicator(tr, 0.0), ConfigError);
    tr.rows.resize(2);
    CHECK_THROWS_AS(concavity_indicator(tr, 1.0), ConfigError);
}

TEST_CASE("M-hat for the heat energy is -K*^2/2") {
    const RectDomain d(1, 1, 8, 8);
    const double Kstar = 7.0;
    const MhatEstimate m = estimate_Mhat(make_preset("heat", d), Kstar, MhatBudget{});
    CHECK(m.Mhat == doctest::Approx(-0.5 * Kstar * Kstar).epsilon(1e-9));
    CHECK(m.no_negative_energy);
    CHECK(norm_h1(m.best_u) == doctest::Approx(Kstar).epsilon(1e-12));
}

TEST_CASE("M-hat is seeded") {
    const RectDomain d(1, 1, 8, 8);
    const ProblemSpec spec = make_preset("cubic", d);
    MhatBudget b;
    b.restarts = 6;
    CHECK(estimate_Mhat(spec, 20.0, b).Mhat == estimate_Mhat(spec, 20.0, b).Mhat);
}

TEST_CASE("sufficient blow-up condition") {
    const RectDomain d(1, 1, 16, 16);
    const ProblemSpec spec = make_preset("cubic", d);
    const BlowupCertificate yes = blowup_sufficient(50.0 * first_mode(d), spec, ClassifierConfig{});
    CHECK(yes.holds);
    CHECK(yes.E0 < yes.bound);
    CHECK(yes.bound <= -spec.a.K / (2.0 + spec.f.gamma));
    const BlowupCertificate no = blowup_sufficient(first_mode(d), spec, ClassifierConfig{});
    CHECK_FALSE(no.holds);
}

TEST_CASE("certificate short-circuits classification") {
    const RectDomain d(1, 1, 16, 16);
    ClassifierConfig cfg;
    cfg.use_certificate = true;
    const Classification c = classify_trajectory(50.0 * first_mode(d), make_preset("cubic", d), cfg);
    CHECK(c.verdict == Verdict::BlowUp);
    CHECK(c.trigger == Trigger::SufficientCondition);
}

TEST_CASE("classifier config validation") {
    ClassifierConfig cfg;
    cfg.M_blow = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ClassifierConfig{};
    cfg.T_max = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_NOTHROW(ClassifierConfig{}.validate());
}

TEST_CASE("classification CSV") {
    Classification c;
    c.verdict = Verdict::BlowUp;
    c.trigger = Trigger::ExpGrowth;
    std::ostringstream a;
    write_classification_csv(a, c);
    CHECK(a.str().rfind("verdict,t_detect,trigger,E0,h1_0\nBlowUp,0,exp_growth,", 0) == 0);
    BlowupCertificate cert;
    std::ostringstream b;
    write_classification_csv(b, c, &cert);
    CHECK(b.str().rfind("verdict,t_detect,trigger,E0,h1_0,Kstar,Mhat,E_bound,certificate\n", 0) == 0);
}
