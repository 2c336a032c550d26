#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "cqc/montecarlo.hpp"
#include "support/generators.hpp"

using namespace cqc;

namespace {

bool same_counts(const EventCounts& a, const EventCounts& b) {
    return a.e1 == b.e1 && a.e2 == b.e2 && a.e3 == b.e3 && a.e4 == b.e4 &&
           a.no_click == b.no_click && a.e1_errors == b.e1_errors &&
           a.e3_errors == b.e3_errors;
}

std::uint64_t total_events(const EventCounts& c) {
    return c.e1 + c.e2 + c.e3 + c.e4 + c.no_click;
}

} // namespace

TEST_CASE("trial streams are reproducible and decorrelated") {
    detail::TrialRng a(42, 7);
    detail::TrialRng b(42, 7);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());

    detail::TrialRng c(42, 8);
    detail::TrialRng d(43, 7);
    detail::TrialRng e(42, 7);
    int same_cd = 0;
    int same_ce = 0;
    for (int i = 0; i < 64; ++i) {
        const auto ve = e.next_u64();
        if (c.next_u64() == ve) ++same_ce;
        if (d.next_u64() == ve) ++same_cd;
    }
    CHECK(same_ce == 0);
    CHECK(same_cd == 0);
}

TEST_CASE("uniform draws stay in the unit interval") {
    detail::TrialRng rng(1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("honest run matches the ideal statistics") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    const SimConfig cfg{1'000'000, 20260819, 1};
    const EmpiricalObservables emp = simulate(bs, std::nullopt, std::nullopt, cfg);

    const Observables ideal = ideal_observables(bs);
    const ComparisonReport rep = compare(emp, ideal, 4.0);
    CHECK(rep.pass);

    // 4 * sqrt(p (1 - p) / n) at p = 1/8, n = 1e6
    CHECK(std::abs(emp.estimates.p_d1 - 0.125) <= 0.0013228756555322954);
    CHECK(emp.counts.e1_errors == 0);
    CHECK(emp.counts.e3_errors == 0);
    CHECK(emp.estimates.p_e4 == 0.0);
    CHECK(total_events(emp.counts) == cfg.n_trials);
}

TEST_CASE("the identity strategy is indistinguishable from no eavesdropper") {
    const auto bs = BeamSplitter::from_reflectance(0.4);
    const SimConfig cfg{200'000, 7, 1};
    const std::optional<AttackStrategy> identity = identity_strategy();

    SECTION("perfect devices") {
        const auto honest = simulate(bs, std::nullopt, std::nullopt, cfg);
        const auto attacked = simulate(bs, identity, std::nullopt, cfg);
        CHECK(same_counts(honest.counts, attacked.counts));
    }
    SECTION("lossy, noisy devices") {
        DetectorModel det;
        det.eta_curve = EfficiencyCurve{CurveShape::Flat, 0.85};
        det.dark_count = 0.002;
        const auto honest = simulate(bs, std::nullopt, det, cfg);
        const auto attacked = simulate(bs, identity, det, cfg);
        CHECK(same_counts(honest.counts, attacked.counts));
    }
}

TEST_CASE("tallies do not depend on the shard count") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    AttackStrategy s = identity_strategy();
    s.c3 = CaseWeights{{"p00", 0.3}, {"0p0", 0.5}, {"multi", 0.2}};
    DetectorModel det;
    det.eta_curve = EfficiencyCurve{CurveShape::Flat, 0.9};
    det.dark_count = 0.001;

    const auto one = simulate(bs, s, det, SimConfig{100'000, 99, 1});
    const auto three = simulate(bs, s, det, SimConfig{100'000, 99, 3});
    const auto four = simulate(bs, s, det, SimConfig{100'000, 99, 4});
    CHECK(same_counts(one.counts, three.counts));
    CHECK(same_counts(one.counts, four.counts));
}

TEST_CASE("every trial lands in exactly one event class") {
    const auto bs = BeamSplitter::from_reflectance(0.3);
    AttackStrategy s = identity_strategy();
    s.c1 = CaseWeights{{"p00", 0.7}, {"multi", 0.3}};
    DetectorModel det;
    det.eta_curve = EfficiencyCurve{CurveShape::Flat, 0.6};
    det.dark_count = 0.01;
    const auto emp = simulate(bs, s, det, SimConfig{50'000, 5, 2});
    CHECK(total_events(emp.counts) == 50'000);
    CHECK(emp.counts.e1_errors <= emp.counts.e1);
    CHECK(emp.counts.e3_errors <= emp.counts.e3);
}

TEST_CASE("exact event probabilities reduce to the analytic map") {
    std::mt19937_64 rng(31415);
    for (int i = 0; i < 50; ++i) {
        const auto bs = testgen::random_splitter(rng);
        const AttackStrategy s = testgen::random_strategy(rng, bs);
        const Observables a = observables_from_strategy(s, bs);
        const Observables b = expected_observables(bs, s, std::nullopt);
        CHECK(std::abs(a.p_d1 - b.p_d1) <= 1e-12);
        CHECK(std::abs(a.p_d2 - b.p_d2) <= 1e-12);
        CHECK(std::abs(a.p_d3 - b.p_d3) <= 1e-12);
        CHECK(std::abs(a.p_e1 - b.p_e1) <= 1e-12);
        CHECK(std::abs(a.p_e3 - b.p_e3) <= 1e-12);
        CHECK(std::abs(a.p_e4 - b.p_e4) <= 1e-12);
        CHECK(b.p_e2 == 0.0);
    }
}

TEST_CASE("sampled strategies agree with their analytic statistics") {
    std::mt19937_64 rng(271828);
    const SimConfig cfg{100'000, 1234, 2};
    int passed = 0;
    for (int i = 0; i < 20; ++i) {
        const auto bs = testgen::random_splitter(rng);
        const AttackStrategy s = testgen::random_strategy(rng, bs);
        const auto emp = simulate(bs, s, std::nullopt, cfg);
        const Observables analytic = observables_from_strategy(s, bs);
        if (compare(emp, analytic, 4.0).pass) ++passed;
    }
    CHECK(passed >= 19);
}

TEST_CASE("dark counts raise the multi-click rate to twice their probability") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    const double p_d = 0.01;
    DetectorModel det;
    det.eta_curve = EfficiencyCurve{CurveShape::Flat, 1.0};
    det.dark_count = p_d;

    const Observables exact = expected_observables(bs, std::nullopt, det);
    // every pulse produces its one honest click, so a multi-click needs at
    // least one of the two silent detectors to fire
    CHECK(exact.p_e4 == Catch::Approx(2.0 * p_d - p_d * p_d).margin(1e-15));
    CHECK(exact.p_e4 <= 2.0 * p_d);

    const auto emp =
        simulate(bs, std::nullopt, det, SimConfig{1'000'000, 424242, 4});
    const ComparisonReport rep = compare(emp, exact, 4.0);
    CHECK(rep.pass);
}

TEST_CASE("lossy devices are reproduced by the exact model") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    DetectorModel det;
    det.eta_curve = EfficiencyCurve{CurveShape::Flat, 0.8};
    det.dark_count = 0.001;
    const Observables exact = expected_observables(bs, std::nullopt, det);
    const auto emp =
        simulate(bs, std::nullopt, det, SimConfig{1'000'000, 5150, 4});
    CHECK(compare(emp, exact, 4.0).pass);
}

TEST_CASE("detection errors are flagged only on mismatched pulses") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    AttackStrategy s = identity_strategy();
    s.c5 = CaseWeights{{"00q", 1.0}};
    const auto emp = simulate(bs, s, std::nullopt, SimConfig{400'000, 11, 1});

    // half of all D3 clicks come from the mismatched branch and carry the flag
    const Observables analytic = observables_from_strategy(s, bs);
    CHECK(analytic.p_e3 == Catch::Approx(0.25).margin(1e-15));
    CHECK(analytic.p_d3 == Catch::Approx(0.5).margin(1e-15));
    CHECK(compare(emp, analytic, 4.0).pass);
    CHECK(emp.counts.e3_errors > 0);
    CHECK(emp.counts.e3_errors < emp.counts.e3);
}

TEST_CASE("simulation input validation") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    CHECK_THROWS_AS(simulate(bs, std::nullopt, std::nullopt, SimConfig{0, 1, 1}),
                    ParameterError);
    CHECK_THROWS_AS(simulate(bs, std::nullopt, std::nullopt, SimConfig{1, 1, 0}),
                    ParameterError);

    AttackStrategy bad = identity_strategy();
    bad.c1 = CaseWeights{{"p00", 0.5}};
    CHECK_THROWS_AS(simulate(bs, bad, std::nullopt, SimConfig{10, 1, 1}),
                    StrategyError);
    CHECK_THROWS_AS(expected_observables(bs, bad, std::nullopt), StrategyError);

    DetectorModel det;
    det.eta_curve = EfficiencyCurve{CurveShape::Flat, 1.0};
    det.dark_count = 1.0;
    CHECK_THROWS_AS(simulate(bs, std::nullopt, det, SimConfig{10, 1, 1}),
                    ParameterError);
}

TEST_CASE("comparison gating") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    const auto emp = simulate(bs, std::nullopt, std::nullopt, SimConfig{1000, 3, 1});

    SECTION("threshold must be positive") {
        CHECK_THROWS_AS(compare(emp, ideal_observables(bs), 0.0), ParameterError);
        CHECK_THROWS_AS(compare(emp, ideal_observables(bs), -1.0), ParameterError);
    }
    SECTION("zero-variance fields demand exact agreement") {
        Observables shifted = ideal_observables(bs);
        shifted.p_e2 = 1e-6;
        const ComparisonReport rep = compare(emp, shifted, 4.0);
        CHECK_FALSE(rep.pass);
        bool found = false;
        for (const auto& f : rep.fields) {
            if (f.field == "p_e2") {
                found = true;
                CHECK(f.exact);
                CHECK_FALSE(f.pass);
            }
        }
        CHECK(found);
    }
    SECTION("a gross analytic mismatch is rejected") {
        Observables wrong = ideal_observables(bs);
        wrong.p_d1 = 0.5;
        CHECK_FALSE(compare(emp, wrong, 4.0).pass);
    }
    SECTION("report echoes the threshold") {
        const ComparisonReport rep = compare(emp, ideal_observables(bs), 3.5);
        CHECK(rep.z_threshold == 3.5);
        CHECK(rep.fields.size() == 7);
    }
}
