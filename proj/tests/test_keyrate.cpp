#include <cmath>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "cqc/keyrate.hpp"
#include "cqc/protocol.hpp"
#include "support/generators.hpp"

using namespace cqc;

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.5) == Catch::Approx(1.0).margin(1e-15));
    CHECK(binary_entropy(0.11) == Catch::Approx(0.499915958164528).margin(1e-12));
    CHECK_THROWS_AS(binary_entropy(-0.01), ParameterError);
    CHECK_THROWS_AS(binary_entropy(1.01), ParameterError);

    for (int i = 1; i < 50; ++i) {
        const double x = static_cast<double>(i) / 100.0;
        CHECK(std::abs(binary_entropy(x) - binary_entropy(1.0 - x)) <= 1e-12);
        CHECK(binary_entropy(x) > 0.0);
        CHECK(binary_entropy(x) < 1.0);
    }
}

namespace {

Observables stats(double p_d1, double p_e1, double p_d3 = 0.0, double p_e3 = 0.0) {
    Observables o;
    o.p_d1 = p_d1;
    o.p_e1 = p_e1;
    o.p_d3 = p_d3;
    o.p_e3 = p_e3;
    o.p_d2 = 0.0;
    return o;
}

} // namespace

TEST_CASE("qber") {
    CHECK(qber(stats(0.125, 0.0)) == 0.0);
    CHECK(qber(stats(0.05, 0.05)) == 1.0);
    CHECK(qber(stats(0.125, 0.01375)) == Catch::Approx(0.11).margin(1e-15));
    CHECK_THROWS_AS(qber(stats(0.0, 0.0)), UndefinedQberError);
}

TEST_CASE("mutual information Alice-Bob") {
    CHECK(mutual_info_ab(stats(0.0, 0.0)) == 0.0);
    CHECK(mutual_info_ab(stats(0.125, 0.0)) == Catch::Approx(0.125).margin(1e-15));
    // qber = 0.11
    CHECK(mutual_info_ab(stats(0.125, 0.01375)) ==
          Catch::Approx(0.062510505229434).margin(1e-12));
    // a coin-flip key carries no information
    CHECK(mutual_info_ab(stats(0.1, 0.05)) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("mutual information Alice-Eve") {
    const auto bs = BeamSplitter::from_reflectance(0.5);

    SECTION("honest statistics leak nothing") {
        CHECK(mutual_info_ae(ideal_observables(bs), bs) == 0.0);
    }

    SECTION("a D3 deficit is Eve's gain") {
        CHECK(mutual_info_ae(stats(0.125, 0.0, 0.2, 0.05), bs) ==
              Catch::Approx(0.05).margin(1e-12));
    }

    SECTION("tiny negative values from rounding clamp to zero") {
        const Observables o = stats(0.125, 0.0, 0.25 + 2e-10, 0.0);
        CHECK(mutual_info_ae(o, bs) == 0.0);
    }

    SECTION("a real surplus at D3 is inconsistent with the model") {
        CHECK_THROWS_AS(mutual_info_ae(stats(0.125, 0.0, 0.35, 0.05), bs),
                        InconsistentObservablesError);
    }
}

TEST_CASE("key rate at the balanced splitter") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    const KeyRateReport rep = key_rate(ideal_observables(bs), bs);
    CHECK(rep.qber == 0.0);
    CHECK(std::abs(rep.i_ab - 0.125) <= 1e-12);
    CHECK(rep.i_ae == 0.0);
    CHECK(std::abs(rep.m_k - 0.125) <= 1e-12);
}

TEST_CASE("key rate requires key events") {
    const auto bs = BeamSplitter::from_reflectance(0.0);
    CHECK_THROWS_AS(key_rate(ideal_observables(bs), bs), UndefinedQberError);
}

TEST_CASE("the balanced splitter maximizes the ideal rate") {
    double best_r = -1.0;
    double best_m = -1.0;
    for (int i = 1; i < 1000; ++i) {
        const double r = static_cast<double>(i) / 1000.0;
        const auto bs = BeamSplitter::from_reflectance(r);
        const KeyRateReport rep = key_rate(ideal_observables(bs), bs);
        if (rep.m_k > best_m) {
            best_m = rep.m_k;
            best_r = r;
        }
    }
    CHECK(std::abs(best_r - 0.5) <= 1e-3);
    CHECK(std::abs(best_m - 0.125) <= 1e-12);
}

TEST_CASE("rate falls strictly while errors grow") {
    const auto bs = BeamSplitter::from_reflectance(0.5);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 40; ++i) {
        Observables o = ideal_observables(bs);
        o.p_e1 = 0.06 * static_cast<double>(i) / 40.0; // qber up to 0.48
        const KeyRateReport rep = key_rate(o, bs);
        CHECK(rep.m_k < prev);
        prev = rep.m_k;
    }
}

TEST_CASE("report fields are internally consistent") {
    std::mt19937_64 rng(4242);
    for (int i = 0; i < 300; ++i) {
        const auto bs = testgen::random_splitter(rng);
        const AttackStrategy s = testgen::random_noiseless_strategy(rng, bs);
        const Observables o = observables_from_strategy(s, bs);
        if (o.p_d1 == 0.0) continue;
        const KeyRateReport rep = key_rate(o, bs);
        CHECK(rep.qber >= 0.0);
        CHECK(rep.qber <= 1.0);
        CHECK(rep.i_ab >= 0.0);
        CHECK(rep.i_ab <= o.p_d1 + 1e-15);
        CHECK(rep.i_ae >= 0.0);
        CHECK(rep.m_k == rep.i_ab - rep.i_ae);
    }
}
