#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "cqc/attack.hpp"
#include "cqc/imperfections.hpp"
#include "cqc/types.hpp"

namespace cqc {

struct SimConfig {
    std::uint64_t n_trials = 1;
    std::uint64_t seed = 0;
    unsigned shards = 1;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

/// Counter-based generator: one independent stream per (seed, trial), so a
/// trial's randomness does not depend on which shard executes it.
class TrialRng {
public:
    TrialRng(std::uint64_t seed, std::uint64_t trial)
        : state_(mix64(mix64(seed) ^ mix64(trial + 0x9E3779B97F4A7C15ull))) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix64(state_);
    }

    double next_unit() { return (next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_unit() < p; }

private:
    std::uint64_t state_;
};

/// A concrete resend outcome: which detectors click. The polarization labels
/// never influence classification (errors are flagged by the branch), so only
/// the click pattern is kept.
struct OutcomePattern {
    std::array<bool, 3> clicks{};
    double weight = 0.0;
    double cum = 0.0;
};

struct CompiledCase {
    std::vector<OutcomePattern> outcomes;
};

inline std::array<bool, 3> clicks_from_label(CaseLabel c, std::string_view label) {
    if (label == kMultiLabel) {
        // Canonical representative; the choice only fixes which detectors
        // fire inside an event that is tallied as multi-click either way.
        switch (c) {
        case CaseLabel::C1: return {true, true, false};
        case CaseLabel::C2: return {true, true, false};
        default: return {false, true, true};
        }
    }
    return {label[0] != '0', label[1] != '0', label[2] != '0'};
}

struct CompiledStrategy {
    std::array<CompiledCase, 5> cases;
};

inline CompiledStrategy compile_strategy(const AttackStrategy& s) {
    CompiledStrategy out;
    for (CaseLabel c : {CaseLabel::C1, CaseLabel::C2, CaseLabel::C3,
                        CaseLabel::C4, CaseLabel::C5}) {
        CompiledCase& cc = out.cases[static_cast<std::size_t>(c)];
        const CaseWeights& cw = s.case_weights(c);
        const double total = cw.total_mass();
        double cum = 0.0;
        for (const auto& [label, w] : cw.entries()) {
            if (w == 0.0) continue;
            cum += w / total;
            cc.outcomes.push_back({clicks_from_label(c, label), w / total, cum});
        }
        if (!cc.outcomes.empty()) cc.outcomes.back().cum = 1.0;
    }
    return out;
}

inline CompiledStrategy compile_honest() {
    CompiledStrategy out;
    const std::array<std::array<bool, 3>, 5> supposed = {{
        {true, false, false},  // C1 -> D1
        {false, true, false},  // C2 -> D2
        {false, true, false},  // C3 -> D2
        {false, false, true},  // C4 -> D3
        {false, true, false},  // C5 -> D2
    }};
    for (std::size_t i = 0; i < 5; ++i)
        out.cases[i].outcomes.push_back({supposed[i], 1.0, 1.0});
    return out;
}

} // namespace detail

struct EventCounts {
    std::uint64_t e1 = 0;        // lone D1 clicks
    std::uint64_t e2 = 0;        // lone D2 clicks
    std::uint64_t e3 = 0;        // lone D3 clicks
    std::uint64_t e4 = 0;        // multi-click events
    std::uint64_t no_click = 0;
    std::uint64_t e1_errors = 0; // lone D1 clicks on mismatched pulses
    std::uint64_t e3_errors = 0; // lone D3 clicks on mismatched pulses
};

struct EmpiricalObservables {
    std::uint64_t n_trials = 0;
    EventCounts counts;
    Observables estimates;
    Observables std_errors;
};

namespace detail {

struct TrialContext {
    double c1_hi = 0.0;    // cumulative case thresholds, matched branch
    double c2_hi = 0.0;
    double c3_hi = 0.0;    // mismatched branch
    const CompiledStrategy* strategy = nullptr;
    bool imperfect = false;
    double eta = 1.0;
    double dark = 0.0;
};

inline void run_trial(std::uint64_t seed, std::uint64_t trial,
                      const TrialContext& ctx, EventCounts& tally) {
    TrialRng rng(seed, trial);
    const bool alice_v = rng.bernoulli(0.5);
    const bool bob_v = rng.bernoulli(0.5);
    const bool matched = alice_v == bob_v;

    const double u = rng.next_unit();
    CaseLabel c;
    if (matched)
        c = u < ctx.c1_hi ? CaseLabel::C1
                          : (u < ctx.c2_hi ? CaseLabel::C2 : CaseLabel::C4);
    else
        c = u < ctx.c3_hi ? CaseLabel::C3 : CaseLabel::C5;

    const CompiledCase& cc = ctx.strategy->cases[static_cast<std::size_t>(c)];
    std::array<bool, 3> clicks{};
    if (cc.outcomes.size() == 1) {
        clicks = cc.outcomes.front().clicks;
    } else {
        const double v = rng.next_unit();
        clicks = cc.outcomes.back().clicks;
        for (const auto& pat : cc.outcomes) {
            if (v < pat.cum) {
                clicks = pat.clicks;
                break;
            }
        }
    }

    if (ctx.imperfect) {
        for (bool& cl : clicks)
            cl = cl ? rng.bernoulli(ctx.eta) : rng.bernoulli(ctx.dark);
    }

    const int n = clicks[0] + clicks[1] + clicks[2];
    if (n == 0) {
        ++tally.no_click;
    } else if (n >= 2) {
        ++tally.e4;
    } else if (clicks[0]) {
        ++tally.e1;
        if (!matched) ++tally.e1_errors;
    } else if (clicks[1]) {
        ++tally.e2;
    } else {
        ++tally.e3;
        if (!matched) ++tally.e3_errors;
    }
}

inline TrialContext make_context(const BeamSplitter& bs,
                                 const CompiledStrategy& strat,
                                 const std::optional<DetectorModel>& detector) {
    const double r = bs.reflectance();
    const double t = bs.transmittance();
    TrialContext ctx;
    ctx.c1_hi = r * t;
    ctx.c2_hi = r * t + r * r;
    ctx.c3_hi = r;
    ctx.strategy = &strat;
    if (detector) {
        ctx.imperfect = true;
        ctx.eta = detector->eta_curve.value_at(detector->eta_curve.center_ns);
        ctx.dark = detector->dark_count;
    }
    return ctx;
}

} // namespace detail

/// Simulate the protocol trial by trial. With no strategy the honest outcome
/// is delivered; with no detector the devices are perfect. Results depend
/// only on (seed, n_trials) and the physics inputs, never on the shard count.
inline EmpiricalObservables simulate(const BeamSplitter& bs,
                                     const std::optional<AttackStrategy>& strategy,
                                     const std::optional<DetectorModel>& detector,
                                     const SimConfig& cfg) {
    if (cfg.n_trials < 1)
        throw ParameterError("simulate: n_trials must be at least 1");
    if (cfg.shards < 1)
        throw ParameterError("simulate: shards must be at least 1");
    if (strategy) {
        if (auto v = validate_strategy(*strategy, bs); !v.empty())
            throw StrategyError(std::move(v));
    }
    if (detector) validate_detector_model(*detector);

    const detail::CompiledStrategy strat =
        strategy ? detail::compile_strategy(*strategy) : detail::compile_honest();
    const detail::TrialContext ctx = detail::make_context(bs, strat, detector);

    const std::uint64_t n = cfg.n_trials;
    const unsigned shards = cfg.shards;
    auto run_range = [&ctx, seed = cfg.seed](std::uint64_t lo, std::uint64_t hi) {
        EventCounts tally;
        for (std::uint64_t t = lo; t < hi; ++t)
            detail::run_trial(seed, t, ctx, tally);
        return tally;
    };

    EventCounts total;
    if (shards == 1) {
        total = run_range(0, n);
    } else {
        std::vector<std::future<EventCounts>> futures;
        futures.reserve(shards);
        for (unsigned s = 0; s < shards; ++s) {
            const std::uint64_t lo = n * s / shards;
            const std::uint64_t hi = n * (s + 1) / shards;
            futures.push_back(std::async(std::launch::async, run_range, lo, hi));
        }
        for (auto& f : futures) {
            const EventCounts part = f.get();
            total.e1 += part.e1;
            total.e2 += part.e2;
            total.e3 += part.e3;
            total.e4 += part.e4;
            total.no_click += part.no_click;
            total.e1_errors += part.e1_errors;
            total.e3_errors += part.e3_errors;
        }
    }

    EmpiricalObservables emp;
    emp.n_trials = n;
    emp.counts = total;
    const double dn = static_cast<double>(n);
    emp.estimates.p_d1 = static_cast<double>(total.e1) / dn;
    emp.estimates.p_d2 = static_cast<double>(total.e2) / dn;
    emp.estimates.p_d3 = static_cast<double>(total.e3) / dn;
    emp.estimates.p_e1 = static_cast<double>(total.e1_errors) / dn;
    emp.estimates.p_e2 = 0.0;
    emp.estimates.p_e3 = static_cast<double>(total.e3_errors) / dn;
    emp.estimates.p_e4 = static_cast<double>(total.e4) / dn;
    auto se = [dn](double p) { return std::sqrt(p * (1.0 - p) / dn); };
    emp.std_errors.p_d1 = se(emp.estimates.p_d1);
    emp.std_errors.p_d2 = se(emp.estimates.p_d2);
    emp.std_errors.p_d3 = se(emp.estimates.p_d3);
    emp.std_errors.p_e1 = se(emp.estimates.p_e1);
    emp.std_errors.p_e2 = 0.0;
    emp.std_errors.p_e3 = se(emp.estimates.p_e3);
    emp.std_errors.p_e4 = se(emp.estimates.p_e4);
    return emp;
}

/// Exact event-class probabilities under the simulator's device model, where
/// efficiency thins every indicated click and dark counts fire every silent
/// detector independently. Reduces to observables_from_strategy for perfect
/// devices, and is the right analytic reference when they are not.
inline Observables expected_observables(const BeamSplitter& bs,
                                        const std::optional<AttackStrategy>& strategy,
                                        const std::optional<DetectorModel>& detector) {
    if (strategy) {
        if (auto v = validate_strategy(*strategy, bs); !v.empty())
            throw StrategyError(std::move(v));
    }
    if (detector) validate_detector_model(*detector);

    const detail::CompiledStrategy strat =
        strategy ? detail::compile_strategy(*strategy) : detail::compile_honest();
    const double eta =
        detector ? detector->eta_curve.value_at(detector->eta_curve.center_ns) : 1.0;
    const double dark = detector ? detector->dark_count : 0.0;

    Observables out;
    for (const bool matched : {true, false}) {
        const auto dist = matched
            ? supposed_outcome_distribution(bs, Polarization::H, Polarization::H)
            : supposed_outcome_distribution(bs, Polarization::H, Polarization::V);
        for (const auto& [c, prior] : dist) {
            const detail::CompiledCase& cc = strat.cases[static_cast<std::size_t>(c)];
            for (const auto& pat : cc.outcomes) {
                const double base = 0.5 * prior * pat.weight;
                for (int mask = 0; mask < 8; ++mask) {
                    double prob = base;
                    int n = 0;
                    for (int i = 0; i < 3; ++i) {
                        const bool fires = mask & (1 << i);
                        const double p_fire = pat.clicks[i] ? eta : dark;
                        prob *= fires ? p_fire : 1.0 - p_fire;
                        n += fires;
                    }
                    if (prob == 0.0) continue;
                    if (n >= 2) {
                        out.p_e4 += prob;
                    } else if (mask == 1) {
                        out.p_d1 += prob;
                        if (!matched) out.p_e1 += prob;
                    } else if (mask == 2) {
                        out.p_d2 += prob;
                    } else if (mask == 4) {
                        out.p_d3 += prob;
                        if (!matched) out.p_e3 += prob;
                    }
                }
            }
        }
    }
    return out;
}

struct FieldComparison {
    std::string field;
    double estimate;
    double analytic;
    double std_error;
    double z;    // 0 when the comparison is exact
    bool exact;  // std_error = 0: equality required
    bool pass;
};

struct ComparisonReport {
    std::vector<FieldComparison> fields;
    double z_threshold;
    bool pass;
};

/// Gate each empirical estimate against its analytic value at z_threshold
/// standard errors. Fields with zero standard error must match exactly.
inline ComparisonReport compare(const EmpiricalObservables& emp,
                                const Observables& analytic,
                                double z_threshold = 4.0) {
    if (!(z_threshold > 0.0))
        throw ParameterError("compare: z threshold must be positive");

    const std::array<std::tuple<const char*, double, double, double>, 7> rows = {{
        {"p_D1", emp.estimates.p_d1, analytic.p_d1, emp.std_errors.p_d1},
        {"p_D2", emp.estimates.p_d2, analytic.p_d2, emp.std_errors.p_d2},
        {"p_D3", emp.estimates.p_d3, analytic.p_d3, emp.std_errors.p_d3},
        {"p_e1", emp.estimates.p_e1, analytic.p_e1, emp.std_errors.p_e1},
        {"p_e2", emp.estimates.p_e2, analytic.p_e2, emp.std_errors.p_e2},
        {"p_e3", emp.estimates.p_e3, analytic.p_e3, emp.std_errors.p_e3},
        {"p_E4", emp.estimates.p_e4, analytic.p_e4, emp.std_errors.p_e4},
    }};

    ComparisonReport rep;
    rep.z_threshold = z_threshold;
    rep.pass = true;
    for (const auto& [name, est, ana, se] : rows) {
        FieldComparison fc;
        fc.field = name;
        fc.estimate = est;
        fc.analytic = ana;
        fc.std_error = se;
        if (se == 0.0) {
            fc.exact = true;
            fc.z = 0.0;
            fc.pass = est == ana;
        } else {
            fc.exact = false;
            fc.z = std::abs(est - ana) / se;
            fc.pass = fc.z <= z_threshold;
        }
        rep.pass = rep.pass && fc.pass;
        rep.fields.push_back(std::move(fc));
    }
    return rep;
}

} // namespace cqc
