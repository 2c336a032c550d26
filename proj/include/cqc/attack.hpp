#pragma once

#include <algorithm>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cqc/protocol.hpp"
#include "cqc/types.hpp"

namespace cqc {

/// What the eavesdropper learns from her own record in a given outcome.
enum class EveKnowledge { None, PolarizationKnown };

/// Outcome labels are three characters over {0, p, q}: position i is detector
/// Di, '0' means silent, 'p' a click recorded with Alice's polarization and
/// 'q' one with Bob's. "p00" is a lone D1 click, "00q" a lone D3 click that
/// reveals Bob's choice. The keyword "multi" aggregates all multi-click
/// outcomes of a case into a single mass.
inline constexpr std::string_view kMultiLabel = "multi";

inline bool is_outcome_label(std::string_view s) {
    if (s == kMultiLabel) return true;
    if (s.size() != 3) return false;
    int clicks = 0;
    for (char c : s) {
        if (c != '0' && c != 'p' && c != 'q') return false;
        if (c != '0') ++clicks;
    }
    return clicks >= 1;
}

inline bool is_multi_click_label(std::string_view s) {
    if (s == kMultiLabel) return true;
    return s.size() == 3 && std::count(s.begin(), s.end(), '0') <= 1;
}

/// Whether a resent outcome can occur in a case. Single-photon interception
/// constrains the labels: in C1 any click pattern keeps D1 at Alice's
/// polarization, in C2 it keeps D2, in C3 every multi-click pattern involves
/// D3, and the resend cases C4/C5 produce lone clicks only.
inline bool label_in_support(CaseLabel c, std::string_view s) {
    if (!is_outcome_label(s)) return false;
    const bool has_q = s.find('q') != std::string_view::npos;
    switch (c) {
    case CaseLabel::C1:
        if (s == "p00" || s == kMultiLabel) return true;
        return !has_q && s[0] == 'p' && (s[1] != '0' || s[2] != '0');
    case CaseLabel::C2:
        if (s == "0p0" || s == kMultiLabel) return true;
        return !has_q && s[1] == 'p' && (s[0] != '0' || s[2] != '0');
    case CaseLabel::C3:
        if (s == "p00" || s == "0p0" || s == kMultiLabel) return true;
        return s[2] != '0' && (s[0] != '0' || s[1] != '0');
    case CaseLabel::C4:
        return s == "p00" || s == "0p0" || s == "00p";
    case CaseLabel::C5:
        return s == "p00" || s == "0p0" || s == "00q";
    }
    return false;
}

/// Eve keeps the photon only in the resend cases C4 and C5, where her
/// measurement fixes the polarization she sends on.
inline EveKnowledge eve_knowledge(CaseLabel c, std::string_view label) {
    const bool resend = c == CaseLabel::C4 || c == CaseLabel::C5;
    if (resend && !is_multi_click_label(label))
        return EveKnowledge::PolarizationKnown;
    return EveKnowledge::None;
}

/// One case's table of outcome weights (squared amplitudes). Labels absent
/// from the table carry weight zero; setting a weight to zero removes the
/// entry.
class CaseWeights {
public:
    CaseWeights() = default;

    CaseWeights(std::initializer_list<std::pair<const std::string, double>> init)
        : weights_(init) {}

    double weight(std::string_view label) const {
        auto it = weights_.find(label);
        return it == weights_.end() ? 0.0 : it->second;
    }

    void set(std::string_view label, double w) {
        auto it = weights_.find(label);
        if (w == 0.0) {
            if (it != weights_.end()) weights_.erase(it);
        } else if (it != weights_.end()) {
            it->second = w;
        } else {
            weights_.emplace(std::string(label), w);
        }
    }

    double single_click_sum() const {
        double s = 0.0;
        for (const auto& [label, w] : weights_)
            if (!is_multi_click_label(label)) s += w;
        return s;
    }

    double multi_click_mass() const {
        double s = 0.0;
        for (const auto& [label, w] : weights_)
            if (is_multi_click_label(label)) s += w;
        return s;
    }

    double total_mass() const {
        double s = 0.0;
        for (const auto& [label, w] : weights_) s += w;
        return s;
    }

    bool empty() const { return weights_.empty(); }

    const std::map<std::string, double, std::less<>>& entries() const {
        return weights_;
    }

private:
    std::map<std::string, double, std::less<>> weights_;
};

/// An intercept-resend behavior: one weight table per case.
struct AttackStrategy {
    CaseWeights c1;
    CaseWeights c2;
    CaseWeights c3;
    CaseWeights c4;
    CaseWeights c5;

    const CaseWeights& case_weights(CaseLabel c) const {
        switch (c) {
        case CaseLabel::C1: return c1;
        case CaseLabel::C2: return c2;
        case CaseLabel::C3: return c3;
        case CaseLabel::C4: return c4;
        default: return c5;
        }
    }

    CaseWeights& case_weights(CaseLabel c) {
        switch (c) {
        case CaseLabel::C1: return c1;
        case CaseLabel::C2: return c2;
        case CaseLabel::C3: return c3;
        case CaseLabel::C4: return c4;
        default: return c5;
        }
    }
};

/// The strategy that reproduces the honest protocol exactly.
inline AttackStrategy identity_strategy() {
    AttackStrategy s;
    s.c1.set("p00", 1.0);
    s.c2.set("0p0", 1.0);
    s.c3.set("0p0", 1.0);
    s.c4.set("00p", 1.0);
    s.c5.set("0p0", 1.0);
    return s;
}

enum class ViolationKind {
    NotNormalized,
    NegativeWeight,
    UnsupportedOutcome,
    BsRatioBroken,
};

struct StrategyViolation {
    ViolationKind kind;
    CaseLabel case_label;
    double magnitude;
    std::string label; // offending outcome label, when one applies
};

inline std::string describe(const StrategyViolation& v) {
    std::string msg(to_string(v.case_label));
    switch (v.kind) {
    case ViolationKind::NotNormalized:
        msg += ": weights sum to 1 off by ";
        break;
    case ViolationKind::NegativeWeight:
        msg += ": negative weight on '" + v.label + "' of ";
        break;
    case ViolationKind::UnsupportedOutcome:
        msg += ": outcome '" + v.label + "' outside the case support, weight ";
        break;
    case ViolationKind::BsRatioBroken:
        msg += ": blocked-path weights break w_p00 * T = w_0p0 * R by ";
        break;
    }
    msg += std::to_string(v.magnitude);
    return msg;
}

struct StrategyError : Error {
    explicit StrategyError(std::vector<StrategyViolation> v)
        : Error(join(v)), violations(std::move(v)) {}

    std::vector<StrategyViolation> violations;

private:
    static std::string join(const std::vector<StrategyViolation>& v) {
        std::string msg = "invalid strategy:";
        for (const auto& viol : v) {
            msg += "\n  ";
            msg += describe(viol);
        }
        return msg;
    }
};

namespace detail {

/// Violations that do not depend on the splitter: support, sign, normalization.
inline std::vector<StrategyViolation> structural_violations(const AttackStrategy& s) {
    std::vector<StrategyViolation> out;
    for (CaseLabel c : {CaseLabel::C1, CaseLabel::C2, CaseLabel::C3,
                        CaseLabel::C4, CaseLabel::C5}) {
        const CaseWeights& cw = s.case_weights(c);
        for (const auto& [label, w] : cw.entries()) {
            if (!label_in_support(c, label))
                out.push_back({ViolationKind::UnsupportedOutcome, c, std::abs(w), label});
            if (w < 0.0)
                out.push_back({ViolationKind::NegativeWeight, c, -w, label});
        }
        const double total = cw.total_mass();
        if (std::abs(total - 1.0) > kStrategyTol)
            out.push_back({ViolationKind::NotNormalized, c, std::abs(total - 1.0), {}});
    }
    return out;
}

} // namespace detail

/// All constraint violations of a strategy; empty means valid. The C4 table
/// must split its D1/D2 weights like the beam splitter itself,
/// w_p00 * T = w_0p0 * R, because both arise from one intercepted photon.
inline std::vector<StrategyViolation> validate_strategy(const AttackStrategy& s,
                                                        const BeamSplitter& bs) {
    std::vector<StrategyViolation> out = detail::structural_violations(s);
    const double resid = s.c4.weight("p00") * bs.transmittance() -
                         s.c4.weight("0p0") * bs.reflectance();
    if (std::abs(resid) > kStrategyTol)
        out.push_back({ViolationKind::BsRatioBroken, CaseLabel::C4, std::abs(resid), {}});
    return out;
}

/// Drop all multi-click mass and renormalize each case over lone clicks.
/// Models the noiseless regime, where any multi-click aborts the pulse.
inline AttackStrategy restrict_noiseless(const AttackStrategy& s) {
    if (auto v = detail::structural_violations(s); !v.empty())
        throw StrategyError(std::move(v));
    AttackStrategy out = s;
    for (CaseLabel c : {CaseLabel::C1, CaseLabel::C2, CaseLabel::C3}) {
        CaseWeights& cw = out.case_weights(c);
        if (cw.multi_click_mass() == 0.0) continue;
        const double singles = cw.single_click_sum();
        if (singles <= 0.0)
            throw DegenerateCaseError(std::string("restrict_noiseless: ") + to_string(c) +
                                      " has no single-click mass");
        CaseWeights renorm;
        for (const auto& [label, w] : cw.entries())
            if (!is_multi_click_label(label)) renorm.set(label, w / singles);
        cw = renorm;
    }
    return out;
}

/// Detection statistics produced by a strategy. Each case contributes its
/// prior times the weight it puts on the respective lone click; error terms
/// collect the mismatched-polarization contributions of C3 and C5.
inline Observables observables_from_strategy(const AttackStrategy& s,
                                             const BeamSplitter& bs) {
    if (auto v = validate_strategy(s, bs); !v.empty())
        throw StrategyError(std::move(v));

    const double r = bs.reflectance();
    const double t = bs.transmittance();

    const double w1 = s.c1.weight("p00");
    const double w2 = s.c2.weight("0p0");
    const double w3_d1 = s.c3.weight("p00");
    const double w3_d2 = s.c3.weight("0p0");
    const double w4_d1 = s.c4.weight("p00");
    const double w4_d2 = s.c4.weight("0p0");
    const double w4_d3 = s.c4.weight("00p");
    const double w5_d1 = s.c5.weight("p00");
    const double w5_d2 = s.c5.weight("0p0");
    const double w5_d3 = s.c5.weight("00q");

    Observables o;
    o.p_d1 = (r * t / 2.0) * w1 + (r / 2.0) * w3_d1 + (t / 2.0) * w4_d1 + (t / 2.0) * w5_d1;
    o.p_d2 = (r * r / 2.0) * w2 + (r / 2.0) * w3_d2 + (t / 2.0) * w4_d2 + (t / 2.0) * w5_d2;
    o.p_d3 = (t / 2.0) * (w4_d3 + w5_d3);
    o.p_e1 = (r / 2.0) * w3_d1 + (t / 2.0) * w5_d1;
    o.p_e2 = 0.0;
    o.p_e3 = (t / 2.0) * w5_d3;
    o.p_e4 = (r * t / 2.0) * s.c1.multi_click_mass() +
             (r * r / 2.0) * s.c2.multi_click_mass() +
             (r / 2.0) * s.c3.multi_click_mass();
    return o;
}

} // namespace cqc
