#pragma once

#include <cmath>
#include <string>

#include "cqc/errors.hpp"

namespace cqc {

/// Absolute tolerance for algebraic identities.
inline constexpr double kIdentityTol = 1e-12;

/// Absolute tolerance for strategy normalization and the splitter-ratio constraint.
inline constexpr double kStrategyTol = 1e-9;

enum class Polarization { H, V };

enum class DetectorId { D1, D2, D3 };

/// The five pulse configurations an intercepting eavesdropper distinguishes.
/// C1, C2, C4 occur when Alice's and Bob's polarization choices match
/// (C4 with the blocked path occupied); C3 and C5 when they differ.
enum class CaseLabel { C1, C2, C3, C4, C5 };

inline const char* to_string(Polarization p) {
    return p == Polarization::H ? "H" : "V";
}

inline const char* to_string(DetectorId d) {
    switch (d) {
    case DetectorId::D1: return "D1";
    case DetectorId::D2: return "D2";
    default: return "D3";
    }
}

inline const char* to_string(CaseLabel c) {
    switch (c) {
    case CaseLabel::C1: return "c1";
    case CaseLabel::C2: return "c2";
    case CaseLabel::C3: return "c3";
    case CaseLabel::C4: return "c4";
    default: return "c5";
    }
}

/// Lossless beam splitter: a photon reflects with probability R and
/// transmits with probability T, R + T = 1.
class BeamSplitter {
public:
    BeamSplitter(double reflectance, double transmittance)
        : r_(reflectance), t_(transmittance) {
        if (!(r_ >= 0.0 && r_ <= 1.0) || !(t_ >= 0.0 && t_ <= 1.0))
            throw ParameterError("beam splitter: R and T must lie in [0, 1]");
        if (std::abs(r_ + t_ - 1.0) > kIdentityTol)
            throw ParameterError("beam splitter: R + T must equal 1");
    }

    static BeamSplitter from_reflectance(double r) {
        return BeamSplitter(r, 1.0 - r);
    }

    double reflectance() const { return r_; }
    double transmittance() const { return t_; }

private:
    double r_;
    double t_;
};

enum class ClickLabel { None, H, V };

/// Joint record of the three gated detectors for one pulse.
struct DetectorOutcome {
    ClickLabel d1 = ClickLabel::None;
    ClickLabel d2 = ClickLabel::None;
    ClickLabel d3 = ClickLabel::None;

    int click_count() const {
        return (d1 != ClickLabel::None) + (d2 != ClickLabel::None) +
               (d3 != ClickLabel::None);
    }

    bool multi_click() const { return click_count() >= 2; }
};

/// Per-pulse detection statistics. p_d1..p_d3 are probabilities of a lone
/// click at the respective detector, p_e1..p_e3 the joint probabilities that
/// the click occurs and its polarization record is wrong, and p_e4 the
/// probability of more than one detector firing.
struct Observables {
    double p_d1 = 0.0;
    double p_d2 = 0.0;
    double p_d3 = 0.0;
    double p_e1 = 0.0;
    double p_e2 = 0.0;
    double p_e3 = 0.0;
    double p_e4 = 0.0;
};

inline void validate_observables(const Observables& o) {
    const double fields[] = {o.p_d1, o.p_d2, o.p_d3, o.p_e1, o.p_e2, o.p_e3, o.p_e4};
    for (double f : fields)
        if (!(f >= -kIdentityTol && f <= 1.0 + kIdentityTol))
            throw ParameterError("observables: probabilities must lie in [0, 1]");
    if (o.p_e1 > o.p_d1 + kIdentityTol)
        throw ParameterError("observables: p_e1 must not exceed p_D1");
    if (o.p_e2 > o.p_d2 + kIdentityTol)
        throw ParameterError("observables: p_e2 must not exceed p_D2");
    if (o.p_e3 > o.p_d3 + kIdentityTol)
        throw ParameterError("observables: p_e3 must not exceed p_D3");
    if (o.p_d1 + o.p_d2 + o.p_d3 + o.p_e4 > 1.0 + kStrategyTol)
        throw ParameterError("observables: event probabilities must sum to at most 1");
}

} // namespace cqc
