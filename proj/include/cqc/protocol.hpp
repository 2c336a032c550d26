#pragma once

#include <utility>
#include <vector>

#include "cqc/types.hpp"

namespace cqc {

/// Click statistics of the honest protocol with perfect devices.
///
/// A lone D1 click (probability RT/2) is a key event. D2 fires on the
/// matched-blocking interference outcome and on half of the mismatched
/// pulses; D3 fires when Bob absorbs the transmitted component.
inline Observables ideal_observables(const BeamSplitter& bs) {
    const double r = bs.reflectance();
    const double t = bs.transmittance();
    Observables o;
    o.p_d1 = r * t / 2.0;
    o.p_d2 = r * r / 2.0 + 0.5;
    o.p_d3 = t / 2.0;
    return o;
}

/// Map a pulse configuration to its attack case. `p` is Alice's polarization,
/// `q` Bob's, `mode_b_occupied` whether the transmitted component reached a
/// blocked path, and `supposed` the detector the honest protocol would fire.
inline CaseLabel classify_case(Polarization p, Polarization q,
                               bool mode_b_occupied, DetectorId supposed) {
    if (p == q) {
        if (!mode_b_occupied && supposed == DetectorId::D1) return CaseLabel::C1;
        if (!mode_b_occupied && supposed == DetectorId::D2) return CaseLabel::C2;
        if (mode_b_occupied && supposed == DetectorId::D3) return CaseLabel::C4;
    } else {
        if (!mode_b_occupied && supposed == DetectorId::D2) return CaseLabel::C3;
        if (mode_b_occupied && supposed == DetectorId::D2) return CaseLabel::C5;
    }
    throw ParameterError("classify_case: configuration does not occur in the protocol");
}

/// Distribution of the honest outcome cases conditional on the polarization
/// choice. Matching choices split the pulse over {C1, C2, C4} with weights
/// {RT, R^2, T}; differing choices over {C3, C5} with weights {R, T}.
inline std::vector<std::pair<CaseLabel, double>>
supposed_outcome_distribution(const BeamSplitter& bs, Polarization p, Polarization q) {
    const double r = bs.reflectance();
    const double t = bs.transmittance();
    if (p == q)
        return {{CaseLabel::C1, r * t}, {CaseLabel::C2, r * r}, {CaseLabel::C4, t}};
    return {{CaseLabel::C3, r}, {CaseLabel::C5, t}};
}

} // namespace cqc
