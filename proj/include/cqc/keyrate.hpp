#pragma once

#include <algorithm>
#include <cmath>

#include "cqc/types.hpp"

namespace cqc {

inline double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw ParameterError("binary_entropy: argument outside [0, 1]");
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

/// Error rate among the key events.
inline double qber(const Observables& o) {
    validate_observables(o);
    if (o.p_d1 == 0.0)
        throw UndefinedQberError("qber: p_D1 = 0, no key events");
    return o.p_e1 / o.p_d1;
}

/// Information shared by Alice and Bob per pulse: the key-event rate reduced
/// by the error-correction cost.
inline double mutual_info_ab(const Observables& o) {
    validate_observables(o);
    if (o.p_d1 == 0.0) return 0.0;
    return o.p_d1 * (1.0 - binary_entropy(o.p_e1 / o.p_d1));
}

/// Upper bound on the eavesdropper's information per pulse. Every blocked
/// photon she failed to return to D3 was measured and resent, and a fraction
/// R of those resent photons lands in the key.
inline double mutual_info_ae(const Observables& o, const BeamSplitter& bs) {
    validate_observables(o);
    const double v = (bs.transmittance() / 2.0 + o.p_e3 - o.p_d3) * bs.reflectance();
    if (v < -kStrategyTol)
        throw InconsistentObservablesError(
            "mutual_info_ae: p_D3 exceeds T/2 + p_e3, observables are inconsistent");
    return std::max(v, 0.0);
}

struct KeyRateReport {
    double qber;
    double i_ab;
    double i_ae;
    double m_k;
};

/// Net secret-key rate per pulse. Requires key events (p_D1 > 0).
inline KeyRateReport key_rate(const Observables& o, const BeamSplitter& bs) {
    KeyRateReport rep;
    rep.qber = qber(o);
    rep.i_ab = mutual_info_ab(o);
    rep.i_ae = mutual_info_ae(o, bs);
    rep.m_k = rep.i_ab - rep.i_ae;
    return rep;
}

} // namespace cqc
