#pragma once

#include <cmath>

#include "cqc/attack.hpp"
#include "cqc/keyrate.hpp"
#include "cqc/types.hpp"

namespace cqc {

enum class CurveShape { Flat, Trapezoid, GaussianWindow };

/// Detector efficiency as a function of arrival time within the gate.
///
/// Flat ignores timing. Trapezoid holds eta_max on a plateau of half the
/// width, then falls linearly to the floor at the window edge. GaussianWindow
/// decays as floor + (eta_max - floor) * 2^(-(2 dt / width)^2), so width is
/// the full width at half maximum above the floor.
struct EfficiencyCurve {
    CurveShape shape = CurveShape::Flat;
    double eta_max = 1.0;
    double center_ns = 0.0;
    double width_ns = 0.0;
    double floor = 0.0;

    double value_at(double t_ns) const {
        const double dt = std::abs(t_ns - center_ns);
        switch (shape) {
        case CurveShape::Flat:
            return eta_max;
        case CurveShape::Trapezoid: {
            const double plateau = width_ns / 4.0;
            const double edge = width_ns / 2.0;
            if (dt <= plateau) return eta_max;
            if (dt >= edge) return floor;
            return eta_max + (floor - eta_max) * (dt - plateau) / (edge - plateau);
        }
        case CurveShape::GaussianWindow: {
            const double u = 2.0 * dt / width_ns;
            return floor + (eta_max - floor) * std::exp2(-u * u);
        }
        }
        return eta_max;
    }
};

inline void validate_curve(const EfficiencyCurve& c) {
    if (!(c.eta_max >= 0.0 && c.eta_max <= 1.0))
        throw ParameterError("efficiency curve: eta_max must lie in [0, 1]");
    if (!(c.floor >= 0.0 && c.floor <= c.eta_max))
        throw ParameterError("efficiency curve: floor must lie in [0, eta_max]");
    if (c.shape != CurveShape::Flat && !(c.width_ns > 0.0))
        throw ParameterError("efficiency curve: width_ns must be positive");
    if (!std::isfinite(c.center_ns))
        throw ParameterError("efficiency curve: center_ns must be finite");
}

/// A gated detector: efficiency curve plus dark-count probability per gate.
struct DetectorModel {
    EfficiencyCurve eta_curve;
    double dark_count = 0.0;
};

inline void validate_detector_model(const DetectorModel& d) {
    validate_curve(d.eta_curve);
    if (!(d.dark_count >= 0.0 && d.dark_count < 1.0))
        throw ParameterError("detector model: dark count must lie in [0, 1)");
}

/// A detector whose gate is sampled off-center by shift_ns, as when an
/// adversary delays the pulses to exploit the efficiency tails.
struct TimeShiftScenario {
    DetectorModel detector;
    double shift_ns = 0.0;
};

inline double effective_efficiency(const TimeShiftScenario& sc) {
    validate_detector_model(sc.detector);
    const EfficiencyCurve& c = sc.detector.eta_curve;
    return c.value_at(c.center_ns + sc.shift_ns);
}

/// Rescale the blocked-path statistics by the detector efficiency. The
/// analytic pipeline attenuates D3 only; the simulator applies the detector
/// model to all three detectors, and any resulting gap is reported, not
/// hidden.
inline Observables with_d3_efficiency(Observables o, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw ParameterError("with_d3_efficiency: eta must lie in [0, 1]");
    o.p_d3 *= eta;
    o.p_e3 *= eta;
    return o;
}

/// Largest fraction of the sifted key an adversary can corrupt unnoticed by
/// hiding behind dark counts. With dark rate p_d, a (T+1) p_d slice of the
/// key events is noise Bob cannot attribute, and the remainder must still
/// reproduce the observed error count.
inline double corrupted_rate_max(double p_d, const Observables& o,
                                 const BeamSplitter& bs) {
    if (!(p_d >= 0.0 && p_d < 1.0))
        throw ParameterError("corrupted_rate_max: p_d must lie in [0, 1)");
    validate_observables(o);
    const double dark = (bs.transmittance() + 1.0) * p_d;
    const double reduced = o.p_d1 - dark;
    if (!(o.p_d1 > 0.0) || !(reduced > o.p_e1))
        throw DarkCountRegimeError(
            "corrupted_rate_max: dark counts dominate the key events "
            "(requires p_D1 - (T+1) p_d > p_e1)");
    return dark + reduced * binary_entropy(o.p_e1 / reduced) -
           o.p_d1 * binary_entropy(o.p_e1 / o.p_d1);
}

/// Extra information the eavesdropper gains because an inefficient D3 hides
/// blocked photons she absorbed: of the missing (1 - eta)/eta fraction of the
/// measured D3 rate, a share R reaches the key.
inline double delta_info_eta(double eta, const Observables& o,
                             const BeamSplitter& bs) {
    if (eta == 0.0)
        throw SingularityError("delta_info_eta: eta = 0 suppresses D3 entirely");
    if (!(eta > 0.0 && eta <= 1.0))
        throw ParameterError("delta_info_eta: eta must lie in (0, 1]");
    validate_observables(o);
    return ((1.0 - eta) / eta) * (o.p_d3 - o.p_e3) * bs.reflectance();
}

struct AttackedKeyRateReport {
    KeyRateReport rate;   // on the measured statistics
    double gamma_cmax;    // maximal unnoticed corruption from dark counts
    double delta_i_ae;    // information increment from D3 inefficiency
    double delta_m_k;
    double m_k_prime;
};

/// Key rate after charging both device penalties. The result is reported
/// as-is; a negative m_k_prime flags a vulnerable operating point.
inline AttackedKeyRateReport attacked_key_rate(const Observables& o,
                                               const BeamSplitter& bs,
                                               double eta, double p_d) {
    AttackedKeyRateReport rep;
    rep.rate = key_rate(o, bs);
    rep.gamma_cmax = corrupted_rate_max(p_d, o, bs);
    rep.delta_i_ae = delta_info_eta(eta, o, bs);
    rep.delta_m_k = rep.gamma_cmax + rep.delta_i_ae;
    rep.m_k_prime = rep.rate.m_k - rep.delta_m_k;
    return rep;
}

struct E4BoundResult {
    bool pass;
    double p_e4;   // multi-click probability of the strategy
    double bound;  // 2 * p_d
    double excess; // how far the bound is exceeded, 0 when passing
};

/// Whether a strategy's multi-click rate stays below what dark counts
/// explain. Two simultaneous dark-induced clicks occur with probability
/// about 2 p_d per pulse, so any p_E4 above that is detectable.
inline E4BoundResult e4_bound_check(const AttackStrategy& s, const BeamSplitter& bs,
                                    double p_d) {
    if (!(p_d >= 0.0 && p_d < 1.0))
        throw ParameterError("e4_bound_check: p_d must lie in [0, 1)");
    const Observables o = observables_from_strategy(s, bs);
    E4BoundResult res;
    res.p_e4 = o.p_e4;
    res.bound = 2.0 * p_d;
    res.pass = o.p_e4 <= res.bound + kIdentityTol;
    res.excess = res.pass ? 0.0 : o.p_e4 - res.bound;
    return res;
}

} // namespace cqc
