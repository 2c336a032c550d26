#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cqc/attack.hpp"
#include "cqc/imperfections.hpp"
#include "cqc/types.hpp"

namespace cqc {

inline nlohmann::json load_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw IoError("cannot open " + file.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(file.string() + ": " + ex.what());
    }
}

namespace detail {

inline double require_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw ParameterError(std::string("missing or non-numeric field '") + key + "'");
    return j.at(key).get<double>();
}

inline double number_or(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number())
        throw ParameterError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

} // namespace detail

inline nlohmann::json observables_to_json(const Observables& o) {
    return {{"p_D1", o.p_d1}, {"p_D2", o.p_d2}, {"p_D3", o.p_d3},
            {"p_e1", o.p_e1}, {"p_e2", o.p_e2}, {"p_e3", o.p_e3},
            {"p_E4", o.p_e4}};
}

inline Observables observables_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ParameterError("observables: expected a JSON object");
    Observables o;
    o.p_d1 = detail::require_number(j, "p_D1");
    o.p_d2 = detail::require_number(j, "p_D2");
    o.p_d3 = detail::require_number(j, "p_D3");
    o.p_e1 = detail::require_number(j, "p_e1");
    o.p_e2 = detail::number_or(j, "p_e2", 0.0);
    o.p_e3 = detail::require_number(j, "p_e3");
    o.p_e4 = detail::number_or(j, "p_E4", 0.0);
    return o;
}

inline nlohmann::json strategy_to_json(const AttackStrategy& s) {
    nlohmann::json j = nlohmann::json::object();
    const std::pair<const char*, const CaseWeights*> cases[] = {
        {"c1", &s.c1}, {"c2", &s.c2}, {"c3", &s.c3}, {"c4", &s.c4}, {"c5", &s.c5}};
    for (const auto& [name, cw] : cases) {
        nlohmann::json table = nlohmann::json::object();
        for (const auto& [label, w] : cw->entries()) table[label] = w;
        j[name] = std::move(table);
    }
    return j;
}

inline AttackStrategy strategy_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ParameterError("strategy: expected a JSON object");
    AttackStrategy s;
    for (const auto& [key, table] : j.items()) {
        CaseWeights* cw = nullptr;
        if (key == "c1") cw = &s.c1;
        else if (key == "c2") cw = &s.c2;
        else if (key == "c3") cw = &s.c3;
        else if (key == "c4") cw = &s.c4;
        else if (key == "c5") cw = &s.c5;
        else
            throw ParameterError("strategy: unknown case '" + key + "'");
        if (!table.is_object())
            throw ParameterError("strategy: case '" + key + "' must map labels to weights");
        for (const auto& [label, w] : table.items()) {
            if (!w.is_number())
                throw ParameterError("strategy: weight of '" + label + "' must be a number");
            cw->set(label, w.get<double>());
        }
    }
    return s;
}

inline const char* to_string(CurveShape s) {
    switch (s) {
    case CurveShape::Flat: return "flat";
    case CurveShape::Trapezoid: return "trapezoid";
    default: return "gaussian-window";
    }
}

inline CurveShape curve_shape_from_string(const std::string& s) {
    if (s == "flat") return CurveShape::Flat;
    if (s == "trapezoid") return CurveShape::Trapezoid;
    if (s == "gaussian-window") return CurveShape::GaussianWindow;
    throw ParameterError("detector: unknown shape '" + s +
                         "' (expected flat, trapezoid, or gaussian-window)");
}

inline nlohmann::json detector_to_json(const DetectorModel& d) {
    return {{"shape", to_string(d.eta_curve.shape)},
            {"eta_max", d.eta_curve.eta_max},
            {"center_ns", d.eta_curve.center_ns},
            {"width_ns", d.eta_curve.width_ns},
            {"floor", d.eta_curve.floor},
            {"p_d", d.dark_count}};
}

inline DetectorModel detector_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ParameterError("detector: expected a JSON object");
    if (!j.contains("shape") || !j.at("shape").is_string())
        throw ParameterError("detector: missing 'shape'");
    DetectorModel d;
    d.eta_curve.shape = curve_shape_from_string(j.at("shape").get<std::string>());
    d.eta_curve.eta_max = detail::require_number(j, "eta_max");
    d.eta_curve.center_ns = detail::number_or(j, "center_ns", 0.0);
    d.eta_curve.width_ns = detail::number_or(j, "width_ns", 0.0);
    d.eta_curve.floor = detail::number_or(j, "floor", 0.0);
    d.dark_count = detail::number_or(j, "p_d", 0.0);
    validate_detector_model(d);
    return d;
}

/// One swept variable: an inclusive linear grid.
struct SweepSpec {
    std::string variable;
    double from = 0.0;
    double to = 0.0;
    long steps = 0;

    double at(long i) const {
        if (steps == 1) return from;
        return from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1);
    }
};

inline const std::vector<std::string>& sweep_variables() {
    static const std::vector<std::string> vars = {"R",    "p_D1", "p_D3", "p_e1",
                                                  "p_e3", "eta",  "p_d",  "shift"};
    return vars;
}

inline SweepSpec sweep_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ParameterError("sweep: expected a JSON object");
    SweepSpec sp;
    if (!j.contains("variable") || !j.at("variable").is_string())
        throw ParameterError("sweep: missing 'variable'");
    sp.variable = j.at("variable").get<std::string>();
    const auto& vars = sweep_variables();
    if (std::find(vars.begin(), vars.end(), sp.variable) == vars.end())
        throw ParameterError("sweep: unknown variable '" + sp.variable + "'");
    sp.from = detail::require_number(j, "from");
    sp.to = detail::require_number(j, "to");
    if (!j.contains("steps") || !j.at("steps").is_number_integer())
        throw ParameterError("sweep: 'steps' must be an integer");
    sp.steps = j.at("steps").get<long>();
    if (sp.steps < 2)
        throw ParameterError("sweep: 'steps' must be at least 2");
    if (!(sp.from <= sp.to))
        throw ParameterError("sweep: 'from' must not exceed 'to'");
    return sp;
}

/// A full analysis input: splitter, optional strategy and detector (absent
/// means honest and ideal), an optional gate shift, and up to two sweeps.
struct Scenario {
    BeamSplitter bs = BeamSplitter::from_reflectance(0.5);
    std::optional<AttackStrategy> strategy;
    std::optional<DetectorModel> detector;
    double shift_ns = 0.0;
    std::vector<SweepSpec> sweeps;
};

inline Scenario scenario_from_json(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir) {
    if (!j.is_object())
        throw ParameterError("scenario: expected a JSON object");
    Scenario sc;

    if (j.contains("bs")) {
        const auto& b = j.at("bs");
        sc.bs = BeamSplitter(detail::require_number(b, "R"),
                             detail::require_number(b, "T"));
    } else if (j.contains("R")) {
        sc.bs = BeamSplitter::from_reflectance(detail::require_number(j, "R"));
    } else {
        throw ParameterError("scenario: missing 'R' (or 'bs')");
    }

    auto resolve = [&base_dir](const std::string& ref) {
        std::filesystem::path p(ref);
        return p.is_absolute() ? p : base_dir / p;
    };

    if (j.contains("strategy")) {
        const auto& s = j.at("strategy");
        if (s.is_string()) {
            if (s.get<std::string>() != "identity")
                sc.strategy = strategy_from_json(load_json_file(resolve(s.get<std::string>())));
        } else {
            sc.strategy = strategy_from_json(s);
        }
    }

    if (j.contains("detector")) {
        const auto& d = j.at("detector");
        if (d.is_string()) {
            if (d.get<std::string>() != "ideal")
                sc.detector = detector_from_json(load_json_file(resolve(d.get<std::string>())));
        } else {
            sc.detector = detector_from_json(d);
        }
    }

    sc.shift_ns = detail::number_or(j, "shift_ns", 0.0);

    if (j.contains("sweep")) {
        const auto& sw = j.at("sweep");
        if (sw.is_array()) {
            if (sw.empty() || sw.size() > 2)
                throw ParameterError("scenario: 'sweep' takes one or two entries");
            for (const auto& entry : sw) sc.sweeps.push_back(sweep_from_json(entry));
        } else {
            sc.sweeps.push_back(sweep_from_json(sw));
        }
    }
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& file) {
    return scenario_from_json(load_json_file(file), file.parent_path());
}

} // namespace cqc
