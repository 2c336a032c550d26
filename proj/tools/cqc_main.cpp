// cqc: security-analysis workbench for counterfactual QKD.
//
// Subcommands: ideal, analyze, sweep, simulate, solve. All output is a pure
// function of the inputs, so runs are byte-reproducible.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cqc/cqc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitVulnerable = 3;
constexpr int kExitInvalidStrategy = 4;
constexpr int kExitIo = 5;
constexpr int kExitStatMismatch = 6;
constexpr int kExitInfeasible = 7;

std::string fmt(double v) {
    char buf[64];
    const auto res =
        std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

std::string fmt_u64(std::uint64_t v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void print_observables(const cqc::Observables& o) {
    std::cout << "observables:\n"
              << "  p_D1 = " << fmt(o.p_d1) << "\n"
              << "  p_D2 = " << fmt(o.p_d2) << "\n"
              << "  p_D3 = " << fmt(o.p_d3) << "\n"
              << "  p_e1 = " << fmt(o.p_e1) << "\n"
              << "  p_e2 = " << fmt(o.p_e2) << "\n"
              << "  p_e3 = " << fmt(o.p_e3) << "\n"
              << "  p_E4 = " << fmt(o.p_e4) << "\n";
}

// Key events may be absent entirely (p_D1 = 0, e.g. R = 0): no key is
// distilled and nothing of it can leak, so every rate in the report is zero.
cqc::KeyRateReport rate_or_zero(const cqc::Observables& o, const cqc::BeamSplitter& bs) {
    if (o.p_d1 == 0.0) return {0.0, 0.0, 0.0, 0.0};
    return cqc::key_rate(o, bs);
}

void print_rate(const cqc::KeyRateReport& rep) {
    std::cout << "key rate:\n"
              << "  qber = " << fmt(rep.qber) << "\n"
              << "  i_ab = " << fmt(rep.i_ab) << "\n"
              << "  i_ae = " << fmt(rep.i_ae) << "\n"
              << "  m_k  = " << fmt(rep.m_k) << "\n";
}

nlohmann::json rate_to_json(const cqc::KeyRateReport& rep) {
    return {{"qber", rep.qber}, {"i_ab", rep.i_ab}, {"i_ae", rep.i_ae}, {"m_k", rep.m_k}};
}

void emit_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_ideal(double R, bool as_json) {
    const auto bs = cqc::BeamSplitter::from_reflectance(R);
    const cqc::Observables obs = cqc::ideal_observables(bs);
    const cqc::KeyRateReport rep = rate_or_zero(obs, bs);
    if (as_json) {
        emit_json({{"R", bs.reflectance()},
                   {"T", bs.transmittance()},
                   {"observables", cqc::observables_to_json(obs)},
                   {"key_rate", rate_to_json(rep)}});
    } else {
        std::cout << "beam splitter: R = " << fmt(bs.reflectance())
                  << ", T = " << fmt(bs.transmittance()) << "\n";
        print_observables(obs);
        print_rate(rep);
    }
    return kExitOk;
}

struct DeviceStage {
    double eta = 1.0;
    double p_d = 0.0;
};

DeviceStage device_stage(const cqc::Scenario& sc) {
    DeviceStage st;
    if (sc.detector) {
        st.eta = cqc::effective_efficiency({*sc.detector, sc.shift_ns});
        st.p_d = sc.detector->dark_count;
    }
    return st;
}

int cmd_analyze(const std::string& scenario_file, bool as_json) {
    const cqc::Scenario sc = cqc::load_scenario(scenario_file);
    const cqc::AttackStrategy strategy =
        sc.strategy ? *sc.strategy : cqc::identity_strategy();
    const cqc::Observables base = cqc::observables_from_strategy(strategy, sc.bs);
    const DeviceStage st = device_stage(sc);
    const cqc::Observables measured = cqc::with_d3_efficiency(base, st.eta);

    const cqc::KeyRateReport rate = rate_or_zero(measured, sc.bs);
    const double gamma = st.p_d == 0.0
        ? 0.0
        : cqc::corrupted_rate_max(st.p_d, measured, sc.bs);
    const double delta = st.eta == 1.0
        ? 0.0
        : cqc::delta_info_eta(st.eta, measured, sc.bs);
    const double delta_m_k = gamma + delta;
    const double m_k_prime = rate.m_k - delta_m_k;

    if (as_json) {
        nlohmann::json j = {{"R", sc.bs.reflectance()},
                            {"T", sc.bs.transmittance()},
                            {"observables", cqc::observables_to_json(measured)},
                            {"key_rate", rate_to_json(rate)},
                            {"m_k_prime", m_k_prime},
                            {"vulnerable", m_k_prime < 0.0}};
        if (sc.detector)
            j["imperfections"] = {{"eta", st.eta},         {"p_d", st.p_d},
                                  {"gamma_cmax", gamma},   {"delta_i_eta", delta},
                                  {"delta_m_k", delta_m_k}, {"m_k_prime", m_k_prime}};
        emit_json(j);
    } else {
        std::cout << "beam splitter: R = " << fmt(sc.bs.reflectance())
                  << ", T = " << fmt(sc.bs.transmittance()) << "\n";
        print_observables(measured);
        print_rate(rate);
        if (sc.detector) {
            std::cout << "imperfections:\n"
                      << "  eta         = " << fmt(st.eta) << "\n"
                      << "  p_d         = " << fmt(st.p_d) << "\n"
                      << "  gamma_cmax  = " << fmt(gamma) << "\n"
                      << "  delta_i_eta = " << fmt(delta) << "\n"
                      << "  delta_m_k   = " << fmt(delta_m_k) << "\n"
                      << "  m_k_prime   = " << fmt(m_k_prime) << "\n";
        }
        std::cout << (m_k_prime < 0.0 ? "VULNERABLE: m_k_prime < 0\n"
                                      : "secure margin: m_k_prime >= 0\n");
    }
    return m_k_prime < 0.0 ? kExitVulnerable : kExitOk;
}

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct SweepRow {
    std::vector<double> vars;
    cqc::Observables measured;
    double qber = kNan, i_ab = kNan, i_ae = kNan, m_k = kNan;
    double gamma_cmax = kNan, delta_i_eta = kNan, m_k_prime = kNan;
};

// One grid point: apply the assignments on top of the scenario, then run the
// measurement stage and both key-rate pipelines. Points where a quantity is
// undefined (dark counts dominating, inconsistent overrides) yield nan cells
// rather than aborting the sweep.
SweepRow eval_sweep_point(const cqc::Scenario& sc, const cqc::AttackStrategy& strategy,
                          const std::vector<std::pair<std::string, double>>& assign) {
    auto bs = sc.bs;
    for (const auto& [var, val] : assign)
        if (var == "R") bs = cqc::BeamSplitter::from_reflectance(val);

    cqc::Observables obs = cqc::observables_from_strategy(strategy, bs);

    bool direct_rate_override = false;
    for (const auto& [var, val] : assign) {
        if (var == "p_D1") { obs.p_d1 = val; direct_rate_override = true; }
        else if (var == "p_D3") { obs.p_d3 = val; direct_rate_override = true; }
        else if (var == "p_e1") obs.p_e1 = val;
        else if (var == "p_e3") obs.p_e3 = val;
    }
    // Overriding a click rate reshapes the outcome distribution; D2 absorbs
    // the remainder so the event probabilities stay a distribution.
    if (direct_rate_override)
        obs.p_d2 = std::clamp(1.0 - obs.p_d1 - obs.p_d3 - obs.p_e4, 0.0, 1.0);

    DeviceStage st = device_stage(sc);
    for (const auto& [var, val] : assign) {
        if (var == "eta") st.eta = val;
        else if (var == "p_d") st.p_d = val;
        else if (var == "shift" && sc.detector)
            st.eta = cqc::effective_efficiency({*sc.detector, val});
    }

    SweepRow row;
    try {
        const cqc::Observables measured = cqc::with_d3_efficiency(obs, st.eta);
        row.measured = measured;
        const cqc::KeyRateReport rate = rate_or_zero(measured, bs);
        row.qber = rate.qber;
        row.i_ab = rate.i_ab;
        row.i_ae = rate.i_ae;
        row.m_k = rate.m_k;
        try {
            row.gamma_cmax = st.p_d == 0.0
                ? 0.0
                : cqc::corrupted_rate_max(st.p_d, measured, bs);
        } catch (const cqc::Error&) {
        }
        try {
            row.delta_i_eta = st.eta == 1.0
                ? 0.0
                : cqc::delta_info_eta(st.eta, measured, bs);
        } catch (const cqc::Error&) {
        }
        row.m_k_prime = row.m_k - (row.gamma_cmax + row.delta_i_eta);
    } catch (const cqc::Error&) {
        row.measured = obs;
    }
    return row;
}

int cmd_sweep(const std::string& scenario_file, const std::string& out_path,
              bool as_json) {
    const cqc::Scenario sc = cqc::load_scenario(scenario_file);
    if (sc.sweeps.empty())
        throw cqc::ParameterError("sweep: scenario declares no sweep");
    for (const auto& sp : sc.sweeps)
        if (sp.variable == "shift" && !sc.detector)
            throw cqc::ParameterError("sweep: 'shift' requires a detector model");

    const cqc::AttackStrategy strategy =
        sc.strategy ? *sc.strategy : cqc::identity_strategy();

    std::vector<SweepRow> rows;
    if (sc.sweeps.size() == 1) {
        const auto& sp = sc.sweeps[0];
        for (long i = 0; i < sp.steps; ++i) {
            const double v = sp.at(i);
            auto row = eval_sweep_point(sc, strategy, {{sp.variable, v}});
            row.vars = {v};
            rows.push_back(std::move(row));
        }
    } else {
        const auto& outer = sc.sweeps[0];
        const auto& inner = sc.sweeps[1];
        for (long i = 0; i < outer.steps; ++i) {
            for (long k = 0; k < inner.steps; ++k) {
                const double vo = outer.at(i);
                const double vi = inner.at(k);
                auto row = eval_sweep_point(sc, strategy,
                                            {{outer.variable, vo}, {inner.variable, vi}});
                row.vars = {vo, vi};
                rows.push_back(std::move(row));
            }
        }
    }

    std::vector<std::string> var_cols;
    for (const auto& sp : sc.sweeps) var_cols.push_back(sp.variable);

    auto row_values = [](const SweepRow& r) {
        std::vector<double> v = r.vars;
        v.insert(v.end(), {r.measured.p_d1, r.measured.p_d2, r.measured.p_d3,
                           r.measured.p_e1, r.measured.p_e3, r.qber, r.i_ab, r.i_ae,
                           r.m_k, r.gamma_cmax, r.delta_i_eta, r.m_k_prime});
        return v;
    };

    static const char* kValueCols[] = {"p_D1", "p_D2",       "p_D3",        "p_e1",
                                       "p_e3", "qber",       "i_ab",        "i_ae",
                                       "m_k",  "gamma_cmax", "delta_i_eta", "m_k_prime"};

    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out)
            throw cqc::IoError("cannot open " + out_path + " for writing");
        std::string header = "var";
        if (var_cols.size() == 2) header = var_cols[0] + "," + var_cols[1];
        for (const char* c : kValueCols) header += std::string(",") + c;
        out << header << "\n";
        for (const auto& r : rows) {
            const auto vals = row_values(r);
            for (std::size_t i = 0; i < vals.size(); ++i)
                out << (i ? "," : "") << fmt(vals[i]);
            out << "\n";
        }
        if (!out)
            throw cqc::IoError("write failed: " + out_path);
    }

    if (as_json) {
        nlohmann::json jrows = nlohmann::json::array();
        for (const auto& r : rows) {
            nlohmann::json jr = nlohmann::json::array();
            for (double v : row_values(r)) {
                if (std::isnan(v)) jr.push_back(nullptr);
                else jr.push_back(v);
            }
            jrows.push_back(std::move(jr));
        }
        nlohmann::json cols = nlohmann::json::array();
        for (const auto& v : var_cols) cols.push_back(v);
        for (const char* c : kValueCols) cols.push_back(c);
        emit_json({{"columns", cols}, {"rows", jrows}});
    } else if (out_path.empty()) {
        throw cqc::ParameterError("sweep: pass --out or --json");
    } else {
        std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
    }
    return kExitOk;
}

std::uint64_t default_seed() {
    const char* env = std::getenv("CQC_DEFAULT_SEED");
    if (env == nullptr || *env == '\0') return 0;
    std::uint64_t value = 0;
    const char* end = env + std::string_view(env).size();
    const auto res = std::from_chars(env, end, value, 10);
    if (res.ec != std::errc() || res.ptr != end)
        throw cqc::ParameterError(
            "CQC_DEFAULT_SEED must be a decimal unsigned 64-bit integer");
    return value;
}

int cmd_simulate(const std::string& scenario_file, std::uint64_t trials,
                 std::optional<std::uint64_t> seed_opt, unsigned shards, double z,
                 bool as_json) {
    const cqc::Scenario sc = cqc::load_scenario(scenario_file);

    // A shifted gate is equivalent to a flat detector at the shifted
    // efficiency, since every signal arrives at the same point of the curve.
    std::optional<cqc::DetectorModel> detector = sc.detector;
    if (detector && sc.shift_ns != 0.0) {
        const double eta = cqc::effective_efficiency({*detector, sc.shift_ns});
        detector->eta_curve = {cqc::CurveShape::Flat, eta, 0.0, 0.0, 0.0};
    }

    cqc::SimConfig cfg;
    cfg.n_trials = trials;
    cfg.seed = seed_opt ? *seed_opt : default_seed();
    cfg.shards = shards;

    const cqc::EmpiricalObservables emp =
        cqc::simulate(sc.bs, sc.strategy, detector, cfg);
    const cqc::Observables expected =
        cqc::expected_observables(sc.bs, sc.strategy, detector);
    const cqc::ComparisonReport cmp = cqc::compare(emp, expected, z);

    if (as_json) {
        nlohmann::json jf = nlohmann::json::array();
        for (const auto& f : cmp.fields)
            jf.push_back({{"field", f.field},
                          {"estimate", f.estimate},
                          {"analytic", f.analytic},
                          {"std_error", f.std_error},
                          {"z", f.z},
                          {"exact", f.exact},
                          {"pass", f.pass}});
        emit_json({{"config",
                    {{"R", sc.bs.reflectance()},
                     {"trials", cfg.n_trials},
                     {"seed", cfg.seed},
                     {"shards", cfg.shards},
                     {"z_threshold", z}}},
                   {"counts",
                    {{"e1", emp.counts.e1},
                     {"e2", emp.counts.e2},
                     {"e3", emp.counts.e3},
                     {"e4", emp.counts.e4},
                     {"no_click", emp.counts.no_click},
                     {"e1_errors", emp.counts.e1_errors},
                     {"e3_errors", emp.counts.e3_errors}}},
                   {"estimates", cqc::observables_to_json(emp.estimates)},
                   {"std_errors", cqc::observables_to_json(emp.std_errors)},
                   {"comparison", jf},
                   {"pass", cmp.pass}});
    } else {
        std::cout << "trials = " << fmt_u64(cfg.n_trials)
                  << ", seed = " << fmt_u64(cfg.seed) << ", shards = " << shards
                  << "\n";
        std::cout << "counts: e1 = " << fmt_u64(emp.counts.e1)
                  << ", e2 = " << fmt_u64(emp.counts.e2)
                  << ", e3 = " << fmt_u64(emp.counts.e3)
                  << ", e4 = " << fmt_u64(emp.counts.e4)
                  << ", none = " << fmt_u64(emp.counts.no_click)
                  << ", err1 = " << fmt_u64(emp.counts.e1_errors)
                  << ", err3 = " << fmt_u64(emp.counts.e3_errors) << "\n";
        for (const auto& f : cmp.fields) {
            std::cout << "  " << f.field << ": est = " << fmt(f.estimate)
                      << ", analytic = " << fmt(f.analytic)
                      << ", se = " << fmt(f.std_error);
            if (f.exact)
                std::cout << ", exact";
            else
                std::cout << ", z = " << fmt(f.z);
            std::cout << (f.pass ? " [ok]" : " [MISMATCH]") << "\n";
        }
        std::cout << (cmp.pass ? "agreement within " : "MISMATCH beyond ")
                  << fmt(cmp.z_threshold) << " standard errors\n";
    }
    return cmp.pass ? kExitOk : kExitStatMismatch;
}

int cmd_solve(const std::string& target_file, double R, double tolerance,
              const std::string& out_path, bool as_json) {
    const cqc::Observables target =
        cqc::observables_from_json(cqc::load_json_file(target_file));
    const auto bs = cqc::BeamSplitter::from_reflectance(R);
    const cqc::SolveResult res = cqc::solve_strategy(target, bs, tolerance);

    if (res.feasible && !out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out)
            throw cqc::IoError("cannot open " + out_path + " for writing");
        out << cqc::strategy_to_json(res.strategy).dump(2) << "\n";
        if (!out)
            throw cqc::IoError("write failed: " + out_path);
    }

    if (as_json) {
        emit_json({{"feasible", res.feasible},
                   {"residual_max", res.residual_max},
                   {"residual_e4", res.residual_e4},
                   {"achieved", cqc::observables_to_json(res.achieved)},
                   {"strategy", cqc::strategy_to_json(res.strategy)}});
    } else {
        std::cout << (res.feasible ? "feasible" : "infeasible")
                  << ": residual_max = " << fmt(res.residual_max)
                  << ", residual_e4 = " << fmt(res.residual_e4) << "\n";
        if (res.feasible) {
            if (out_path.empty())
                std::cout << cqc::strategy_to_json(res.strategy).dump(2) << "\n";
            else
                std::cout << "strategy written to " << out_path << "\n";
        } else {
            std::cout << "closest reachable statistics:\n";
            print_observables(res.achieved);
        }
    }
    return res.feasible ? kExitOk : kExitInfeasible;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual-QKD security workbench"};
    app.require_subcommand(1);

    double ideal_R = 0.5;
    bool ideal_json = false;
    auto* ideal = app.add_subcommand("ideal", "honest-protocol statistics and key rate");
    ideal->add_option("--R", ideal_R, "beam splitter reflectance")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    ideal->add_flag("--json", ideal_json, "emit JSON");

    std::string analyze_file;
    bool analyze_json = false;
    auto* analyze = app.add_subcommand("analyze", "evaluate a scenario end to end");
    analyze->add_option("scenario", analyze_file, "scenario JSON file")->required();
    analyze->add_flag("--json", analyze_json, "emit JSON");

    std::string sweep_file, sweep_out;
    bool sweep_json = false;
    auto* sweep = app.add_subcommand("sweep", "tabulate rates along declared sweeps");
    sweep->add_option("scenario", sweep_file, "scenario JSON file")->required();
    sweep->add_option("--out", sweep_out, "CSV output path");
    sweep->add_flag("--json", sweep_json, "emit JSON to stdout");

    std::string sim_file;
    std::uint64_t sim_trials = 1000000;
    std::optional<std::uint64_t> sim_seed;
    unsigned sim_shards = 1;
    double sim_z = 4.0;
    bool sim_json = false;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo cross-check");
    simulate->add_option("scenario", sim_file, "scenario JSON file")->required();
    simulate->add_option("--trials", sim_trials, "number of pulses")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim_seed,
                         "RNG seed (default: CQC_DEFAULT_SEED or 0)");
    simulate->add_option("--shards", sim_shards, "parallel shards")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--z", sim_z, "agreement threshold in standard errors")
        ->check(CLI::PositiveNumber);
    simulate->add_flag("--json", sim_json, "emit JSON");

    std::string solve_file, solve_out;
    double solve_R = 0.5;
    double solve_tol = 1e-9;
    bool solve_json = false;
    auto* solve = app.add_subcommand("solve", "invert target statistics to a strategy");
    solve->add_option("target", solve_file, "target observables JSON file")->required();
    solve->add_option("--R", solve_R, "beam splitter reflectance")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    solve->add_option("--tolerance", solve_tol, "feasibility tolerance (max norm)")
        ->check(CLI::PositiveNumber);
    solve->add_option("--out", solve_out, "write the strategy JSON here");
    solve->add_flag("--json", solve_json, "emit JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (ideal->parsed()) return cmd_ideal(ideal_R, ideal_json);
        if (analyze->parsed()) return cmd_analyze(analyze_file, analyze_json);
        if (sweep->parsed()) return cmd_sweep(sweep_file, sweep_out, sweep_json);
        if (simulate->parsed())
            return cmd_simulate(sim_file, sim_trials, sim_seed, sim_shards, sim_z,
                                sim_json);
        if (solve->parsed())
            return cmd_solve(solve_file, solve_R, solve_tol, solve_out, solve_json);
    } catch (const cqc::StrategyError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitInvalidStrategy;
    } catch (const cqc::IoError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitIo;
    } catch (const cqc::Error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
