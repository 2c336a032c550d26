#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cqc/attack.hpp"
#include "cqc/types.hpp"

namespace cqc {

struct SolveResult {
    bool feasible;
    AttackStrategy strategy;
    Observables achieved;
    double residual_max; // max |achieved - target| over the six click/error rates
    double residual_e4;  // |achieved.p_E4 - target.p_E4|, reported separately
};

namespace detail {

/// Minimize ||A x - b||^2 subject to E x = e and lo <= x <= hi.
///
/// Active-set iteration on the bound constraints: each step solves the
/// equality-constrained subproblem on the free variables through a nullspace
/// factorization (rank-revealing, so zero columns from degenerate splitter
/// settings are harmless), walks toward that minimizer until a bound blocks,
/// and releases bounds whose multipliers have the wrong sign. Terminates
/// exactly on these small dense problems.
class BoundedLsq {
public:
    BoundedLsq(Eigen::MatrixXd A, Eigen::VectorXd b, Eigen::MatrixXd E,
               Eigen::VectorXd e, Eigen::VectorXd lo, Eigen::VectorXd hi)
        : A_(std::move(A)), b_(std::move(b)), E_(std::move(E)), e_(std::move(e)),
          lo_(std::move(lo)), hi_(std::move(hi)) {}

    Eigen::VectorXd solve(Eigen::VectorXd x) const {
        const auto n = static_cast<int>(x.size());
        enum : std::uint8_t { kFree = 0, kAtLo = 1, kAtHi = 2 };
        std::vector<std::uint8_t> state(static_cast<std::size_t>(n), kFree);
        for (int i = 0; i < n; ++i) {
            if (x[i] <= lo_[i]) {
                x[i] = lo_[i];
                state[i] = kAtLo;
            } else if (x[i] >= hi_[i]) {
                x[i] = hi_[i];
                state[i] = kAtHi;
            }
        }

        constexpr int kMaxIter = 400;
        for (int iter = 0; iter < kMaxIter; ++iter) {
            std::vector<int> free;
            for (int i = 0; i < n; ++i)
                if (state[i] == kFree) free.push_back(i);
            const auto nf = static_cast<int>(free.size());

            // Subproblem on the free coordinates.
            Eigen::VectorXd y(nf);
            if (nf > 0) {
                Eigen::MatrixXd Af(A_.rows(), nf), Ef(E_.rows(), nf);
                for (int j = 0; j < nf; ++j) {
                    Af.col(j) = A_.col(free[j]);
                    Ef.col(j) = E_.col(free[j]);
                }
                Eigen::VectorXd bf = b_;
                Eigen::VectorXd ef = e_;
                for (int i = 0; i < n; ++i) {
                    if (state[i] == kFree) continue;
                    bf -= A_.col(i) * x[i];
                    ef -= E_.col(i) * x[i];
                }
                Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codE(Ef);
                const Eigen::VectorXd yp = codE.solve(ef);
                Eigen::FullPivLU<Eigen::MatrixXd> lu(Ef);
                const Eigen::MatrixXd Z = lu.kernel();
                if (Z.cols() > 0 && (Z.array() != 0.0).any()) {
                    const Eigen::MatrixXd AZ = Af * Z;
                    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codAZ(AZ);
                    const Eigen::VectorXd w = codAZ.solve(bf - Af * yp);
                    y = yp + Z * w;
                } else {
                    y = yp;
                }
            }

            // Step toward the subproblem minimizer, clipped at the bounds.
            Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
            for (int j = 0; j < nf; ++j) p[free[j]] = y[j] - x[free[j]];

            if (p.lpNorm<Eigen::Infinity>() > 1e-13) {
                double alpha = 1.0;
                int blocking = -1;
                std::uint8_t block_state = kAtLo;
                for (int j = 0; j < nf; ++j) {
                    const int i = free[j];
                    if (p[i] < 0.0 && x[i] + p[i] < lo_[i]) {
                        const double a = (lo_[i] - x[i]) / p[i];
                        if (a < alpha) {
                            alpha = a;
                            blocking = i;
                            block_state = kAtLo;
                        }
                    } else if (p[i] > 0.0 && x[i] + p[i] > hi_[i]) {
                        const double a = (hi_[i] - x[i]) / p[i];
                        if (a < alpha) {
                            alpha = a;
                            blocking = i;
                            block_state = kAtHi;
                        }
                    }
                }
                x += alpha * p;
                if (blocking >= 0) {
                    x[blocking] = block_state == kAtLo ? lo_[blocking] : hi_[blocking];
                    state[blocking] = block_state;
                    continue;
                }
                continue; // full step taken; re-check optimality next round
            }

            // Stationary on the current face: check the bound multipliers.
            const Eigen::VectorXd g = 2.0 * A_.transpose() * (A_ * x - b_);
            Eigen::VectorXd nu = Eigen::VectorXd::Zero(E_.rows());
            if (nf > 0) {
                Eigen::MatrixXd EfT(nf, E_.rows());
                Eigen::VectorXd gf(nf);
                for (int j = 0; j < nf; ++j) {
                    EfT.row(j) = E_.col(free[j]).transpose();
                    gf[j] = g[free[j]];
                }
                Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codT(EfT);
                nu = codT.solve(-gf);
            }
            const Eigen::VectorXd lag = g + E_.transpose() * nu;
            int release = -1;
            double most_negative = -1e-11;
            for (int i = 0; i < n; ++i) {
                double mult = 0.0;
                if (state[i] == kAtLo)
                    mult = lag[i];
                else if (state[i] == kAtHi)
                    mult = -lag[i];
                else
                    continue;
                if (mult < most_negative) {
                    most_negative = mult;
                    release = i;
                }
            }
            if (release < 0) return x;
            state[release] = kFree;
        }
        return x;
    }

private:
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    Eigen::MatrixXd E_;
    Eigen::VectorXd e_;
    Eigen::VectorXd lo_;
    Eigen::VectorXd hi_;
};

// Variable layout for the inversion:
//   0 c1.p00   1 c1.multi
//   2 c2.0p0   3 c2.multi
//   4 c3.p00   5 c3.0p0   6 c3.multi
//   7 c4 split parameter kappa, with c4 = (R kappa, T kappa, 1 - kappa)
//   8 c5.p00   9 c5.0p0  10 c5.00q
// The kappa parameterization bakes the splitter-ratio constraint into the
// search space instead of carrying it as an extra equality.
inline constexpr int kNumVars = 11;

inline AttackStrategy strategy_from_vars(const Eigen::VectorXd& x,
                                         const BeamSplitter& bs) {
    auto cl = [](double v) { return std::clamp(v, 0.0, 1.0); };
    const double kappa = cl(x[7]);
    AttackStrategy s;
    s.c1.set("p00", cl(x[0]));
    s.c1.set(kMultiLabel, cl(x[1]));
    s.c2.set("0p0", cl(x[2]));
    s.c2.set(kMultiLabel, cl(x[3]));
    s.c3.set("p00", cl(x[4]));
    s.c3.set("0p0", cl(x[5]));
    s.c3.set(kMultiLabel, cl(x[6]));
    s.c4.set("p00", bs.reflectance() * kappa);
    s.c4.set("0p0", bs.transmittance() * kappa);
    s.c4.set("00p", cl(1.0 - kappa));
    s.c5.set("p00", cl(x[8]));
    s.c5.set("0p0", cl(x[9]));
    s.c5.set("00q", cl(x[10]));
    return s;
}

} // namespace detail

/// Invert the forward map: find a valid strategy whose statistics match the
/// target within `tolerance` (max norm over the six click/error rates).
/// Infeasible targets return the closest reachable point with
/// feasible = false; p_E4 participates in the fit but not in the feasibility
/// test, since multi-click mass is a free knob the other rates do not fix.
inline SolveResult solve_strategy(const Observables& target, const BeamSplitter& bs,
                                  double tolerance = kStrategyTol) {
    if (!(tolerance > 0.0))
        throw ParameterError("solve_strategy: tolerance must be positive");
    for (double f : {target.p_d1, target.p_d2, target.p_d3, target.p_e1,
                     target.p_e2, target.p_e3, target.p_e4})
        if (!(f >= 0.0 && f <= 1.0))
            throw ParameterError("solve_strategy: target fields must lie in [0, 1]");

    const double r = bs.reflectance();
    const double t = bs.transmittance();
    constexpr int n = detail::kNumVars;

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(7, n);
    Eigen::VectorXd b(7);
    // p_D1
    A(0, 0) = r * t / 2.0;
    A(0, 4) = r / 2.0;
    A(0, 7) = (t / 2.0) * r;
    A(0, 8) = t / 2.0;
    b[0] = target.p_d1;
    // p_D2
    A(1, 2) = r * r / 2.0;
    A(1, 5) = r / 2.0;
    A(1, 7) = (t / 2.0) * t;
    A(1, 9) = t / 2.0;
    b[1] = target.p_d2;
    // p_D3 = (T/2)(1 - kappa) + (T/2) c5.00q
    A(2, 7) = -t / 2.0;
    A(2, 10) = t / 2.0;
    b[2] = target.p_d3 - t / 2.0;
    // p_e1
    A(3, 4) = r / 2.0;
    A(3, 8) = t / 2.0;
    b[3] = target.p_e1;
    // p_e2 is identically zero; the row keeps its residual in the objective
    b[4] = target.p_e2;
    // p_e3
    A(5, 10) = t / 2.0;
    b[5] = target.p_e3;
    // p_E4
    A(6, 1) = r * t / 2.0;
    A(6, 3) = r * r / 2.0;
    A(6, 6) = r / 2.0;
    b[6] = target.p_e4;

    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(4, n);
    Eigen::VectorXd e = Eigen::VectorXd::Ones(4);
    E(0, 0) = E(0, 1) = 1.0;
    E(1, 2) = E(1, 3) = 1.0;
    E(2, 4) = E(2, 5) = E(2, 6) = 1.0;
    E(3, 8) = E(3, 9) = E(3, 10) = 1.0;

    Eigen::VectorXd lo = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd hi =
        Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    hi[7] = 1.0; // kappa; the simplex equalities cap everything else

    const detail::BoundedLsq qp(A, b, E, e, lo, hi);

    // A target-informed start plus fixed corners; the subproblems are convex,
    // so multiple starts only guard the active-set path, and ties are broken
    // toward the lexicographically smallest weight vector.
    std::vector<Eigen::VectorXd> starts;
    {
        Eigen::VectorXd s(n);
        s << 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0;
        starts.push_back(s);
        s << 0.5, 0.5, 0.5, 0.5, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.5, 1.0 / 3, 1.0 / 3,
            1.0 / 3;
        starts.push_back(s);
        s << 0, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0;
        starts.push_back(s);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
        const double q10 = t > 0.0 ? std::clamp(2.0 * target.p_e3 / t, 0.0, 1.0) : 0.0;
        const double d3_total = t > 0.0 ? std::clamp(2.0 * target.p_d3 / t, 0.0, 2.0) : 0.0;
        const double kappa = std::clamp(1.0 - (d3_total - q10), 0.0, 1.0);
        const double q8 =
            t > 0.0 ? std::clamp(2.0 * target.p_e1 / t, 0.0, 1.0 - q10) : 0.0;
        g[0] = 1.0;
        g[2] = 1.0;
        g[5] = 1.0;
        g[7] = kappa;
        g[8] = q8;
        g[9] = 1.0 - q8 - q10;
        g[10] = q10;
        starts.push_back(g);
    }

    auto objective = [&](const Eigen::VectorXd& x) {
        return (A * x - b).squaredNorm();
    };

    Eigen::VectorXd best;
    double best_f = std::numeric_limits<double>::infinity();
    for (const auto& s0 : starts) {
        const Eigen::VectorXd x = qp.solve(s0);
        const double f = objective(x);
        if (f < best_f - 1e-14) {
            best_f = f;
            best = x;
        } else if (f <= best_f + 1e-14) {
            for (int i = 0; i < n; ++i) {
                if (std::abs(x[i] - best[i]) <= 1e-12) continue;
                if (x[i] < best[i]) best = x;
                break;
            }
        }
    }

    // Snap solver dust to the bounds before rebuilding the weight tables.
    for (int i = 0; i < n; ++i) {
        if (std::abs(best[i]) < 1e-12) best[i] = 0.0;
        if (std::abs(best[i] - 1.0) < 1e-12) best[i] = 1.0;
    }

    SolveResult res;
    res.strategy = detail::strategy_from_vars(best, bs);
    res.achieved = observables_from_strategy(res.strategy, bs);
    const double diffs[] = {
        std::abs(res.achieved.p_d1 - target.p_d1),
        std::abs(res.achieved.p_d2 - target.p_d2),
        std::abs(res.achieved.p_d3 - target.p_d3),
        std::abs(res.achieved.p_e1 - target.p_e1),
        std::abs(res.achieved.p_e2 - target.p_e2),
        std::abs(res.achieved.p_e3 - target.p_e3),
    };
    res.residual_max = *std::max_element(std::begin(diffs), std::end(diffs));
    res.residual_e4 = std::abs(res.achieved.p_e4 - target.p_e4);
    res.feasible = res.residual_max <= tolerance;
    return res;
}

} // namespace cqc
