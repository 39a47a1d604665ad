#pragma once

#include <string>

#include "risres/config.hpp"
#include "risres/conic.hpp"

namespace risres::conic {

enum class SolveStatus { Optimal, NearOptimal, Infeasible, Unbounded, IterationLimit };

const char* status_name(SolveStatus s);

struct Solution {
    SolveStatus status = SolveStatus::IterationLimit;
    RVec x;
    double objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    int newton_steps = 0;
    bool feasible = false;  // x satisfies every constraint within feas_tol

    [[nodiscard]] bool usable() const {
        return status == SolveStatus::Optimal || status == SolveStatus::NearOptimal;
    }
};

/// Primal log-barrier path-following method for products of zero, nonnegative,
/// second-order and exponential cones.
///
/// A phase-I problem finds a strictly feasible point when the initial point is not
/// interior. Newton systems are solved as sparse quasi-definite KKT systems. The
/// dual point is recovered from the barrier gradient, so the reported gap is
/// certified. Numerical trouble never throws; it ends in IterationLimit.
Solution solve(const ConicProgram& program, const SolverSettings& settings = {});

}  // namespace risres::conic
