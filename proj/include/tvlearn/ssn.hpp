#pragma once

#include "tvlearn/system.hpp"

#include <iosfwd>
#include <vector>

namespace tvlearn {

struct SsnConfig {
    double tol = 1e-8;        // stop when ||F|| <= tol
    double step_tol = 1e-10;  // or when ||dy|| <= step_tol
    int max_iter = 50;
    JacobianMode mode = JacobianMode::Projected;
    double mu_shift = 1e-12;  // diagonal shift of the u/p blocks when mu == 0
    std::ostream* log = nullptr;

    void validate() const;
};

struct SsnReport {
    int iterations = 0;
    std::vector<double> residual_history;  // iterations + 1 entries
    std::vector<double> step_history;      // iterations entries
    std::vector<std::size_t> active_sizes; // iterations entries
    bool converged = false;
};

struct NewtonStep {
    OptState dy;
    double residual_norm = 0.0;
};

/// One generalized Newton step: q and z are eliminated, the reduced
/// (u, p, lambda) system is factorized directly, and dq, dz recovered so that
/// rows (2) and (4) of the linearization hold exactly.
NewtonStep newton_step(const OptState& y, const ProblemData& data, const ModelParams& params, const SsnConfig& config,
                       const Interfaces& ifaces = {});

/// Start consistent with a constant lambda_init: u_k solves the state
/// equation, p_k the adjoint equation, q_k = h(D u_k), z_k = h'(D u_k) D p_k.
OptState initial_state(const ProblemData& data, const ModelParams& params, double lambda_init = 1.0);

/// Unsolved start: u = f, q = h(D f), p = 0, z = 0, lambda = lambda_init.
OptState raw_initial_state(const ProblemData& data, const ModelParams& params, double lambda_init = 1.0);

struct SsnResult {
    OptState y;
    SsnReport report;
};

/// Runs Newton until ||F|| <= tol or ||dy|| <= step_tol. max_iter exhaustion
/// returns converged = false; linear-solve failures throw SolverError.
SsnResult ssn_solve(const OptState& y0, const ProblemData& data, const ModelParams& params, const SsnConfig& config,
                    const Interfaces& ifaces = {});

/// Successive residual ratios e_{k+1} / e_k.
std::vector<double> residual_ratios(const SsnReport& report);

/// Final residual ratio of a run; requires at least three ratios
/// (iterations >= 3), throws ConfigError otherwise.
double superlinearity_check(const SsnReport& report);

}  // namespace tvlearn
