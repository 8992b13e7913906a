#pragma once

// Discrete optimality system of the bilevel learning problem for N training
// pairs sharing one regularization field lambda. Per pair k the unknowns are
// (u_k, q_k, p_k, z_k); rows are
//   (1) -mu L u_k - Div q_k + 2 lambda (u_k - f_k)
//   (2) h(D u_k) - q_k
//   (3) -mu L p_k - Div z_k + 2 lambda p_k + 2 (u_k - u_k^dag)
//   (4) h'(D u_k) D p_k - z_k
// plus the shared complementarity row
//   (5) -beta L lambda + beta lambda + c - max(0, -beta L lambda + c),
// c = sum_k (u_k - f_k) p_k.

#include "tvlearn/grid.hpp"
#include "tvlearn/huber.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace tvlearn {

struct ModelParams {
    double mu = 1e-13;
    double beta = 1e-9;
    HuberParams huber = HuberParams::make(50.0);
    int n_train = 1;
    BoundaryKind bc = BoundaryKind::NeumannReflect;

    void validate() const;
};

struct OptState {
    std::vector<ScalarField> u;
    std::vector<VectorField> q;
    std::vector<ScalarField> p;
    std::vector<VectorField> z;
    ScalarField lambda;

    static OptState zeros(const GridSpec& grid, int n_train);

    const GridSpec& grid() const { return lambda.grid(); }
    int n_train() const { return int(u.size()); }

    /// Throws ShapeError unless every field lives on `grid` and lists have length n.
    void validate(const GridSpec& grid, int n) const;

    // Flat layout: for each pair [u, q.comp1, q.comp2, p, z.comp1, z.comp2], then lambda.
    std::size_t flat_size() const;
    Eigen::VectorXd flatten() const;
    static OptState unflatten(const GridSpec& grid, int n_train, const Eigen::VectorXd& v);

    OptState& operator+=(const OptState& o);
    OptState& operator*=(double s);
};

double norm(const OptState& y);

struct ProblemData {
    std::vector<ScalarField> f;
    std::vector<ScalarField> u_dag;

    const GridSpec& grid() const { return f.front().grid(); }
    int size() const { return int(f.size()); }
    void validate() const;
};

struct ActiveMask {
    GridSpec grid;
    std::vector<std::uint8_t> active;

    bool operator()(int i, int j) const { return active[grid.node(i, j)] != 0; }
    std::size_t count() const;
};

enum class JacobianMode { Exact, Projected };

const char* to_string(JacobianMode m);

/// Transmission rows replacing rows (1), (3) and (5) on one artificial
/// boundary column of a subdomain problem. For a field v with neighbour data w
/// the row reads
///   (v[c] - w[c]) - kappa (v[c_in] - w[c_in]),
/// where c_in = column + inward. kappa = 1/(1 + h S) encodes the Robin
/// condition (d/dn + S) v = (d/dn + S) w with a one-sided normal derivative;
/// kappa = 0 gives Dirichlet data exchange.
struct InterfaceRows {
    int column = 0;
    int inward = 1;
    std::vector<double> kappa_u;  // per j
    std::vector<double> kappa_p;  // per j
    double kappa_lambda = 0.0;
    // Neighbour values per j at the interface column and its inward neighbour.
    std::vector<std::vector<double>> nb_u_outer, nb_u_inner;  // [pair][j]
    std::vector<std::vector<double>> nb_p_outer, nb_p_inner;
    std::vector<double> nb_lambda_outer, nb_lambda_inner;
};

using Interfaces = std::vector<InterfaceRows>;

/// F_h(y), shaped like y.
OptState residual(const OptState& y, const ProblemData& data, const ModelParams& params,
                  const Interfaces& ifaces = {});

/// Nodes where sum_k (u_k - f_k) p_k - beta L lambda > 0 (ties inactive).
/// Interface nodes are always inactive.
ActiveMask active_set(const OptState& y, const ProblemData& data, const ModelParams& params,
                      const Interfaces& ifaces = {});

/// Matrix-free generalized derivative G(y) dy.
OptState generalized_derivative_apply(const OptState& y, const OptState& dy, const ProblemData& data,
                                      const ModelParams& params, JacobianMode mode,
                                      const Interfaces& ifaces = {});

/// Explicit sparse G(y) in the flat layout of OptState::flatten().
SparseMatrix assemble_jacobian(const OptState& y, const ProblemData& data, const ModelParams& params,
                               JacobianMode mode, const Interfaces& ifaces = {});

/// theta = -beta L lambda + beta lambda + sum_k (u_k - f_k) p_k.
ScalarField multiplier(const OptState& y, const ProblemData& data, const ModelParams& params);

/// max over nodes of max(-lambda, 0), max(-theta, 0) and |theta lambda|.
double complementarity_residual(const ScalarField& lambda, const ScalarField& theta);

struct StateSolveOptions {
    double tol = 1e-9;
    int max_iter = 100;
    JacobianMode mode = JacobianMode::Projected;
    double mu_shift = 1e-12;
};

struct StateSolution {
    ScalarField u;
    VectorField q;
    int iterations = 0;
    double residual = 0.0;
};

/// Lower-level solve of rows (1)-(2) for fixed lambda (clamped at 0).
/// Throws SolverError when max_iter is exhausted.
StateSolution solve_state(const ScalarField& lambda, const ScalarField& f, const ModelParams& params,
                          const StateSolveOptions& opts = {});

/// Linearized state operator e_u(u, lambda) = -mu L - Div h'(Du) D + 2 lambda.
SparseMatrix state_operator(const ScalarField& lambda, const ScalarField& u, const ModelParams& params);

/// Adjoint state p solving e_u p = -2 (u - u_dag).
ScalarField solve_adjoint(const ScalarField& lambda, const ScalarField& u, const ScalarField& u_dag,
                          const ModelParams& params);

/// z solving e_u z = -2 xi (u - f).
ScalarField solve_linearized_state(const ScalarField& lambda, const ScalarField& u, const ScalarField& f,
                                   const ScalarField& xi, const ModelParams& params);

/// w solving e_u w = Div h''(Du)[D z_xi, D z_zeta] - 2 zeta z_xi - 2 xi z_zeta.
ScalarField solve_second_derivative(const ScalarField& lambda, const ScalarField& u, const ScalarField& f,
                                    const ScalarField& xi, const ScalarField& zeta, const ModelParams& params);

}  // namespace tvlearn
