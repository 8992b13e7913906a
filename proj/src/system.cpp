#include "tvlearn/system.hpp"

#include "tvlearn/error.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <string>

namespace tvlearn {

using Triplet = Eigen::Triplet<double, int>;

void ModelParams::validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be >= 0");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be > 0");
    if (!(huber.gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (n_train < 1) throw ConfigError("n_train must be >= 1");
}

const char* to_string(JacobianMode m) { return m == JacobianMode::Exact ? "exact" : "projected"; }

// OptState

OptState OptState::zeros(const GridSpec& grid, int n_train) {
    OptState y;
    for (int k = 0; k < n_train; ++k) {
        y.u.emplace_back(grid);
        y.q.emplace_back(grid);
        y.p.emplace_back(grid);
        y.z.emplace_back(grid);
    }
    y.lambda = ScalarField(grid);
    return y;
}

void OptState::validate(const GridSpec& grid, int n) const {
    if (int(u.size()) != n || int(q.size()) != n || int(p.size()) != n || int(z.size()) != n) {
        throw ShapeError("OptState: expected " + std::to_string(n) + " training pairs");
    }
    auto check = [&](const GridSpec& g) {
        if (!(g == grid)) throw ShapeError("OptState: field grid mismatch");
    };
    for (int k = 0; k < n; ++k) {
        check(u[k].grid());
        check(q[k].grid());
        check(p[k].grid());
        check(z[k].grid());
    }
    check(lambda.grid());
}

std::size_t OptState::flat_size() const {
    const GridSpec& g = grid();
    return std::size_t(n_train()) * (2 * g.nodes() + 2 * g.edges()) + g.nodes();
}

Eigen::VectorXd OptState::flatten() const {
    Eigen::VectorXd v{Eigen::Index(flat_size())};
    Eigen::Index pos = 0;
    auto put = [&](std::span<const double> s) {
        for (double x : s) v[pos++] = x;
    };
    for (int k = 0; k < n_train(); ++k) {
        put(u[k].values());
        put(q[k].comp1());
        put(q[k].comp2());
        put(p[k].values());
        put(z[k].comp1());
        put(z[k].comp2());
    }
    put(lambda.values());
    return v;
}

OptState OptState::unflatten(const GridSpec& grid, int n_train, const Eigen::VectorXd& v) {
    OptState y = zeros(grid, n_train);
    if (std::size_t(v.size()) != y.flat_size()) throw ShapeError("OptState::unflatten: size mismatch");
    Eigen::Index pos = 0;
    auto take = [&](std::span<double> s) {
        for (double& x : s) x = v[pos++];
    };
    for (int k = 0; k < n_train; ++k) {
        take(y.u[k].values());
        take(y.q[k].comp1());
        take(y.q[k].comp2());
        take(y.p[k].values());
        take(y.z[k].comp1());
        take(y.z[k].comp2());
    }
    take(y.lambda.values());
    return y;
}

OptState& OptState::operator+=(const OptState& o) {
    for (int k = 0; k < n_train(); ++k) {
        u[k] += o.u[k];
        q[k] += o.q[k];
        p[k] += o.p[k];
        z[k] += o.z[k];
    }
    lambda += o.lambda;
    return *this;
}

OptState& OptState::operator*=(double s) {
    for (int k = 0; k < n_train(); ++k) {
        u[k] *= s;
        q[k] *= s;
        p[k] *= s;
        z[k] *= s;
    }
    lambda *= s;
    return *this;
}

double norm(const OptState& y) {
    double s = 0.0;
    for (int k = 0; k < y.n_train(); ++k) {
        s += inner(y.u[k], y.u[k]) + inner(y.q[k], y.q[k]) + inner(y.p[k], y.p[k]) + inner(y.z[k], y.z[k]);
    }
    s += inner(y.lambda, y.lambda);
    return std::sqrt(s);
}

void ProblemData::validate() const {
    if (f.empty()) throw ShapeError("ProblemData: no training pairs");
    if (f.size() != u_dag.size()) throw ShapeError("ProblemData: f and u_dag counts differ");
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (!(f[k].grid() == f[0].grid()) || !(u_dag[k].grid() == f[0].grid())) {
            throw ShapeError("ProblemData: pair " + std::to_string(k) + " has a different shape");
        }
    }
}

std::size_t ActiveMask::count() const {
    return std::size_t(std::count_if(active.begin(), active.end(), [](std::uint8_t a) { return a != 0; }));
}

namespace {

void check_inputs(const OptState& y, const ProblemData& data, const ModelParams& params) {
    params.validate();
    data.validate();
    if (data.size() != params.n_train) throw ShapeError("ProblemData size differs from n_train");
    y.validate(data.grid(), params.n_train);
}

ScalarField coupling(const OptState& y, const ProblemData& data) {
    ScalarField c(y.grid());
    for (int k = 0; k < y.n_train(); ++k)
        for (std::size_t n = 0; n < c.size(); ++n) c[n] += (y.u[k][n] - data.f[k][n]) * y.p[k][n];
    return c;
}

// Node index of interface row (iface, j).
std::size_t iface_node(const GridSpec& g, const InterfaceRows& r, int j) { return g.node(r.column, j); }
std::size_t iface_inner(const GridSpec& g, const InterfaceRows& r, int j) { return g.node(r.column + r.inward, j); }

void check_interfaces(const GridSpec& g, const Interfaces& ifaces, int n_train) {
    for (const auto& r : ifaces) {
        const int ci = r.column + r.inward;
        if (r.column < 0 || r.column >= g.m || ci < 0 || ci >= g.m || (r.inward != 1 && r.inward != -1)) {
            throw ShapeError("interface column out of range");
        }
        auto sized = [&](const std::vector<double>& v) { return int(v.size()) == g.l; };
        if (!sized(r.kappa_u) || !sized(r.kappa_p) || !sized(r.nb_lambda_outer) || !sized(r.nb_lambda_inner) ||
            int(r.nb_u_outer.size()) != n_train || int(r.nb_u_inner.size()) != n_train ||
            int(r.nb_p_outer.size()) != n_train || int(r.nb_p_inner.size()) != n_train) {
            throw ShapeError("interface data has the wrong shape");
        }
        for (int k = 0; k < n_train; ++k) {
            if (!sized(r.nb_u_outer[k]) || !sized(r.nb_u_inner[k]) || !sized(r.nb_p_outer[k]) ||
                !sized(r.nb_p_inner[k])) {
                throw ShapeError("interface trace has the wrong shape");
            }
        }
    }
}

std::vector<std::uint8_t> interface_mask(const GridSpec& g, const Interfaces& ifaces) {
    std::vector<std::uint8_t> mask(g.nodes(), 0);
    for (const auto& r : ifaces)
        for (int j = 0; j < g.l; ++j) mask[iface_node(g, r, j)] = 1;
    return mask;
}

SparseMatrix diag(const ScalarField& d) {
    SparseMatrix m(int(d.size()), int(d.size()));
    m.reserve(Eigen::VectorXi::Constant(int(d.size()), 1));
    for (std::size_t n = 0; n < d.size(); ++n) m.insert(int(n), int(n)) = d[n];
    return m;
}

SparseMatrix identity(int n) {
    SparseMatrix m(n, n);
    m.setIdentity();
    return m;
}

void add_block(std::vector<Triplet>& t, const SparseMatrix& b, int row_off, int col_off,
               const std::vector<std::uint8_t>* skip_rows = nullptr, double scale = 1.0) {
    for (int c = 0; c < b.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(b, c); it; ++it) {
            if (skip_rows && (*skip_rows)[std::size_t(it.row())]) continue;
            t.emplace_back(row_off + int(it.row()), col_off + int(it.col()), scale * it.value());
        }
    }
}

}  // namespace

OptState residual(const OptState& y, const ProblemData& data, const ModelParams& params, const Interfaces& ifaces) {
    check_inputs(y, data, params);
    const GridSpec& g = y.grid();
    check_interfaces(g, ifaces, params.n_train);
    const int n_train = params.n_train;
    OptState r = OptState::zeros(g, n_train);

    for (int k = 0; k < n_train; ++k) {
        const VectorField du = gradient(y.u[k]);
        const VectorField dp = gradient(y.p[k]);

        ScalarField r1 = laplacian(y.u[k], params.bc);
        r1 *= -params.mu;
        r1 -= divergence(y.q[k]);
        ScalarField r3 = laplacian(y.p[k], params.bc);
        r3 *= -params.mu;
        r3 -= divergence(y.z[k]);
        for (std::size_t n = 0; n < g.nodes(); ++n) {
            r1[n] += 2.0 * y.lambda[n] * (y.u[k][n] - data.f[k][n]);
            r3[n] += 2.0 * y.lambda[n] * y.p[k][n] + 2.0 * (y.u[k][n] - data.u_dag[k][n]);
        }
        r.u[k] = std::move(r1);
        r.p[k] = std::move(r3);
        r.q[k] = h_field(du, params.huber) - y.q[k];
        r.z[k] = h_prime_field(du, dp, params.huber) - y.z[k];
    }

    const ScalarField c = coupling(y, data);
    const ScalarField lap_l = laplacian(y.lambda, params.bc);
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const double arg = -params.beta * lap_l[n] + c[n];
        r.lambda[n] = arg + params.beta * y.lambda[n] - std::max(0.0, arg);
    }

    for (const auto& rows : ifaces) {
        for (int j = 0; j < g.l; ++j) {
            const std::size_t c0 = iface_node(g, rows, j);
            const std::size_t c1 = iface_inner(g, rows, j);
            for (int k = 0; k < n_train; ++k) {
                r.u[k][c0] = (y.u[k][c0] - rows.nb_u_outer[k][j]) - rows.kappa_u[j] * (y.u[k][c1] - rows.nb_u_inner[k][j]);
                r.p[k][c0] = (y.p[k][c0] - rows.nb_p_outer[k][j]) - rows.kappa_p[j] * (y.p[k][c1] - rows.nb_p_inner[k][j]);
            }
            r.lambda[c0] = (y.lambda[c0] - rows.nb_lambda_outer[j]) -
                           rows.kappa_lambda * (y.lambda[c1] - rows.nb_lambda_inner[j]);
        }
    }
    return r;
}

ActiveMask active_set(const OptState& y, const ProblemData& data, const ModelParams& params, const Interfaces& ifaces) {
    check_inputs(y, data, params);
    const GridSpec& g = y.grid();
    const ScalarField c = coupling(y, data);
    const ScalarField lap_l = laplacian(y.lambda, params.bc);
    const auto skip = interface_mask(g, ifaces);
    ActiveMask mask{g, std::vector<std::uint8_t>(g.nodes(), 0)};
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        mask.active[n] = (!skip[n] && c[n] - params.beta * lap_l[n] > 0.0) ? 1 : 0;
    }
    return mask;
}

OptState generalized_derivative_apply(const OptState& y, const OptState& dy, const ProblemData& data,
                                      const ModelParams& params, JacobianMode mode, const Interfaces& ifaces) {
    check_inputs(y, data, params);
    const GridSpec& g = y.grid();
    dy.validate(g, params.n_train);
    check_interfaces(g, ifaces, params.n_train);
    const int n_train = params.n_train;
    const ActiveMask mask = active_set(y, data, params, ifaces);
    OptState out = OptState::zeros(g, n_train);

    ScalarField dc(g);  // sum_k p_k du_k + (u_k - f_k) dp_k
    for (int k = 0; k < n_train; ++k) {
        const VectorField du = gradient(y.u[k]);
        const VectorField dp = gradient(y.p[k]);
        const VectorField d_du = gradient(dy.u[k]);
        const VectorField d_dp = gradient(dy.p[k]);

        ScalarField r1 = laplacian(dy.u[k], params.bc);
        r1 *= -params.mu;
        r1 -= divergence(dy.q[k]);
        ScalarField r3 = laplacian(dy.p[k], params.bc);
        r3 *= -params.mu;
        r3 -= divergence(dy.z[k]);
        for (std::size_t n = 0; n < g.nodes(); ++n) {
            r1[n] += 2.0 * y.lambda[n] * dy.u[k][n] + 2.0 * (y.u[k][n] - data.f[k][n]) * dy.lambda[n];
            r3[n] += 2.0 * dy.u[k][n] + 2.0 * y.lambda[n] * dy.p[k][n] + 2.0 * y.p[k][n] * dy.lambda[n];
            dc[n] += y.p[k][n] * dy.u[k][n] + (y.u[k][n] - data.f[k][n]) * dy.p[k][n];
        }
        out.u[k] = std::move(r1);
        out.p[k] = std::move(r3);

        const auto hprime = [&](const VectorField& xi) {
            return mode == JacobianMode::Exact ? h_prime_field(du, xi, params.huber)
                                               : h_prime_projected_field(du, y.q[k], xi, params.huber);
        };
        out.q[k] = hprime(d_du) - dy.q[k];
        out.z[k] = h_second_field(du, dp, d_du, params.huber) + hprime(d_dp) - dy.z[k];
    }

    const ScalarField lap_dl = laplacian(dy.lambda, params.bc);
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const double inner_term = dc[n] - params.beta * lap_dl[n];
        out.lambda[n] = inner_term + params.beta * dy.lambda[n] - (mask.active[n] ? inner_term : 0.0);
    }

    for (const auto& rows : ifaces) {
        for (int j = 0; j < g.l; ++j) {
            const std::size_t c0 = iface_node(g, rows, j);
            const std::size_t c1 = iface_inner(g, rows, j);
            for (int k = 0; k < n_train; ++k) {
                out.u[k][c0] = dy.u[k][c0] - rows.kappa_u[j] * dy.u[k][c1];
                out.p[k][c0] = dy.p[k][c0] - rows.kappa_p[j] * dy.p[k][c1];
            }
            out.lambda[c0] = dy.lambda[c0] - rows.kappa_lambda * dy.lambda[c1];
        }
    }
    return out;
}

SparseMatrix assemble_jacobian(const OptState& y, const ProblemData& data, const ModelParams& params,
                               JacobianMode mode, const Interfaces& ifaces) {
    check_inputs(y, data, params);
    const GridSpec& g = y.grid();
    check_interfaces(g, ifaces, params.n_train);
    const int n_train = params.n_train;
    const int nn = int(g.nodes());
    const int ne = int(g.edges());
    const int block = 2 * nn + 2 * ne;
    const int lam_off = n_train * block;
    const int total = lam_off + nn;

    const SparseMatrix d = gradient_matrix(g);
    const SparseMatrix dt = SparseMatrix(d.transpose());
    const SparseMatrix lap = laplacian_matrix(g, params.bc);
    const SparseMatrix eye_n = identity(nn);
    const SparseMatrix eye_e = identity(ne);
    const auto skip = interface_mask(g, ifaces);
    const ActiveMask mask = active_set(y, data, params, ifaces);
    ScalarField inactive(g);
    for (int n = 0; n < nn; ++n) inactive[std::size_t(n)] = mask.active[std::size_t(n)] ? 0.0 : 1.0;
    const SparseMatrix keep = diag(inactive);

    std::vector<Triplet> t;
    t.reserve(std::size_t(total) * 12);

    const SparseMatrix shifted = SparseMatrix(2.0 * diag(y.lambda) - params.mu * lap);
    for (int k = 0; k < n_train; ++k) {
        const int ou = k * block;
        const int oq = ou + nn;
        const int op = oq + ne;
        const int oz = op + nn;
        const VectorField du = gradient(y.u[k]);
        const VectorField dp = gradient(y.p[k]);
        const SparseMatrix hmat =
            mode == JacobianMode::Exact ? h_prime_block(du, params.huber) : h_prime_projected_block(du, y.q[k], params.huber);
        const SparseMatrix hd = hmat * d;
        const SparseMatrix kd = h_second_block(du, dp, params.huber) * d;
        const SparseMatrix umf = diag(y.u[k] - data.f[k]);
        const SparseMatrix pk = diag(y.p[k]);

        // row 1
        add_block(t, shifted, ou, ou, &skip);
        add_block(t, dt, ou, oq, &skip);
        add_block(t, umf, ou, lam_off, &skip, 2.0);
        // row 2
        add_block(t, hd, oq, ou);
        add_block(t, eye_e, oq, oq, nullptr, -1.0);
        // row 3
        add_block(t, eye_n, op, ou, &skip, 2.0);
        add_block(t, shifted, op, op, &skip);
        add_block(t, dt, op, oz, &skip);
        add_block(t, pk, op, lam_off, &skip, 2.0);
        // row 4
        add_block(t, kd, oz, ou);
        add_block(t, hd, oz, op);
        add_block(t, eye_e, oz, oz, nullptr, -1.0);
        // row 5
        add_block(t, SparseMatrix(keep * pk), lam_off, ou, &skip);
        add_block(t, SparseMatrix(keep * umf), lam_off, op, &skip);
    }
    add_block(t, SparseMatrix(params.beta * eye_n - params.beta * (keep * lap)), lam_off, lam_off, &skip);

    for (const auto& rows : ifaces) {
        for (int j = 0; j < g.l; ++j) {
            const int c0 = int(iface_node(g, rows, j));
            const int c1 = int(iface_inner(g, rows, j));
            for (int k = 0; k < n_train; ++k) {
                const int ou = k * block;
                const int op = ou + nn + ne;
                t.emplace_back(ou + c0, ou + c0, 1.0);
                t.emplace_back(ou + c0, ou + c1, -rows.kappa_u[std::size_t(j)]);
                t.emplace_back(op + c0, op + c0, 1.0);
                t.emplace_back(op + c0, op + c1, -rows.kappa_p[std::size_t(j)]);
            }
            t.emplace_back(lam_off + c0, lam_off + c0, 1.0);
            t.emplace_back(lam_off + c0, lam_off + c1, -rows.kappa_lambda);
        }
    }

    SparseMatrix jac(total, total);
    jac.setFromTriplets(t.begin(), t.end());
    return jac;
}

ScalarField multiplier(const OptState& y, const ProblemData& data, const ModelParams& params) {
    check_inputs(y, data, params);
    ScalarField theta = coupling(y, data);
    const ScalarField lap_l = laplacian(y.lambda, params.bc);
    for (std::size_t n = 0; n < theta.size(); ++n) theta[n] += -params.beta * lap_l[n] + params.beta * y.lambda[n];
    return theta;
}

double complementarity_residual(const ScalarField& lambda, const ScalarField& theta) {
    if (!(lambda.grid() == theta.grid())) throw ShapeError("complementarity_residual: grid mismatch");
    double worst = 0.0;
    for (std::size_t n = 0; n < lambda.size(); ++n) {
        worst = std::max({worst, std::max(-lambda[n], 0.0), std::max(-theta[n], 0.0), std::abs(theta[n] * lambda[n])});
    }
    return worst;
}

// Lower-level state solve

namespace {

ScalarField clamp_nonneg(const ScalarField& v) {
    ScalarField out = v;
    for (double& x : out.values()) x = std::max(x, 0.0);
    return out;
}

Eigen::VectorXd to_eigen(std::span<const double> s) {
    return Eigen::Map<const Eigen::VectorXd>(s.data(), Eigen::Index(s.size()));
}

Eigen::VectorXd stack(const VectorField& v) {
    Eigen::VectorXd out(Eigen::Index(v.comp1().size() + v.comp2().size()));
    out << to_eigen(v.comp1()), to_eigen(v.comp2());
    return out;
}

VectorField unstack(const GridSpec& g, const Eigen::VectorXd& v) {
    VectorField out(g);
    std::copy(v.data(), v.data() + out.comp1().size(), out.comp1().begin());
    std::copy(v.data() + out.comp1().size(), v.data() + v.size(), out.comp2().begin());
    return out;
}

ScalarField to_field(const GridSpec& g, const Eigen::VectorXd& v) {
    return ScalarField(g, std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd solve_sparse(const SparseMatrix& a, const Eigen::VectorXd& rhs, const char* what, int iteration) {
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw SolverError(std::string(what) + ": singular factorization", iteration);
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite()) throw SolverError(std::string(what) + ": solve failed", iteration);
    return x;
}

double state_residual_norm(const ScalarField& r1, const VectorField& r2) {
    return std::sqrt(inner(r1, r1) + inner(r2, r2));
}

}  // namespace

StateSolution solve_state(const ScalarField& lambda_in, const ScalarField& f, const ModelParams& params,
                          const StateSolveOptions& opts) {
    params.validate();
    if (!(lambda_in.grid() == f.grid())) throw ShapeError("solve_state: lambda and f grids differ");
    const GridSpec& g = f.grid();
    const ScalarField lambda = clamp_nonneg(lambda_in);
    const SparseMatrix d = gradient_matrix(g);
    const SparseMatrix dt = SparseMatrix(d.transpose());
    SparseMatrix base = SparseMatrix(2.0 * diag(lambda) - params.mu * laplacian_matrix(g, params.bc));
    if (params.mu == 0.0) base += opts.mu_shift * identity(int(g.nodes()));

    StateSolution s{f, h_field(gradient(f), params.huber), 0, 0.0};
    for (int it = 0;; ++it) {
        const VectorField du = gradient(s.u);
        ScalarField r1 = laplacian(s.u, params.bc);
        r1 *= -params.mu;
        r1 -= divergence(s.q);
        for (std::size_t n = 0; n < g.nodes(); ++n) r1[n] += 2.0 * lambda[n] * (s.u[n] - f[n]);
        const VectorField r2 = h_field(du, params.huber) - s.q;
        s.residual = state_residual_norm(r1, r2);
        s.iterations = it;
        if (s.residual <= opts.tol) return s;
        if (it >= opts.max_iter) {
            throw SolverError("solve_state: no convergence, residual " + std::to_string(s.residual), it);
        }
        const SparseMatrix hmat = opts.mode == JacobianMode::Exact ? h_prime_block(du, params.huber)
                                                                   : h_prime_projected_block(du, s.q, params.huber);
        const SparseMatrix a = base + dt * hmat * d;
        const Eigen::VectorXd r2v = stack(r2);
        const Eigen::VectorXd rhs = -to_eigen(r1.values()) - dt * r2v;
        const Eigen::VectorXd du_step = solve_sparse(a, rhs, "solve_state", it);
        const Eigen::VectorXd dq_step = hmat * (d * du_step) + r2v;
        s.u += to_field(g, du_step);
        s.q += unstack(g, dq_step);
    }
}

SparseMatrix state_operator(const ScalarField& lambda, const ScalarField& u, const ModelParams& params) {
    const GridSpec& g = u.grid();
    const SparseMatrix d = gradient_matrix(g);
    SparseMatrix op = SparseMatrix(2.0 * diag(lambda) - params.mu * laplacian_matrix(g, params.bc)) +
                      SparseMatrix(d.transpose()) * h_prime_block(gradient(u), params.huber) * d;
    return op;
}

ScalarField solve_adjoint(const ScalarField& lambda, const ScalarField& u, const ScalarField& u_dag,
                          const ModelParams& params) {
    params.validate();
    const GridSpec& g = u.grid();
    if (!(lambda.grid() == g) || !(u_dag.grid() == g)) throw ShapeError("solve_adjoint: grid mismatch");
    SparseMatrix op = state_operator(clamp_nonneg(lambda), u, params);
    if (params.mu == 0.0) op += 1e-12 * identity(int(g.nodes()));
    Eigen::VectorXd rhs(Eigen::Index(g.nodes()));
    for (std::size_t n = 0; n < g.nodes(); ++n) rhs[Eigen::Index(n)] = -2.0 * (u[n] - u_dag[n]);
    return to_field(g, solve_sparse(op, rhs, "solve_adjoint", 0));
}

ScalarField solve_linearized_state(const ScalarField& lambda, const ScalarField& u, const ScalarField& f,
                                   const ScalarField& xi, const ModelParams& params) {
    params.validate();
    const GridSpec& g = u.grid();
    if (!(lambda.grid() == g) || !(f.grid() == g) || !(xi.grid() == g)) {
        throw ShapeError("solve_linearized_state: grid mismatch");
    }
    const ScalarField lam = clamp_nonneg(lambda);
    Eigen::VectorXd rhs(Eigen::Index(g.nodes()));
    for (std::size_t n = 0; n < g.nodes(); ++n) rhs[Eigen::Index(n)] = -2.0 * xi[n] * (u[n] - f[n]);
    return to_field(g, solve_sparse(state_operator(lam, u, params), rhs, "solve_linearized_state", 0));
}

ScalarField solve_second_derivative(const ScalarField& lambda, const ScalarField& u, const ScalarField& f,
                                    const ScalarField& xi, const ScalarField& zeta, const ModelParams& params) {
    params.validate();
    const GridSpec& g = u.grid();
    const ScalarField lam = clamp_nonneg(lambda);
    const SparseMatrix op = state_operator(lam, u, params);
    Eigen::VectorXd rhs_xi(Eigen::Index(g.nodes())), rhs_zeta(Eigen::Index(g.nodes()));
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        rhs_xi[Eigen::Index(n)] = -2.0 * xi[n] * (u[n] - f[n]);
        rhs_zeta[Eigen::Index(n)] = -2.0 * zeta[n] * (u[n] - f[n]);
    }
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(op);
    if (lu.info() != Eigen::Success) throw SolverError("solve_second_derivative: singular factorization", 0);
    const ScalarField z_xi = to_field(g, lu.solve(rhs_xi));
    const ScalarField z_zeta = to_field(g, lu.solve(rhs_zeta));

    const VectorField curv = h_second_field(gradient(u), gradient(z_xi), gradient(z_zeta), params.huber);
    ScalarField rhs = divergence(curv);
    for (std::size_t n = 0; n < g.nodes(); ++n) rhs[n] -= 2.0 * zeta[n] * z_xi[n] + 2.0 * xi[n] * z_zeta[n];
    const Eigen::VectorXd w = lu.solve(to_eigen(rhs.values()));
    if (lu.info() != Eigen::Success || !w.allFinite()) throw SolverError("solve_second_derivative: solve failed", 0);
    return to_field(g, w);
}

}  // namespace tvlearn
