#include "tvlearn/ssn.hpp"

#include "tvlearn/error.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace tvlearn {

using Triplet = Eigen::Triplet<double, int>;

void SsnConfig::validate() const {
    if (!(tol > 0.0) || !(step_tol > 0.0)) throw ConfigError("ssn tolerances must be positive");
    if (max_iter < 1) throw ConfigError("ssn max_iter must be >= 1");
    if (!(mu_shift >= 0.0)) throw ConfigError("ssn mu_shift must be >= 0");
}

namespace {

void add_block(std::vector<Triplet>& t, const SparseMatrix& b, int row_off, int col_off,
               const std::vector<std::uint8_t>& skip_rows, double scale = 1.0) {
    for (int c = 0; c < b.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(b, c); it; ++it) {
            if (skip_rows[std::size_t(it.row())]) continue;
            t.emplace_back(row_off + int(it.row()), col_off + int(it.col()), scale * it.value());
        }
    }
}

SparseMatrix diag(std::span<const double> d) {
    SparseMatrix m(int(d.size()), int(d.size()));
    m.reserve(Eigen::VectorXi::Constant(int(d.size()), 1));
    for (std::size_t n = 0; n < d.size(); ++n) m.insert(int(n), int(n)) = d[n];
    return m;
}

Eigen::Map<const Eigen::VectorXd> view(std::span<const double> s) {
    return Eigen::Map<const Eigen::VectorXd>(s.data(), Eigen::Index(s.size()));
}

Eigen::VectorXd stack(const VectorField& v) {
    Eigen::VectorXd out(Eigen::Index(v.comp1().size() + v.comp2().size()));
    out << view(v.comp1()), view(v.comp2());
    return out;
}

void unstack_into(VectorField& out, const Eigen::VectorXd& v) {
    std::copy(v.data(), v.data() + out.comp1().size(), out.comp1().begin());
    std::copy(v.data() + out.comp1().size(), v.data() + v.size(), out.comp2().begin());
}

}  // namespace

NewtonStep newton_step(const OptState& y, const ProblemData& data, const ModelParams& params, const SsnConfig& config,
                       const Interfaces& ifaces) {
    const OptState f = residual(y, data, params, ifaces);
    const GridSpec& g = y.grid();
    const int n_train = params.n_train;
    const int nn = int(g.nodes());
    const int lam_off = 2 * n_train * nn;

    NewtonStep step{OptState::zeros(g, n_train), norm(f)};
    if (step.residual_norm == 0.0) return step;

    std::vector<std::uint8_t> skip(static_cast<std::size_t>(nn), 0);
    for (const auto& r : ifaces)
        for (int j = 0; j < g.l; ++j) skip[g.node(r.column, j)] = 1;

    const SparseMatrix d = gradient_matrix(g);
    const SparseMatrix dt = SparseMatrix(d.transpose());
    const SparseMatrix lap = laplacian_matrix(g, params.bc);
    SparseMatrix eye(nn, nn);
    eye.setIdentity();
    const ActiveMask mask = active_set(y, data, params, ifaces);
    std::vector<double> inactive(static_cast<std::size_t>(nn));
    for (int n = 0; n < nn; ++n) inactive[std::size_t(n)] = mask.active[std::size_t(n)] ? 0.0 : 1.0;
    const SparseMatrix keep = diag(inactive);

    SparseMatrix shifted = SparseMatrix(2.0 * diag(y.lambda.values()) - params.mu * lap);
    if (params.mu == 0.0) shifted += config.mu_shift * eye;

    std::vector<Triplet> t;
    t.reserve(std::size_t(lam_off + nn) * 24);
    Eigen::VectorXd rhs(lam_off + nn);
    std::vector<SparseMatrix> hd(static_cast<std::size_t>(n_train)), kd(static_cast<std::size_t>(n_train));

    for (int k = 0; k < n_train; ++k) {
        const int ou = 2 * k * nn;
        const int op = ou + nn;
        const VectorField du = gradient(y.u[std::size_t(k)]);
        const VectorField dp = gradient(y.p[std::size_t(k)]);
        const SparseMatrix hmat = config.mode == JacobianMode::Exact
                                      ? h_prime_block(du, params.huber)
                                      : h_prime_projected_block(du, y.q[std::size_t(k)], params.huber);
        hd[std::size_t(k)] = hmat * d;
        kd[std::size_t(k)] = h_second_block(du, dp, params.huber) * d;
        const SparseMatrix a = shifted + dt * hd[std::size_t(k)];
        const SparseMatrix coupling = 2.0 * eye + dt * kd[std::size_t(k)];
        std::vector<double> umf(static_cast<std::size_t>(nn));
        for (int n = 0; n < nn; ++n) {
            umf[std::size_t(n)] = y.u[std::size_t(k)][std::size_t(n)] - data.f[std::size_t(k)][std::size_t(n)];
        }
        const SparseMatrix umf_d = diag(umf);
        const SparseMatrix p_d = diag(y.p[std::size_t(k)].values());

        add_block(t, a, ou, ou, skip);
        add_block(t, umf_d, ou, lam_off, skip, 2.0);
        add_block(t, coupling, op, ou, skip);
        add_block(t, a, op, op, skip);
        add_block(t, p_d, op, lam_off, skip, 2.0);
        add_block(t, SparseMatrix(keep * p_d), lam_off, ou, skip);
        add_block(t, SparseMatrix(keep * umf_d), lam_off, op, skip);

        rhs.segment(ou, nn) = -view(f.u[std::size_t(k)].values()) - dt * stack(f.q[std::size_t(k)]);
        rhs.segment(op, nn) = -view(f.p[std::size_t(k)].values()) - dt * stack(f.z[std::size_t(k)]);
    }
    add_block(t, SparseMatrix(params.beta * eye - params.beta * (keep * lap)), lam_off, lam_off, skip);
    rhs.segment(lam_off, nn) = -view(f.lambda.values());

    for (const auto& r : ifaces) {
        for (int j = 0; j < g.l; ++j) {
            const int c0 = int(g.node(r.column, j));
            const int c1 = int(g.node(r.column + r.inward, j));
            for (int k = 0; k < n_train; ++k) {
                const int ou = 2 * k * nn;
                const int op = ou + nn;
                t.emplace_back(ou + c0, ou + c0, 1.0);
                t.emplace_back(ou + c0, ou + c1, -r.kappa_u[std::size_t(j)]);
                t.emplace_back(op + c0, op + c0, 1.0);
                t.emplace_back(op + c0, op + c1, -r.kappa_p[std::size_t(j)]);
                rhs[ou + c0] = -f.u[std::size_t(k)][std::size_t(c0)];
                rhs[op + c0] = -f.p[std::size_t(k)][std::size_t(c0)];
            }
            t.emplace_back(lam_off + c0, lam_off + c0, 1.0);
            t.emplace_back(lam_off + c0, lam_off + c1, -r.kappa_lambda);
            rhs[lam_off + c0] = -f.lambda[std::size_t(c0)];
        }
    }

    SparseMatrix reduced(lam_off + nn, lam_off + nn);
    reduced.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(reduced);
    if (lu.info() != Eigen::Success) throw SolverError("newton_step: singular reduced Jacobian", 0);
    const Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite()) throw SolverError("newton_step: linear solve failed", 0);

    for (int k = 0; k < n_train; ++k) {
        const int ou = 2 * k * nn;
        const int op = ou + nn;
        auto& s = step.dy;
        std::copy(x.data() + ou, x.data() + ou + nn, s.u[std::size_t(k)].values().begin());
        std::copy(x.data() + op, x.data() + op + nn, s.p[std::size_t(k)].values().begin());
        const Eigen::VectorXd xu = x.segment(ou, nn);
        const Eigen::VectorXd xp = x.segment(op, nn);
        unstack_into(s.q[std::size_t(k)], hd[std::size_t(k)] * xu + stack(f.q[std::size_t(k)]));
        unstack_into(s.z[std::size_t(k)],
                     kd[std::size_t(k)] * xu + hd[std::size_t(k)] * xp + stack(f.z[std::size_t(k)]));
    }
    std::copy(x.data() + lam_off, x.data() + lam_off + nn, step.dy.lambda.values().begin());
    return step;
}

OptState initial_state(const ProblemData& data, const ModelParams& params, double lambda_init) {
    data.validate();
    OptState y = OptState::zeros(data.grid(), data.size());
    y.lambda = ScalarField(data.grid(), lambda_init);
    for (int k = 0; k < data.size(); ++k) {
        const auto kk = std::size_t(k);
        StateSolution st = solve_state(y.lambda, data.f[kk], params);
        y.p[kk] = solve_adjoint(y.lambda, st.u, data.u_dag[kk], params);
        y.z[kk] = h_prime_field(gradient(st.u), gradient(y.p[kk]), params.huber);
        y.u[kk] = std::move(st.u);
        y.q[kk] = std::move(st.q);
    }
    return y;
}

OptState raw_initial_state(const ProblemData& data, const ModelParams& params, double lambda_init) {
    data.validate();
    OptState y = OptState::zeros(data.grid(), data.size());
    for (int k = 0; k < data.size(); ++k) {
        y.u[std::size_t(k)] = data.f[std::size_t(k)];
        y.q[std::size_t(k)] = h_field(gradient(data.f[std::size_t(k)]), params.huber);
    }
    y.lambda = ScalarField(data.grid(), lambda_init);
    return y;
}

SsnResult ssn_solve(const OptState& y0, const ProblemData& data, const ModelParams& params, const SsnConfig& config,
                    const Interfaces& ifaces) {
    config.validate();
    SsnResult out{y0, {}};
    SsnReport& rep = out.report;
    double res = norm(residual(out.y, data, params, ifaces));
    rep.residual_history.push_back(res);
    for (int it = 0;; ++it) {
        if (!std::isfinite(res)) throw SolverError("ssn_solve: residual is not finite", it);
        if (res <= config.tol) {
            rep.converged = true;
            break;
        }
        if (it >= config.max_iter) break;

        NewtonStep step;
        try {
            step = newton_step(out.y, data, params, config, ifaces);
        } catch (const SolverError& e) {
            throw SolverError(e.what(), it);
        }
        const std::size_t active = active_set(out.y, data, params, ifaces).count();
        const double step_norm = norm(step.dy);
        out.y += step.dy;
        res = norm(residual(out.y, data, params, ifaces));

        rep.iterations = it + 1;
        rep.residual_history.push_back(res);
        rep.step_history.push_back(step_norm);
        rep.active_sizes.push_back(active);
        if (config.log) {
            char line[128];
            std::snprintf(line, sizeof line, "iter %d residual %.6e step %.6e active %zu\n", it + 1, res, step_norm,
                          active);
            *config.log << line;
        }
        if (step_norm <= config.step_tol && std::isfinite(res)) {
            rep.converged = true;
            break;
        }
    }
    return out;
}

std::vector<double> residual_ratios(const SsnReport& report) {
    std::vector<double> r;
    for (std::size_t k = 1; k < report.residual_history.size(); ++k) {
        const double prev = report.residual_history[k - 1];
        r.push_back(prev > 0.0 ? report.residual_history[k] / prev : 0.0);
    }
    return r;
}

double superlinearity_check(const SsnReport& report) {
    if (report.residual_history.size() < 4) {
        throw ConfigError("superlinearity_check: need at least 3 iterations, got " +
                          std::to_string(int(report.residual_history.size()) - 1));
    }
    return residual_ratios(report).back();
}

}  // namespace tvlearn
