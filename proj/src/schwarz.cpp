#include "tvlearn/schwarz.hpp"

#include "tvlearn/error.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <thread>

namespace tvlearn {

SubdomainLayout partition(const GridSpec& grid, int m_sub, int overlap) {
    grid.validate();
    if (m_sub < 1) throw ConfigError("partition: need at least one subdomain");
    if (overlap < 1) throw ConfigError("partition: overlap must be >= 1");
    SubdomainLayout lay{grid, m_sub, overlap, {}, {}};
    if (m_sub == 1) {
        lay.ranges.push_back({0, grid.m - 1});
        lay.interfaces.emplace_back();
        return lay;
    }
    const int total = grid.m + (m_sub - 1) * overlap;
    int start = 0;
    for (int j = 0; j < m_sub; ++j) {
        const int w = total / m_sub + (j < total % m_sub ? 1 : 0);
        const bool inner = j > 0 && j < m_sub - 1;
        if (w < overlap + 2 || (inner && w < 2 * overlap)) {
            throw ConfigError("partition: " + std::to_string(m_sub) + " strips with overlap " + std::to_string(overlap) +
                              " do not fit a grid of width " + std::to_string(grid.m));
        }
        lay.ranges.push_back({start, start + w - 1});
        start += w - overlap;
    }
    lay.interfaces.resize(std::size_t(m_sub));
    for (int j = 0; j < m_sub; ++j) {
        const Window& w = lay.ranges[std::size_t(j)];
        if (j > 0) lay.interfaces[std::size_t(j)].push_back({w.first, +1, j - 1});
        if (j < m_sub - 1) lay.interfaces[std::size_t(j)].push_back({w.last, -1, j + 1});
    }
    return lay;
}

const char* to_string(TransmissionKind k) { return k == TransmissionKind::Classical ? "classical" : "optimized"; }

TransmissionKind parse_transmission_kind(const std::string& s) {
    if (s == "classical") return TransmissionKind::Classical;
    if (s == "optimized") return TransmissionKind::Optimized;
    throw ConfigError("unknown transmission kind '" + s + "' (expected classical or optimized)");
}

TransmissionSpec transmission_params(const ScalarField& lambda, const ModelParams& params,
                                     const SubdomainLayout& layout, TransmissionKind kind, double mu_floor) {
    if (!(lambda.grid() == layout.grid)) throw ShapeError("transmission_params: lambda is not on the layout grid");
    TransmissionSpec spec{kind, {}};
    spec.sites.resize(layout.interfaces.size());
    const double mu_eff = std::max(params.mu, mu_floor);
    for (std::size_t j = 0; j < layout.interfaces.size(); ++j) {
        for (const InterfaceSite& site : layout.interfaces[j]) {
            InterfaceCoefficients c;
            c.column = site.column;
            if (kind == TransmissionKind::Optimized) {
                // The strip on the left of a pair sees its interface with inward = -1.
                const double sign = site.inward < 0 ? 1.0 : -1.0;
                c.s_u.resize(std::size_t(layout.grid.l));
                for (int r = 0; r < layout.grid.l; ++r) {
                    c.s_u[std::size_t(r)] = sign * std::sqrt(2.0 * std::max(lambda(site.column, r), 0.0) / mu_eff);
                }
                c.s_p = c.s_u;
                c.s_lambda = sign;
            }
            spec.sites[j].push_back(std::move(c));
        }
    }
    return spec;
}

namespace {

ScalarField restrict_field(const ScalarField& v, const Window& w) {
    const GridSpec& g = v.grid();
    GridSpec lg{w.width(), g.l, g.h};
    ScalarField out(lg);
    for (int j = 0; j < g.l; ++j)
        for (int i = 0; i < lg.m; ++i) out(i, j) = v(w.first + i, j);
    return out;
}

VectorField restrict_field(const VectorField& v, const Window& w) {
    const GridSpec& g = v.grid();
    GridSpec lg{w.width(), g.l, g.h};
    VectorField out(lg);
    for (int j = 0; j < g.l; ++j) {
        for (int i = 0; i < lg.m; ++i) {
            if (i < lg.m - 1) out.c1(i, j) = v.c1(w.first + i, j);
            if (j < g.l - 1) out.c2(i, j) = v.c2(w.first + i, j);
        }
    }
    return out;
}

}  // namespace

OptState restrict_state(const OptState& y, const Window& w) {
    const int n = y.n_train();
    OptState out;
    for (int k = 0; k < n; ++k) {
        const auto kk = std::size_t(k);
        out.u.push_back(restrict_field(y.u[kk], w));
        out.q.push_back(restrict_field(y.q[kk], w));
        out.p.push_back(restrict_field(y.p[kk], w));
        out.z.push_back(restrict_field(y.z[kk], w));
    }
    out.lambda = restrict_field(y.lambda, w);
    return out;
}

ProblemData restrict_data(const ProblemData& data, const Window& w) {
    ProblemData out;
    for (int k = 0; k < data.size(); ++k) {
        out.f.push_back(restrict_field(data.f[std::size_t(k)], w));
        out.u_dag.push_back(restrict_field(data.u_dag[std::size_t(k)], w));
    }
    return out;
}

Interfaces interface_rows(const OptState& y, const SubdomainLayout& layout, const TransmissionSpec& spec, int j) {
    const Window& w = layout.ranges[std::size_t(j)];
    const GridSpec& g = layout.grid;
    const int n = y.n_train();
    Interfaces rows;
    const auto& sites = layout.interfaces[std::size_t(j)];
    for (std::size_t s = 0; s < sites.size(); ++s) {
        const InterfaceSite& site = sites[s];
        const InterfaceCoefficients& coef = spec.sites[std::size_t(j)][s];
        const int c = site.column;
        const int ci = c + site.inward;
        InterfaceRows r;
        r.column = c - w.first;
        r.inward = site.inward;
        r.kappa_u.assign(std::size_t(g.l), 0.0);
        r.kappa_p.assign(std::size_t(g.l), 0.0);
        if (spec.kind == TransmissionKind::Optimized) {
            // Outward-normal Robin coefficient: signed S times the outward direction.
            const double out_dir = -double(site.inward);
            for (int row = 0; row < g.l; ++row) {
                r.kappa_u[std::size_t(row)] = 1.0 / (1.0 + g.h * out_dir * coef.s_u[std::size_t(row)]);
                r.kappa_p[std::size_t(row)] = 1.0 / (1.0 + g.h * out_dir * coef.s_p[std::size_t(row)]);
            }
            r.kappa_lambda = 1.0 / (1.0 + g.h * out_dir * coef.s_lambda);
        }
        r.nb_u_outer.resize(std::size_t(n));
        r.nb_u_inner.resize(std::size_t(n));
        r.nb_p_outer.resize(std::size_t(n));
        r.nb_p_inner.resize(std::size_t(n));
        for (int k = 0; k < n; ++k) {
            const auto kk = std::size_t(k);
            for (int row = 0; row < g.l; ++row) {
                r.nb_u_outer[kk].push_back(y.u[kk](c, row));
                r.nb_u_inner[kk].push_back(y.u[kk](ci, row));
                r.nb_p_outer[kk].push_back(y.p[kk](c, row));
                r.nb_p_inner[kk].push_back(y.p[kk](ci, row));
            }
        }
        for (int row = 0; row < g.l; ++row) {
            r.nb_lambda_outer.push_back(y.lambda(c, row));
            r.nb_lambda_inner.push_back(y.lambda(ci, row));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

SsnResult solve_subdomain(const OptState& y, const ProblemData& data, const ModelParams& params,
                          const SubdomainLayout& layout, const TransmissionSpec& spec, int j, const SsnConfig& config) {
    if (j < 0 || j >= layout.m_sub) throw ConfigError("solve_subdomain: subdomain index out of range");
    const Window& w = layout.ranges[std::size_t(j)];
    return ssn_solve(restrict_state(y, w), restrict_data(data, w), params, config, interface_rows(y, layout, spec, j));
}

double merge_weight(const SubdomainLayout& layout, int j, int i) {
    const Window& w = layout.ranges[std::size_t(j)];
    if (!w.contains(i)) return 0.0;
    const double L = layout.overlap;
    if (j > 0 && i <= layout.ranges[std::size_t(j - 1)].last) return (i - w.first + 0.5) / L;
    if (j < layout.m_sub - 1 && i >= layout.ranges[std::size_t(j + 1)].first) return (w.last - i + 0.5) / L;
    return 1.0;
}

namespace {

struct Blender {
    const SubdomainLayout& lay;

    ScalarField nodes(const std::vector<const ScalarField*>& parts) const {
        const GridSpec& g = lay.grid;
        ScalarField out(g);
        for (int j = 0; j < g.l; ++j) {
            for (int i = 0; i < g.m; ++i) {
                double acc = 0.0;
                for (int s = 0; s < lay.m_sub; ++s) {
                    const double wt = merge_weight(lay, s, i);
                    if (wt > 0.0) acc += wt * (*parts[std::size_t(s)])(i - lay.ranges[std::size_t(s)].first, j);
                }
                out(i, j) = acc;
            }
        }
        return out;
    }

    VectorField edges(const std::vector<const VectorField*>& parts) const {
        const GridSpec& g = lay.grid;
        VectorField out(g);
        for (int j = 0; j < g.l; ++j) {
            for (int i = 0; i < g.m; ++i) {
                double a1 = 0.0, w1 = 0.0, a2 = 0.0;
                for (int s = 0; s < lay.m_sub; ++s) {
                    const Window& w = lay.ranges[std::size_t(s)];
                    if (!w.contains(i)) continue;
                    const VectorField& v = *parts[std::size_t(s)];
                    const int li = i - w.first;
                    if (i < g.m - 1 && w.contains(i + 1)) {
                        const double wt = 0.5 * (merge_weight(lay, s, i) + merge_weight(lay, s, i + 1));
                        a1 += wt * v.c1(li, j);
                        w1 += wt;
                    }
                    if (j < g.l - 1) a2 += merge_weight(lay, s, i) * v.c2(li, j);
                }
                if (i < g.m - 1) out.c1(i, j) = a1 / w1;
                if (j < g.l - 1) out.c2(i, j) = a2;
            }
        }
        return out;
    }
};

}  // namespace

OptState merge(const std::vector<OptState>& locals, const SubdomainLayout& layout) {
    if (int(locals.size()) != layout.m_sub) throw ShapeError("merge: expected one local state per subdomain");
    const int n = locals.front().n_train();
    for (int s = 0; s < layout.m_sub; ++s) locals[std::size_t(s)].validate(layout.local_grid(s), n);

    const Blender b{layout};
    auto scalars = [&](auto pick) {
        std::vector<const ScalarField*> parts;
        for (const auto& y : locals) parts.push_back(&pick(y));
        return b.nodes(parts);
    };
    auto vectors = [&](auto pick) {
        std::vector<const VectorField*> parts;
        for (const auto& y : locals) parts.push_back(&pick(y));
        return b.edges(parts);
    };
    OptState out;
    for (std::size_t k = 0; k < std::size_t(n); ++k) {
        out.u.push_back(scalars([k](const OptState& y) -> const ScalarField& { return y.u[k]; }));
        out.q.push_back(vectors([k](const OptState& y) -> const VectorField& { return y.q[k]; }));
        out.p.push_back(scalars([k](const OptState& y) -> const ScalarField& { return y.p[k]; }));
        out.z.push_back(vectors([k](const OptState& y) -> const VectorField& { return y.z[k]; }));
    }
    out.lambda = scalars([](const OptState& y) -> const ScalarField& { return y.lambda; });
    return out;
}

double subdomain_gap(const std::vector<OptState>& locals, const SubdomainLayout& layout) {
    if (layout.m_sub < 2) throw ConfigError("subdomain_gap: needs at least two subdomains");
    if (int(locals.size()) != layout.m_sub) throw ShapeError("subdomain_gap: expected one local state per subdomain");
    double total = 0.0;
    for (int s = 0; s + 1 < layout.m_sub; ++s) {
        const Window& a = layout.ranges[std::size_t(s)];
        const Window& b = layout.ranges[std::size_t(s + 1)];
        const ScalarField& la = locals[std::size_t(s)].lambda;
        const ScalarField& lb = locals[std::size_t(s + 1)].lambda;
        double acc = 0.0;
        for (int j = 0; j < layout.grid.l; ++j) {
            for (int i = b.first; i <= a.last; ++i) {
                const double d = la(i - a.first, j) - lb(i - b.first, j);
                acc += d * d;
            }
        }
        total += std::sqrt(acc);
    }
    return total / double(layout.m_sub - 1);
}

namespace {

struct StripOutcome {
    SsnResult result;
    double seconds = 0.0;
    std::exception_ptr error;
};

template <class F>
void run_indexed(int count, int threads, F&& body) {
    const int workers = std::max(1, std::min(threads, count));
    if (workers == 1) {
        for (int j = 0; j < count; ++j) body(j);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int j = next++; j < count; j = next++) body(j);
        });
    }
}

}  // namespace

DdResult dd_solve(const OptState& y0, const ProblemData& data, const ModelParams& params, const DdConfig& config) {
    if (config.outer_iters < 1) throw ConfigError("dd_solve: outer_iters must be >= 1");
    if (config.threads < 1) throw ConfigError("dd_solve: threads must be >= 1");
    DdResult res{y0, {}, {}, partition(data.grid(), config.m_sub, config.overlap)};
    const SubdomainLayout& lay = res.layout;

    using clock = std::chrono::steady_clock;
    if (lay.m_sub == 1) {
        const auto t0 = clock::now();
        SsnResult r = ssn_solve(y0, data, params, config.ssn);
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        res.records.push_back({1, 0, r.report, r.report.residual_history.back(), 0.0, secs});
        res.y = std::move(r.y);
        return res;
    }

    for (int outer = 1; outer <= config.outer_iters; ++outer) {
        const TransmissionSpec spec = transmission_params(res.y.lambda, params, lay, config.kind, config.mu_floor);
        std::vector<StripOutcome> out(std::size_t(lay.m_sub));
        run_indexed(lay.m_sub, config.threads, [&](int j) {
            StripOutcome& o = out[std::size_t(j)];
            const auto t0 = clock::now();
            try {
                o.result = solve_subdomain(res.y, data, params, lay, spec, j, config.ssn);
            } catch (...) {
                o.error = std::current_exception();
            }
            o.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        });
        for (int j = 0; j < lay.m_sub; ++j) {
            if (!out[std::size_t(j)].error) continue;
            try {
                std::rethrow_exception(out[std::size_t(j)].error);
            } catch (const SolverError& e) {
                throw SolverError("subdomain " + std::to_string(j) + ": " + e.what(), e.iteration(), j);
            }
        }
        std::vector<OptState> locals;
        for (auto& o : out) locals.push_back(o.result.y);
        const double gap = subdomain_gap(locals, lay);
        res.gaps.push_back(gap);
        for (int j = 0; j < lay.m_sub; ++j) {
            const SsnResult& r = out[std::size_t(j)].result;
            res.records.push_back({outer, j, r.report, r.report.residual_history.back(), gap, out[std::size_t(j)].seconds});
        }
        res.y = merge(locals, lay);
        if (config.gap_tol > 0.0 && gap <= config.gap_tol) break;
    }
    return res;
}

void write_dd_csv(std::ostream& out, const DdResult& result, bool header) {
    if (header) out << "outer_iter,subdomain,ssn_iters,residual,gap_lambda,wall_seconds\n";
    char line[256];
    for (const auto& r : result.records) {
        std::snprintf(line, sizeof line, "%d,%d,%d,%.9e,%.9e,%.6f\n", r.outer_iter, r.subdomain, r.report.iterations,
                      r.residual, r.gap_lambda, r.wall_seconds);
        out << line;
    }
}

}  // namespace tvlearn
