#pragma once

// Test-side helpers: seeded random fields, index-loop oracles written
// independently of the library, a manufactured exact solution and the
// committed synthetic instances.

#include "tvlearn/data.hpp"
#include "tvlearn/schwarz.hpp"
#include "tvlearn/ssn.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

namespace tvtest {

using namespace tvlearn;

inline double uniform(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline ScalarField random_field(const GridSpec& g, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    ScalarField v(g);
    for (auto& x : v.values()) x = uniform(rng, lo, hi);
    return v;
}

inline VectorField random_vfield(const GridSpec& g, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    VectorField v(g);
    for (auto& x : v.comp1()) x = uniform(rng, lo, hi);
    for (auto& x : v.comp2()) x = uniform(rng, lo, hi);
    return v;
}

inline OptState random_state(const GridSpec& g, int n, std::mt19937_64& rng, double scale = 1.0) {
    OptState y = OptState::zeros(g, n);
    for (int k = 0; k < n; ++k) {
        y.u[k] = random_field(g, rng, -scale, scale);
        y.q[k] = random_vfield(g, rng, -scale, scale);
        y.p[k] = random_field(g, rng, -scale, scale);
        y.z[k] = random_vfield(g, rng, -scale, scale);
    }
    y.lambda = random_field(g, rng, 0.1, 2.0);
    return y;
}

inline ProblemData random_problem(const GridSpec& g, int n, std::mt19937_64& rng) {
    ProblemData d;
    for (int k = 0; k < n; ++k) {
        d.f.push_back(random_field(g, rng, 0.0, 1.0));
        d.u_dag.push_back(random_field(g, rng, 0.0, 1.0));
    }
    return d;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("tvlearn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// ---------------------------------------------------------------- oracles

// Dense node-major arrays indexed [i][j].
using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const ScalarField& v) {
    const GridSpec& g = v.grid();
    Dense d(static_cast<std::size_t>(g.m), std::vector<double>(static_cast<std::size_t>(g.l)));
    for (int i = 0; i < g.m; ++i)
        for (int j = 0; j < g.l; ++j) d[i][j] = v.values()[std::size_t(i + j * g.m)];
    return d;
}

// Forward differences, written out per component.
inline void grad_oracle(const ScalarField& v, Dense& g1, Dense& g2) {
    const Dense d = to_dense(v);
    const int m = v.grid().m, l = v.grid().l;
    const double h = v.grid().h;
    g1.assign(std::size_t(m), std::vector<double>(std::size_t(l), 0.0));
    g2.assign(std::size_t(m), std::vector<double>(std::size_t(l), 0.0));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < l; ++j) {
            if (i + 1 < m) g1[i][j] = (d[i + 1][j] - d[i][j]) / h;
            if (j + 1 < l) g2[i][j] = (d[i][j + 1] - d[i][j]) / h;
        }
    }
}

// Neumann mirror ghost (v[-1] = v[1]) five-point Laplacian.
inline Dense lap_oracle(const ScalarField& v) {
    const Dense d = to_dense(v);
    const int m = v.grid().m, l = v.grid().l;
    const double h = v.grid().h;
    auto at = [&](int i, int j) {
        if (i < 0) i = 1;
        if (i >= m) i = m - 2;
        if (j < 0) j = 1;
        if (j >= l) j = l - 2;
        return d[i][j];
    };
    Dense out(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(l)));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < l; ++j)
            out[i][j] = (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * d[i][j]) / (h * h);
    return out;
}

// Backward differences with zero flux outside the staggered range.
inline Dense div_oracle(const VectorField& q) {
    const GridSpec& g = q.grid();
    const int m = g.m, l = g.l;
    Dense out(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(l)));
    auto c1 = [&](int i, int j) { return (i >= 0 && i < m - 1) ? q.comp1()[std::size_t(i + j * (m - 1))] : 0.0; };
    auto c2 = [&](int i, int j) { return (j >= 0 && j < l - 1) ? q.comp2()[std::size_t(i + j * m)] : 0.0; };
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < l; ++j) out[i][j] = (c1(i, j) - c1(i - 1, j) + c2(i, j) - c2(i, j - 1)) / g.h;
    return out;
}

// Huber map written from the piecewise definition.
inline std::pair<double, double> huber_oracle(double z1, double z2, double gamma) {
    const double a = 1.0 - 1.0 / (2.0 * gamma), b = 1.0 + 1.0 / (2.0 * gamma);
    const double r = std::hypot(z1, z2);
    const double s = gamma * r;
    if (s >= b) return {z1 / r, z2 / r};
    if (s <= a) return {gamma * z1, gamma * z2};
    const double p1 = (2.0 * gamma - 1.0) / (4.0 * gamma) + s / 2.0 - (gamma / 2.0) * (s - a) * (s - b) +
                      (gamma * gamma * gamma / 2.0) * (s - a) * (s - a) * (s - b) * (s - b);
    return {p1 * z1 / r, p1 * z2 / r};
}

// h'(z) xi from the radial form g(r) z: g xi + g'(r) <z, xi> z / r.
inline std::pair<double, double> huber_prime_oracle(double z1, double z2, double x1, double x2, double gamma) {
    const double a = 1.0 - 1.0 / (2.0 * gamma), b = 1.0 + 1.0 / (2.0 * gamma);
    const double r = std::hypot(z1, z2);
    const double s = gamma * r;
    if (s <= a) return {gamma * x1, gamma * x2};
    double g = 0.0, dg = 0.0;
    if (s >= b) {
        g = 1.0 / r;
        dg = -1.0 / (r * r);
    } else {
        const double p1 = (2.0 * gamma - 1.0) / (4.0 * gamma) + s / 2.0 - (gamma / 2.0) * (s - a) * (s - b) +
                          (gamma * gamma * gamma / 2.0) * (s - a) * (s - a) * (s - b) * (s - b);
        const double dp1 = 0.5 - (gamma / 2.0) * (2.0 * s - a - b) +
                           gamma * gamma * gamma * (s - a) * (s - b) * (2.0 * s - a - b);
        g = p1 / r;
        dg = gamma * dp1 / r - p1 / (r * r);
    }
    const double zx = (z1 * x1 + z2 * x2) / r;
    return {g * x1 + dg * zx * z1, g * x2 + dg * zx * z2};
}

// ---------------------------------------------------------------- manufactured solution

struct Manufactured {
    OptState y;
    ProblemData data;
    ModelParams params;
};

/// Exact discrete solution with every lambda node inactive: pick u, p and
/// lambda > 0, set q = h(Du) and z = h'(Du) Dp, then back-solve f, u_dag and
/// shape p so that rows (1), (3) and (5) vanish.
inline Manufactured manufactured(const GridSpec& g, int n, std::uint64_t seed) {
    Manufactured mf;
    mf.params.mu = 1e-3;
    mf.params.beta = 1e-2;
    mf.params.huber = HuberParams::make(4.0);
    mf.params.n_train = n;
    std::mt19937_64 rng(seed);
    mf.y = OptState::zeros(g, n);
    mf.y.lambda = random_field(g, rng, 1.0, 2.0);
    const Dense lap_l = lap_oracle(mf.y.lambda);

    // Coupling c = beta (L lambda - lambda) zeroes row (5); its max argument
    // is then -beta lambda < 0, so every node is inactive.
    for (int k = 0; k < n; ++k) {
        ScalarField u, d;
        for (;;) {
            u = random_field(g, rng, 0.0, 0.3);
            const VectorField q = h_field(gradient(u), mf.params.huber);
            const Dense lu = lap_oracle(u);
            const Dense dq = div_oracle(q);
            d = ScalarField(g);
            double dmin = 1e300;
            for (int i = 0; i < g.m; ++i) {
                for (int j = 0; j < g.l; ++j) {
                    // u - f = (mu L u + Div q) / (2 lambda)
                    d(i, j) = (mf.params.mu * lu[i][j] + dq[i][j]) / (2.0 * mf.y.lambda(i, j));
                    dmin = std::min(dmin, std::abs(d(i, j)));
                }
            }
            if (dmin > 1e-2) {
                mf.y.q[k] = q;
                break;
            }
        }
        mf.y.u[k] = u;
        ScalarField f(g), p(g);
        for (int i = 0; i < g.m; ++i) {
            for (int j = 0; j < g.l; ++j) {
                f(i, j) = u(i, j) - d(i, j);
                // Split the coupling evenly across pairs.
                p(i, j) = mf.params.beta * (lap_l[i][j] - mf.y.lambda(i, j)) / (double(n) * d(i, j));
            }
        }
        mf.y.p[k] = p;
        mf.y.z[k] = h_prime_field(gradient(u), gradient(p), mf.params.huber);
        const Dense lp = lap_oracle(p);
        const Dense dz = div_oracle(mf.y.z[k]);
        ScalarField ud(g);
        for (int i = 0; i < g.m; ++i)
            for (int j = 0; j < g.l; ++j)
                ud(i, j) = u(i, j) - (mf.params.mu * lp[i][j] + dz[i][j] - 2.0 * mf.y.lambda(i, j) * p(i, j)) / 2.0;
        mf.data.f.push_back(f);
        mf.data.u_dag.push_back(ud);
    }
    return mf;
}

// ---------------------------------------------------------------- committed instances

/// 16x16 superlinearity instance: phantom image, Gaussian noise sigma 0.05.
struct Instance {
    ProblemData data;
    ModelParams params;
    ScalarField mask;  // 1 inside the high-noise region (empty if none)
};

inline Instance instance16(double gamma = 25.0, std::uint64_t seed = 1) {
    Instance in;
    const GridSpec g{16, 16, 2.0};
    NoiseSpec ns;
    ns.base_sigma = 0.05;
    ns.seed = seed;
    const ScalarField clean = phantom(g, 0);
    in.data.u_dag.push_back(clean);
    in.data.f.push_back(add_noise(clean, ns, 0));
    in.params.mu = 1e-10;
    in.params.beta = 1e-2;
    in.params.huber = HuberParams::make(gamma);
    in.params.n_train = 1;
    return in;
}

/// 64x64 region-masked instance: base sigma 0.03 plus 0.06 on the left half.
inline Instance instance64(int pairs, double beta = 1e-3) {
    Instance in;
    const GridSpec g{64, 64, 2.0};
    NoiseSpec ns;
    ns.base_sigma = 0.03;
    ns.seed = 11;
    ns.regions.push_back({0, 0, 32, 64, 0.06});
    for (int k = 0; k < pairs; ++k) {
        const ScalarField clean = phantom(g, k);
        in.data.u_dag.push_back(clean);
        in.data.f.push_back(add_noise(clean, ns, std::uint64_t(k)));
    }
    in.params.mu = 1e-10;
    in.params.beta = beta;
    in.params.huber = HuberParams::make(25.0);
    in.params.n_train = pairs;
    in.mask = ScalarField(g);
    for (int j = 0; j < g.l; ++j)
        for (int i = 0; i < g.m; ++i) in.mask(i, j) = ns.regions[0].contains(i, j) ? 1.0 : 0.0;
    return in;
}

inline double max_abs(const OptState& r) {
    double m = 0.0;
    for (double x : r.flatten()) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace tvtest
