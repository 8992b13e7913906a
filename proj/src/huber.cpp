#include "tvlearn/huber.hpp"

#include "tvlearn/error.hpp"

#include <cmath>
#include <vector>

namespace tvlearn {

HuberParams HuberParams::make(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("huber gamma must be positive");
    return HuberParams{gamma, 1.0 - 1.0 / (2.0 * gamma), 1.0 + 1.0 / (2.0 * gamma)};
}

const char* to_string(Region r) {
    switch (r) {
        case Region::A: return "A";
        case Region::S: return "S";
        case Region::I: return "I";
    }
    return "?";
}

Region classify(const Vec2& z, const HuberParams& hp) {
    const double s = hp.gamma * z.norm();
    if (s >= hp.b) return Region::A;
    if (s <= hp.a) return Region::I;
    return Region::S;
}

namespace {

// Transition profile P1 as a function of s = gamma |z| and its s-derivatives.
struct Profile {
    double p, dp, ddp;
};

Profile transition(double s, const HuberParams& hp) {
    const double g = hp.gamma;
    const double ta = s - hp.a;
    const double tb = s - hp.b;
    const double sum = ta + tb;
    const double g3 = g * g * g;
    Profile out;
    out.p = (2.0 * g - 1.0) / (4.0 * g) + 0.5 * s - 0.5 * g * ta * tb + 0.5 * g3 * ta * ta * tb * tb;
    out.dp = 0.5 - 0.5 * g * sum + g3 * ta * tb * sum;
    out.ddp = -g + g3 * (sum * sum + 2.0 * ta * tb);
    return out;
}

// g(r) and its first two r-derivatives for h(z) = g(r) z.
struct Radial {
    double g, dg, ddg;
};

Radial radial(double r, Region region, const HuberParams& hp) {
    switch (region) {
        case Region::I: return {hp.gamma, 0.0, 0.0};
        case Region::A: return {1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r)};
        case Region::S: break;
    }
    const Profile pr = transition(hp.gamma * r, hp);
    const double p = pr.p;
    const double dp = hp.gamma * pr.dp;
    const double ddp = hp.gamma * hp.gamma * pr.ddp;
    const double r2 = r * r;
    return {p / r, (dp * r - p) / r2, (ddp * r2 - 2.0 * dp * r + 2.0 * p) / (r2 * r)};
}

}  // namespace

Vec2 h_value(const Vec2& z, const HuberParams& hp) {
    const Region region = classify(z, hp);
    if (region == Region::I) return hp.gamma * z;
    return radial(z.norm(), region, hp).g * z;
}

Mat2 h_prime_matrix(const Vec2& z, const HuberParams& hp) {
    const Region region = classify(z, hp);
    if (region == Region::I) return hp.gamma * Mat2::Identity();
    const double r = z.norm();
    const Radial rad = radial(r, region, hp);
    return rad.g * Mat2::Identity() + (rad.dg / r) * z * z.transpose();
}

Vec2 h_prime_apply(const Vec2& z, const Vec2& xi, const HuberParams& hp) { return h_prime_matrix(z, hp) * xi; }

Mat2 h_second_matrix(const Vec2& z, const Vec2& xi, const HuberParams& hp) {
    const Region region = classify(z, hp);
    if (region == Region::I) return Mat2::Zero();
    const double r = z.norm();
    const Radial rad = radial(r, region, hp);
    const Vec2 e = z / r;
    const double ex = e.dot(xi);
    // h''[xi, tau] = g' (<e,tau> xi + <e,xi> tau + <xi,tau> e) + (r g'' - g') <e,xi><e,tau> e
    Mat2 m = rad.dg * (xi * e.transpose() + ex * Mat2::Identity() + e * xi.transpose());
    m += (r * rad.ddg - rad.dg) * ex * e * e.transpose();
    return m;
}

Vec2 h_second_apply(const Vec2& z, const Vec2& xi, const Vec2& tau, const HuberParams& hp) {
    return h_second_matrix(z, xi, hp) * tau;
}

PWeights p_weights(const Vec2& z, const HuberParams& hp) {
    const Region region = classify(z, hp);
    if (region == Region::I) throw ConfigError("p_weights: argument lies in the inactive region");
    if (region == Region::A) return {1.0, 0.0};
    const Profile pr = transition(hp.gamma * z.norm(), hp);
    return {pr.p, hp.gamma * pr.dp};
}

Mat2 h_prime_projected_matrix(const Vec2& z, const Vec2& q, const HuberParams& hp) {
    const Region region = classify(z, hp);
    if (region == Region::I) return hp.gamma * Mat2::Identity();
    const double r = z.norm();
    const Vec2 qp = q / std::max(1.0, q.norm());
    if (region == Region::A) return Mat2::Identity() / r - qp * z.transpose() / (r * r);
    const PWeights w = p_weights(z, hp);
    return (z.dot(qp) / (r * r)) * Mat2::Identity() + ((w.p2 / w.p1 - 1.0 / r) / r) * qp * z.transpose();
}

Vec2 h_prime_projected_apply(const Vec2& z, const Vec2& q, const Vec2& xi, const HuberParams& hp) {
    return h_prime_projected_matrix(z, q, hp) * xi;
}

// Field-level wrappers

namespace {

Vec2 node_vec(const VectorField& v, int i, int j) { return {v.at1(i, j), v.at2(i, j)}; }

void store(VectorField& out, int i, int j, const Vec2& val) {
    const GridSpec& g = out.grid();
    if (i < g.m - 1) out.c1(i, j) = val[0];
    if (j < g.l - 1) out.c2(i, j) = val[1];
}

template <class F>
VectorField map_nodes(const GridSpec& g, F&& f) {
    VectorField out(g);
    for (int j = 0; j < g.l; ++j)
        for (int i = 0; i < g.m; ++i) store(out, i, j, f(i, j));
    return out;
}

template <class F>
SparseMatrix block_matrix(const GridSpec& g, F&& mat_at) {
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(4 * g.nodes());
    const int off2 = int(g.edges1());
    for (int j = 0; j < g.l; ++j) {
        for (int i = 0; i < g.m; ++i) {
            const int idx[2] = {i < g.m - 1 ? int(g.edge1(i, j)) : -1, j < g.l - 1 ? off2 + int(g.edge2(i, j)) : -1};
            if (idx[0] < 0 && idx[1] < 0) continue;
            const Mat2 m = mat_at(i, j);
            for (int a = 0; a < 2; ++a) {
                if (idx[a] < 0) continue;
                for (int b = 0; b < 2; ++b) {
                    if (idx[b] < 0 || m(a, b) == 0.0) continue;
                    t.emplace_back(idx[a], idx[b], m(a, b));
                }
            }
        }
    }
    SparseMatrix out(int(g.edges()), int(g.edges()));
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

}  // namespace

VectorField h_field(const VectorField& du, const HuberParams& hp) {
    return map_nodes(du.grid(), [&](int i, int j) { return h_value(node_vec(du, i, j), hp); });
}

VectorField h_prime_field(const VectorField& du, const VectorField& xi, const HuberParams& hp) {
    return map_nodes(du.grid(),
                     [&](int i, int j) { return h_prime_apply(node_vec(du, i, j), node_vec(xi, i, j), hp); });
}

VectorField h_second_field(const VectorField& du, const VectorField& xi, const VectorField& tau,
                           const HuberParams& hp) {
    return map_nodes(du.grid(), [&](int i, int j) {
        return h_second_apply(node_vec(du, i, j), node_vec(xi, i, j), node_vec(tau, i, j), hp);
    });
}

VectorField h_prime_projected_field(const VectorField& du, const VectorField& q, const VectorField& xi,
                                    const HuberParams& hp) {
    return map_nodes(du.grid(), [&](int i, int j) {
        return h_prime_projected_apply(node_vec(du, i, j), node_vec(q, i, j), node_vec(xi, i, j), hp);
    });
}

SparseMatrix h_prime_block(const VectorField& du, const HuberParams& hp) {
    return block_matrix(du.grid(), [&](int i, int j) { return h_prime_matrix(node_vec(du, i, j), hp); });
}

SparseMatrix h_prime_projected_block(const VectorField& du, const VectorField& q, const HuberParams& hp) {
    return block_matrix(du.grid(), [&](int i, int j) {
        return h_prime_projected_matrix(node_vec(du, i, j), node_vec(q, i, j), hp);
    });
}

SparseMatrix h_second_block(const VectorField& du, const VectorField& xi, const HuberParams& hp) {
    return block_matrix(du.grid(), [&](int i, int j) {
        return h_second_matrix(node_vec(du, i, j), node_vec(xi, i, j), hp);
    });
}

}  // namespace tvlearn
