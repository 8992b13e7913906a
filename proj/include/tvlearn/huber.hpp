#pragma once

// C^2 Huber-type smoothing of the TV subgradient z/|z| and its derivatives.
//
// Every branch has the radial form h(z) = g(|z|) z, with
//   A (gamma|z| >= b):     g = 1/|z|
//   S (a < gamma|z| < b):  g = P1(|z|)/|z|, P1 the quartic transition profile
//   I (gamma|z| <= a):     g = gamma
// and a = 1 - 1/(2 gamma), b = 1 + 1/(2 gamma).

#include "tvlearn/grid.hpp"

#include <Eigen/Core>

namespace tvlearn {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct HuberParams {
    double gamma = 1.0;
    double a = 0.5;
    double b = 1.5;

    /// Builds (gamma, a, b); throws ConfigError unless gamma > 0.
    static HuberParams make(double gamma);
};

enum class Region { A, S, I };

const char* to_string(Region r);

Region classify(const Vec2& z, const HuberParams& hp);

Vec2 h_value(const Vec2& z, const HuberParams& hp);

/// h'(z) xi.
Vec2 h_prime_apply(const Vec2& z, const Vec2& xi, const HuberParams& hp);
Mat2 h_prime_matrix(const Vec2& z, const HuberParams& hp);

/// h''(z)[xi, tau], symmetric in (xi, tau).
Vec2 h_second_apply(const Vec2& z, const Vec2& xi, const Vec2& tau, const HuberParams& hp);
/// Matrix M with M tau = h''(z)[xi, tau].
Mat2 h_second_matrix(const Vec2& z, const Vec2& xi, const HuberParams& hp);

struct PWeights {
    double p1;  // |h(z)| on S and A
    double p2;  // d p1 / d|z|
};

/// Transition weights; throws ConfigError for z in region I.
PWeights p_weights(const Vec2& z, const HuberParams& hp);

/// Derivative with the radial direction replaced by the feasible projection
/// q / max(1, |q|) of the current dual iterate. Equals h'(z) on I.
Vec2 h_prime_projected_apply(const Vec2& z, const Vec2& q, const Vec2& xi, const HuberParams& hp);
Mat2 h_prime_projected_matrix(const Vec2& z, const Vec2& q, const HuberParams& hp);

// Field-level maps. The two staggered components sharing index (i, j) form
// the 2-vector at node (i, j); missing components are zero and stay zero.

VectorField h_field(const VectorField& du, const HuberParams& hp);
VectorField h_prime_field(const VectorField& du, const VectorField& xi, const HuberParams& hp);
VectorField h_second_field(const VectorField& du, const VectorField& xi, const VectorField& tau,
                           const HuberParams& hp);
VectorField h_prime_projected_field(const VectorField& du, const VectorField& q, const VectorField& xi,
                                    const HuberParams& hp);

/// Edge-space block matrices (rows/cols follow gradient_matrix's edge order).
SparseMatrix h_prime_block(const VectorField& du, const HuberParams& hp);
SparseMatrix h_prime_projected_block(const VectorField& du, const VectorField& q, const HuberParams& hp);
/// K with K tau = h''(du)[xi, tau] nodewise.
SparseMatrix h_second_block(const VectorField& du, const VectorField& xi, const HuberParams& hp);

}  // namespace tvlearn
