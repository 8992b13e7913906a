#pragma once

// Node-centred image grid with staggered gradient components.
//
// Index convention: node (i, j), 0 <= i < m, 0 <= j < l, is stored at
// i + j * m. The first gradient component lives on (m-1) x l edges stored at
// i + j * (m-1); the second on m x (l-1) edges stored at i + j * m.

#include <Eigen/SparseCore>

#include <cstddef>
#include <span>
#include <vector>

namespace tvlearn {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct GridSpec {
    int m = 3;
    int l = 3;
    double h = 1.0;

    /// Throws ConfigError unless m >= 3, l >= 3 and h > 0.
    void validate() const;

    std::size_t nodes() const { return std::size_t(m) * std::size_t(l); }
    std::size_t edges1() const { return std::size_t(m - 1) * std::size_t(l); }
    std::size_t edges2() const { return std::size_t(m) * std::size_t(l - 1); }
    std::size_t edges() const { return edges1() + edges2(); }

    std::size_t node(int i, int j) const { return std::size_t(i) + std::size_t(j) * std::size_t(m); }
    std::size_t edge1(int i, int j) const { return std::size_t(i) + std::size_t(j) * std::size_t(m - 1); }
    std::size_t edge2(int i, int j) const { return std::size_t(i) + std::size_t(j) * std::size_t(m); }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

enum class BoundaryKind { NeumannReflect, DirichletZero };

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const GridSpec& grid, double value = 0.0);
    ScalarField(const GridSpec& grid, std::vector<double> values);

    const GridSpec& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(int i, int j) { return values_[grid_.node(i, j)]; }
    double operator()(int i, int j) const { return values_[grid_.node(i, j)]; }
    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(double s);

    double min() const;
    double max() const;
    double mean() const;
    bool all_finite() const;

private:
    GridSpec grid_{};
    std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const GridSpec& grid, double value = 0.0);

    const GridSpec& grid() const { return grid_; }

    double& c1(int i, int j) { return comp1_[grid_.edge1(i, j)]; }
    double c1(int i, int j) const { return comp1_[grid_.edge1(i, j)]; }
    double& c2(int i, int j) { return comp2_[grid_.edge2(i, j)]; }
    double c2(int i, int j) const { return comp2_[grid_.edge2(i, j)]; }

    std::span<double> comp1() { return comp1_; }
    std::span<const double> comp1() const { return comp1_; }
    std::span<double> comp2() { return comp2_; }
    std::span<const double> comp2() const { return comp2_; }

    /// Components collocated at node (i, j); missing staggered entries read as 0.
    double at1(int i, int j) const { return i < grid_.m - 1 ? c1(i, j) : 0.0; }
    double at2(int i, int j) const { return j < grid_.l - 1 ? c2(i, j) : 0.0; }

    VectorField& operator+=(const VectorField& o);
    VectorField& operator-=(const VectorField& o);
    VectorField& operator*=(double s);

    bool all_finite() const;

private:
    GridSpec grid_{};
    std::vector<double> comp1_;
    std::vector<double> comp2_;
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);

/// Forward differences onto the staggered edges.
VectorField gradient(const ScalarField& v);

/// Backward differences; absent staggered entries act as zero flux. Exactly
/// the negative adjoint of gradient().
ScalarField divergence(const VectorField& q);

/// Five-point Laplacian with ghost values from `bc`.
ScalarField laplacian(const ScalarField& v, BoundaryKind bc = BoundaryKind::NeumannReflect);

double inner(const ScalarField& a, const ScalarField& b);
double inner(const VectorField& a, const VectorField& b);
double norm(const ScalarField& a);
double norm(const VectorField& a);

// Sparse matrix forms, used by the Newton assembly. The gradient matrix maps
// node values to the stacked [comp1; comp2] edge vector.
SparseMatrix gradient_matrix(const GridSpec& grid);
SparseMatrix laplacian_matrix(const GridSpec& grid, BoundaryKind bc = BoundaryKind::NeumannReflect);

}  // namespace tvlearn
