#include "tvlearn/grid.hpp"

#include "tvlearn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace tvlearn {

void GridSpec::validate() const {
    if (m < 3 || l < 3) {
        throw ConfigError("grid must be at least 3x3, got " + std::to_string(m) + "x" + std::to_string(l));
    }
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw ConfigError("mesh step h must be positive and finite");
    }
}

namespace {

void require_same(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!(a == b)) {
        auto desc = [](const GridSpec& g) {
            std::ostringstream s;
            s << g.m << "x" << g.l << " h=" << g.h;
            return s.str();
        };
        throw ShapeError(std::string(what) + ": grid mismatch (" + desc(a) + " vs " + desc(b) + ")");
    }
}

}  // namespace

// ScalarField

ScalarField::ScalarField(const GridSpec& grid, double value) : grid_(grid), values_(grid.nodes(), value) {
    grid_.validate();
}

ScalarField::ScalarField(const GridSpec& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.nodes()) {
        throw ShapeError("ScalarField: expected " + std::to_string(grid_.nodes()) + " values, got " +
                         std::to_string(values_.size()));
    }
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    require_same(grid_, o.grid_, "ScalarField +=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
    require_same(grid_, o.grid_, "ScalarField -=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
}

ScalarField& ScalarField::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double ScalarField::mean() const {
    return std::accumulate(values_.begin(), values_.end(), 0.0) / double(values_.size());
}
bool ScalarField::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

// VectorField

VectorField::VectorField(const GridSpec& grid, double value)
    : grid_(grid), comp1_(grid.edges1(), value), comp2_(grid.edges2(), value) {
    grid_.validate();
}

VectorField& VectorField::operator+=(const VectorField& o) {
    require_same(grid_, o.grid_, "VectorField +=");
    for (std::size_t k = 0; k < comp1_.size(); ++k) comp1_[k] += o.comp1_[k];
    for (std::size_t k = 0; k < comp2_.size(); ++k) comp2_[k] += o.comp2_[k];
    return *this;
}

VectorField& VectorField::operator-=(const VectorField& o) {
    require_same(grid_, o.grid_, "VectorField -=");
    for (std::size_t k = 0; k < comp1_.size(); ++k) comp1_[k] -= o.comp1_[k];
    for (std::size_t k = 0; k < comp2_.size(); ++k) comp2_[k] -= o.comp2_[k];
    return *this;
}

VectorField& VectorField::operator*=(double s) {
    for (double& v : comp1_) v *= s;
    for (double& v : comp2_) v *= s;
    return *this;
}

bool VectorField::all_finite() const {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(comp1_.begin(), comp1_.end(), finite) && std::all_of(comp2_.begin(), comp2_.end(), finite);
}

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }

// Operators

VectorField gradient(const ScalarField& v) {
    const GridSpec& g = v.grid();
    VectorField out(g);
    const double inv_h = 1.0 / g.h;
    for (int j = 0; j < g.l; ++j)
        for (int i = 0; i + 1 < g.m; ++i) out.c1(i, j) = (v(i + 1, j) - v(i, j)) * inv_h;
    for (int j = 0; j + 1 < g.l; ++j)
        for (int i = 0; i < g.m; ++i) out.c2(i, j) = (v(i, j + 1) - v(i, j)) * inv_h;
    return out;
}

ScalarField divergence(const VectorField& q) {
    const GridSpec& g = q.grid();
    ScalarField out(g);
    const double inv_h = 1.0 / g.h;
    for (int j = 0; j < g.l; ++j) {
        for (int i = 0; i < g.m; ++i) {
            const double e1 = (i < g.m - 1 ? q.c1(i, j) : 0.0) - (i > 0 ? q.c1(i - 1, j) : 0.0);
            const double e2 = (j < g.l - 1 ? q.c2(i, j) : 0.0) - (j > 0 ? q.c2(i, j - 1) : 0.0);
            out(i, j) = (e1 + e2) * inv_h;
        }
    }
    return out;
}

namespace {

// Ghost-node lookup: mirror about the boundary node, or zero.
struct Stencil {
    const ScalarField& v;
    BoundaryKind bc;

    double at(int i, int j) const {
        const GridSpec& g = v.grid();
        if (bc == BoundaryKind::DirichletZero && (i < 0 || i >= g.m || j < 0 || j >= g.l)) return 0.0;
        if (i < 0) i = -i;
        if (i >= g.m) i = 2 * (g.m - 1) - i;
        if (j < 0) j = -j;
        if (j >= g.l) j = 2 * (g.l - 1) - j;
        return v(i, j);
    }
};

}  // namespace

ScalarField laplacian(const ScalarField& v, BoundaryKind bc) {
    const GridSpec& g = v.grid();
    ScalarField out(g);
    const double inv_h2 = 1.0 / (g.h * g.h);
    const Stencil s{v, bc};
    for (int j = 0; j < g.l; ++j) {
        for (int i = 0; i < g.m; ++i) {
            out(i, j) = (s.at(i - 1, j) + s.at(i + 1, j) + s.at(i, j - 1) + s.at(i, j + 1) - 4.0 * v(i, j)) * inv_h2;
        }
    }
    return out;
}

double inner(const ScalarField& a, const ScalarField& b) {
    require_same(a.grid(), b.grid(), "inner");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double inner(const VectorField& a, const VectorField& b) {
    require_same(a.grid(), b.grid(), "inner");
    double s = 0.0;
    for (std::size_t k = 0; k < a.comp1().size(); ++k) s += a.comp1()[k] * b.comp1()[k];
    for (std::size_t k = 0; k < a.comp2().size(); ++k) s += a.comp2()[k] * b.comp2()[k];
    return s;
}

double norm(const ScalarField& a) { return std::sqrt(inner(a, a)); }
double norm(const VectorField& a) { return std::sqrt(inner(a, a)); }

SparseMatrix gradient_matrix(const GridSpec& g) {
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(4 * g.edges());
    const double inv_h = 1.0 / g.h;
    const int off2 = int(g.edges1());
    for (int j = 0; j < g.l; ++j) {
        for (int i = 0; i + 1 < g.m; ++i) {
            const int r = int(g.edge1(i, j));
            t.emplace_back(r, int(g.node(i + 1, j)), inv_h);
            t.emplace_back(r, int(g.node(i, j)), -inv_h);
        }
    }
    for (int j = 0; j + 1 < g.l; ++j) {
        for (int i = 0; i < g.m; ++i) {
            const int r = off2 + int(g.edge2(i, j));
            t.emplace_back(r, int(g.node(i, j + 1)), inv_h);
            t.emplace_back(r, int(g.node(i, j)), -inv_h);
        }
    }
    SparseMatrix d(int(g.edges()), int(g.nodes()));
    d.setFromTriplets(t.begin(), t.end());
    return d;
}

SparseMatrix laplacian_matrix(const GridSpec& g, BoundaryKind bc) {
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(5 * g.nodes());
    const double inv_h2 = 1.0 / (g.h * g.h);
    auto add = [&](int row, int i, int j) {
        if (bc == BoundaryKind::DirichletZero && (i < 0 || i >= g.m || j < 0 || j >= g.l)) return;
        if (i < 0) i = -i;
        if (i >= g.m) i = 2 * (g.m - 1) - i;
        if (j < 0) j = -j;
        if (j >= g.l) j = 2 * (g.l - 1) - j;
        t.emplace_back(row, int(g.node(i, j)), inv_h2);
    };
    for (int j = 0; j < g.l; ++j) {
        for (int i = 0; i < g.m; ++i) {
            const int r = int(g.node(i, j));
            add(r, i - 1, j);
            add(r, i + 1, j);
            add(r, i, j - 1);
            add(r, i, j + 1);
            t.emplace_back(r, r, -4.0 * inv_h2);
        }
    }
    SparseMatrix lap(int(g.nodes()), int(g.nodes()));
    lap.setFromTriplets(t.begin(), t.end());
    return lap;
}

}  // namespace tvlearn
