#include "tvlearn/metrics.hpp"

#include "tvlearn/error.hpp"

#include <cmath>
#include <vector>

namespace tvlearn {

namespace {

void same_shape(const ScalarField& a, const ScalarField& b, const char* who) {
    if (!(a.grid().m == b.grid().m && a.grid().l == b.grid().l)) {
        throw ShapeError(std::string(who) + ": shape mismatch");
    }
}

}  // namespace

double ssim(const ScalarField& a, const ScalarField& b) {
    same_shape(a, b, "ssim");
    const int m = a.grid().m, l = a.grid().l;
    int win = std::min({11, m, l});
    if (win % 2 == 0) --win;
    const int r = win / 2;
    const double sigma = 1.5;
    std::vector<double> k(static_cast<std::size_t>(win));
    double ks = 0.0;
    for (int t = 0; t < win; ++t) {
        k[std::size_t(t)] = std::exp(-double((t - r) * (t - r)) / (2.0 * sigma * sigma));
        ks += k[std::size_t(t)];
    }
    for (double& v : k) v /= ks;

    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double acc = 0.0;
    long count = 0;
    for (int j = r; j < l - r; ++j) {
        for (int i = r; i < m - r; ++i) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dj = -r; dj <= r; ++dj) {
                for (int di = -r; di <= r; ++di) {
                    const double w = k[std::size_t(di + r)] * k[std::size_t(dj + r)];
                    const double x = a(i + di, j + dj), y = b(i + di, j + dj);
                    ma += w * x;
                    mb += w * y;
                    saa += w * x * x;
                    sbb += w * y * y;
                    sab += w * x * y;
                }
            }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return acc / double(count);
}

double psnr(const ScalarField& a, const ScalarField& b) {
    same_shape(a, b, "psnr");
    double se = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) se += (a[n] - b[n]) * (a[n] - b[n]);
    if (se == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(double(a.size()) / se);
}

double field_error(const ScalarField& a, const ScalarField& b) {
    same_shape(a, b, "field_error");
    double se = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) se += (a[n] - b[n]) * (a[n] - b[n]);
    return std::sqrt(se);
}

double ssnr_metric(const OptState& y, const ProblemData& data, const ModelParams& params,
                   const SubdomainLayout& layout) {
    const OptState r = residual(y, data, params);
    const GridSpec& g = y.grid();
    if (!(layout.grid == g)) throw ShapeError("ssnr_metric: layout grid differs from the state grid");
    double total = 0.0;
    for (const Window& w : layout.ranges) {
        double acc = 0.0;
        auto node_sq = [&](const ScalarField& f) {
            for (int j = 0; j < g.l; ++j)
                for (int i = w.first; i <= w.last; ++i) acc += f(i, j) * f(i, j);
        };
        auto edge_sq = [&](const VectorField& v) {
            for (int j = 0; j < g.l; ++j) {
                for (int i = w.first; i <= w.last; ++i) {
                    if (i < w.last) acc += v.c1(i, j) * v.c1(i, j);
                    if (j < g.l - 1) acc += v.c2(i, j) * v.c2(i, j);
                }
            }
        };
        for (int k = 0; k < r.n_train(); ++k) {
            node_sq(r.u[std::size_t(k)]);
            edge_sq(r.q[std::size_t(k)]);
            node_sq(r.p[std::size_t(k)]);
            edge_sq(r.z[std::size_t(k)]);
        }
        node_sq(r.lambda);
        total += std::sqrt(acc);
    }
    return total;
}

double total_variation(const ScalarField& u) {
    const VectorField du = gradient(u);
    const GridSpec& g = u.grid();
    double tv = 0.0;
    for (int j = 0; j < g.l; ++j)
        for (int i = 0; i < g.m; ++i) tv += std::hypot(du.at1(i, j), du.at2(i, j));
    return tv;
}

}  // namespace tvlearn
