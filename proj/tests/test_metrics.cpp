#include "support.hpp"

#include "tvlearn/error.hpp"
#include "tvlearn/metrics.hpp"

#include <doctest.h>

#include <limits>

using namespace tvtest;

TEST_CASE("ssim") {
    const GridSpec g{24, 20, 1.0};
    ScalarField a(g), b(g);
    for (int j = 0; j < g.l; ++j) {
        for (int i = 0; i < g.m; ++i) {
            a(i, j) = 0.5 + 0.4 * std::sin(0.3 * i) * std::cos(0.2 * j);
            b(i, j) = a(i, j) + 0.1 * std::cos(0.7 * i + 0.4 * j);
        }
    }
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-14));
    // Reference value from scikit-image (gaussian_weights, sigma 1.5,
    // population covariance, data_range 1).
    CHECK(ssim(a, b) == doctest::Approx(0.8030807907381283).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));

    const GridSpec g32{32, 32, 1.0};
    ScalarField bin(g32), inv(g32);
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) {
            bin(i, j) = ((i / 4 + j / 4) % 2) ? 1.0 : 0.0;
            inv(i, j) = 1.0 - bin(i, j);
        }
    CHECK(ssim(bin, inv) < 0.1);

    const ScalarField clean = phantom(GridSpec{48, 48, 1.0}, 1);
    double prev = 1.0;
    for (double sigma : {0.01, 0.05, 0.1}) {
        NoiseSpec ns;
        ns.base_sigma = sigma;
        ns.seed = 3;
        const double s = ssim(add_noise(clean, ns), clean);
        CHECK(s < prev);
        prev = s;
    }
    CHECK_THROWS_AS(ssim(a, ScalarField(GridSpec{20, 24, 1.0})), ShapeError);
    // Small grids use the largest odd window that fits.
    const GridSpec g5{5, 6, 1.0};
    CHECK(ssim(ScalarField(g5, 0.3), ScalarField(g5, 0.3)) == doctest::Approx(1.0));
}

TEST_CASE("psnr and field error") {
    std::mt19937_64 rng(12);
    const GridSpec g{9, 7, 1.0};
    const ScalarField a = random_field(g, rng, 0.0, 1.0);
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
    ScalarField off = a;
    for (auto& x : off.values()) x += 0.1;
    CHECK(psnr(a, off) == doctest::Approx(20.0).epsilon(1e-12));
    const ScalarField b = random_field(g, rng, 0.0, 1.0);
    double se = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) se += (a[n] - b[n]) * (a[n] - b[n]);
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(double(a.size()) / se)));
    CHECK(field_error(a, b) == doctest::Approx(std::sqrt(se)));
    CHECK(field_error(a, a) == 0.0);
    ScalarField e(g);
    e(3, 2) = 1.0;
    CHECK(field_error(e, ScalarField(g)) == 1.0);
}

TEST_CASE("restricted residual metric") {
    const Manufactured mf = manufactured(GridSpec{20, 6, 1.0}, 1, 9);
    const SubdomainLayout two = partition(mf.y.grid(), 2, 6);
    CHECK(ssnr_metric(mf.y, mf.data, mf.params, two) <= 1e-9);

    std::mt19937_64 rng(5);
    const OptState y = random_state(mf.y.grid(), 1, rng);
    const SubdomainLayout one = partition(mf.y.grid(), 1, 6);
    CHECK(ssnr_metric(y, mf.data, mf.params, one) == doctest::Approx(norm(residual(y, mf.data, mf.params))));

    // Per-strip sums computed directly from the global residual.
    const OptState r = residual(y, mf.data, mf.params);
    const GridSpec& g = y.grid();
    double expected = 0.0;
    for (const Window& w : two.ranges) {
        double acc = 0.0;
        for (int j = 0; j < g.l; ++j) {
            for (int i = w.first; i <= w.last; ++i) {
                acc += r.u[0](i, j) * r.u[0](i, j) + r.p[0](i, j) * r.p[0](i, j) + r.lambda(i, j) * r.lambda(i, j);
                if (i < w.last) acc += r.q[0].c1(i, j) * r.q[0].c1(i, j) + r.z[0].c1(i, j) * r.z[0].c1(i, j);
                if (j < g.l - 1) acc += r.q[0].c2(i, j) * r.q[0].c2(i, j) + r.z[0].c2(i, j) * r.z[0].c2(i, j);
            }
        }
        expected += std::sqrt(acc);
    }
    CHECK(ssnr_metric(y, mf.data, mf.params, two) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ssnr_metric(y, mf.data, mf.params, two) >= norm(r));
}

TEST_CASE("total variation") {
    const GridSpec g{5, 4, 1.0};
    ScalarField ramp(g);
    for (int j = 0; j < g.l; ++j)
        for (int i = 0; i < g.m; ++i) ramp(i, j) = 0.5 * i;
    // Four edges per row along the first axis, each of length 0.5.
    CHECK(total_variation(ramp) == doctest::Approx(0.5 * 4 * 4));
    CHECK(total_variation(ScalarField(g, 2.0)) == 0.0);
}
