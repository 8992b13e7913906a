#include "support.hpp"

#include "tvlearn/error.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>

using namespace tvtest;

namespace {

std::vector<unsigned char> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<unsigned char> read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

// 3x3 RGB PNG written by an external encoder.
const std::vector<unsigned char> kRgbPng = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52,
    0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x03, 0x08, 0x02, 0x00, 0x00, 0x00, 0xd9, 0x4a, 0x22,
    0xe8, 0x00, 0x00, 0x00, 0x17, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xe4, 0x3a, 0x21, 0xc7,
    0xc0, 0xc0, 0xc0, 0xc0, 0xc0, 0xc0, 0xc4, 0x00, 0x03, 0x08, 0x16, 0x00, 0x1a, 0xa4, 0x00, 0xf6,
    0x8a, 0x4d, 0x5b, 0x02, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

}  // namespace

TEST_CASE("PGM codec") {
    std::vector<unsigned char> b = bytes_of("P5\n3 3\n255\n");
    const std::vector<unsigned char> px = {0, 128, 255, 64, 1, 2, 3, 4, 5};
    b.insert(b.end(), px.begin(), px.end());
    const ScalarField v = decode_pgm(b);
    CHECK(v.grid().m == 3);
    CHECK(v.grid().l == 3);
    CHECK(v(0, 0) == 0.0);
    CHECK(v(1, 0) == 128.0 / 255.0);
    CHECK(v(2, 0) == 1.0);
    CHECK(v(0, 1) == 64.0 / 255.0);
    CHECK(encode_pgm(v) == b);

    std::vector<unsigned char> c = bytes_of("P5 # comment\n3\n3 255\n");
    c.insert(c.end(), px.begin(), px.end());
    CHECK(norm(decode_pgm(c) - v) == 0.0);

    std::vector<unsigned char> wide = bytes_of("P5\n3 3\n65535\n");
    wide.resize(wide.size() + 18, 0);
    CHECK_THROWS_AS(decode_pgm(wide), IoError);
    CHECK_THROWS_AS(decode_pgm(bytes_of("P2\n3 3\n255\n")), IoError);
    std::vector<unsigned char> trunc = bytes_of("P5\n3 3\n255\n");
    trunc.push_back(7);
    CHECK_THROWS_AS(decode_pgm(trunc), IoError);
    try {
        decode_pgm(trunc);
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }

    // Quantization rounds half to even and clamps.
    ScalarField q(GridSpec{3, 3, 1.0});
    q[0] = 0.5;    // 127.5 -> 128
    q[1] = -0.2;   // -> 0
    q[2] = 1.7;    // -> 255
    q[3] = 1.5 / 255.0;  // -> 2
    const auto enc = encode_pgm(q);
    const std::size_t off = enc.size() - 9;
    CHECK(enc[off] == 128);
    CHECK(enc[off + 1] == 0);
    CHECK(enc[off + 2] == 255);
    CHECK(enc[off + 3] == 2);
}

TEST_CASE("image files") {
    TempDir dir("img");
    std::mt19937_64 rng(1);
    ScalarField v = random_field(GridSpec{7, 5, 1.0}, rng, 0.0, 1.0);
    for (auto& x : v.values()) x = std::nearbyint(x * 255.0) / 255.0;
    for (const char* name : {"a.pgm", "a.png", "A.PNG"}) {
        save_image(v, dir / name);
        const ScalarField back = load_image(dir / name, 0.5);
        CHECK(back.grid() == GridSpec{7, 5, 0.5});
        CHECK(norm(back - ScalarField(back.grid(), std::vector<double>(v.values().begin(), v.values().end()))) == 0.0);
    }
    save_image(v, dir / "b.pgm");
    const auto first = read_file(dir / "b.pgm");
    save_image(load_image(dir / "b.pgm"), dir / "c.pgm");
    CHECK(read_file(dir / "c.pgm") == first);

    write_file(dir / "rgb.png", kRgbPng);
    CHECK_THROWS_AS(load_image(dir / "rgb.png"), IoError);
    CHECK_THROWS_AS(load_image(dir / "missing.pgm"), IoError);
    CHECK_THROWS_AS(load_image(dir / "x.bmp"), IoError);
    CHECK_THROWS_AS(save_image(v, dir / "x.tif"), IoError);
}

TEST_CASE("noise synthesis") {
    const GridSpec g{256, 256, 1.0};
    const ScalarField flat(g, 0.5);
    NoiseSpec none;
    CHECK(norm(add_noise(flat, none) - flat) == 0.0);

    NoiseSpec ns;
    ns.base_sigma = 0.05;
    ns.seed = 42;
    const ScalarField n1 = add_noise(flat, ns);
    double mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k < n1.size(); ++k) mean += n1[k] - 0.5;
    mean /= double(n1.size());
    for (std::size_t k = 0; k < n1.size(); ++k) var += (n1[k] - 0.5 - mean) * (n1[k] - 0.5 - mean);
    var /= double(n1.size() - 1);
    CHECK(std::abs(var - 0.0025) <= 0.05 * 0.0025);
    CHECK(std::abs(mean) < 1e-3);

    CHECK(add_noise(flat, ns).values()[123] == n1.values()[123]);
    CHECK(norm(add_noise(flat, ns) - n1) == 0.0);
    CHECK(norm(add_noise(flat, ns, 1) - n1) > 0.0);
    NoiseSpec other = ns;
    other.seed = 43;
    CHECK(norm(add_noise(flat, other) - n1) > 0.0);

    // Extra region noise raises the local variance to base^2 + region^2.
    NoiseSpec reg = ns;
    reg.regions.push_back({0, 0, 128, 256, 0.1});
    const ScalarField n2 = add_noise(flat, reg);
    double vin = 0.0, vout = 0.0;
    int cin = 0, cout = 0;
    for (int j = 0; j < 256; ++j)
        for (int i = 0; i < 256; ++i) {
            const double d = n2(i, j) - 0.5;
            if (i < 128) vin += d * d, ++cin;
            else vout += d * d, ++cout;
        }
    vin /= cin;
    vout /= cout;
    CHECK(std::abs(vin - 0.0125) <= 0.05 * 0.0125);
    CHECK(std::abs(vout - 0.0025) <= 0.05 * 0.0025);

    // Outputs stay in [0, 1].
    NoiseSpec loud;
    loud.base_sigma = 2.0;
    const ScalarField n3 = add_noise(flat, loud);
    CHECK(n3.min() >= 0.0);
    CHECK(n3.max() <= 1.0);

    NoiseSpec bad = ns;
    bad.regions.push_back({250, 0, 10, 10, 0.1});
    CHECK_THROWS_AS(bad.validate(g), ConfigError);
    CHECK_THROWS_AS(add_noise(flat, bad), ConfigError);
    NoiseSpec neg;
    neg.base_sigma = -1.0;
    CHECK_THROWS_AS(neg.validate(g), ConfigError);
}

TEST_CASE("counter-based normals") {
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double x = counter_normal(7, 0, std::uint64_t(k));
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.01);
    CHECK(counter_normal(7, 3, 11) == counter_normal(7, 3, 11));
    CHECK(counter_normal(7, 3, 11) != counter_normal(7, 4, 11));
}

TEST_CASE("phantom images") {
    const ScalarField p0 = phantom(GridSpec{32, 32, 1.0}, 0);
    const ScalarField p1 = phantom(GridSpec{32, 32, 1.0}, 1);
    for (double x : p0.values()) CHECK((x == 0.2 || x == 0.8));
    bool mid = false;
    for (double x : p1.values()) mid = mid || x == 0.5;
    CHECK(mid);
    CHECK(norm(p0 - p1) > 0.0);
}

TEST_CASE("lambda rasters") {
    TempDir dir("lam");
    std::mt19937_64 rng(3);
    const ScalarField lam = random_field(GridSpec{256, 256, 1.0}, rng, 0.0, 5.0);
    save_lambda(lam, dir / "l.bin");
    const auto raw = read_file(dir / "l.bin");
    REQUIRE(raw.size() == 16 + 8 * 256 * 256);
    CHECK(std::string(raw.begin(), raw.begin() + 8) == "TVLAMBDA");
    CHECK(raw[8] == 0x00);
    CHECK(raw[9] == 0x01);
    CHECK(raw[10] == 0x00);
    CHECK(raw[11] == 0x00);
    CHECK(raw[12] == 0x00);
    CHECK(raw[13] == 0x01);
    const ScalarField back = load_lambda(dir / "l.bin");
    CHECK(back.grid() == lam.grid());
    for (std::size_t k = 0; k < lam.size(); ++k) REQUIRE(back[k] == lam[k]);

    write_file(dir / "t.bin", std::vector<unsigned char>(raw.begin(), raw.end() - 1));
    CHECK_THROWS_AS(load_lambda(dir / "t.bin"), IoError);
    auto wrong = raw;
    wrong[0] = 'X';
    write_file(dir / "w.bin", wrong);
    CHECK_THROWS_AS(load_lambda(dir / "w.bin"), IoError);
    CHECK_THROWS_AS(load_lambda(dir / "none.bin"), IoError);
}

TEST_CASE("training manifests") {
    TempDir dir("man");
    const GridSpec g{12, 10, 1.0};
    save_image(phantom(g, 0), dir / "c0.pgm");
    save_image(phantom(g, 1), dir / "c1.pgm");
    save_image(phantom(g, 2), dir / "n1.pgm");
    save_image(phantom(GridSpec{10, 10, 1.0}, 0), dir / "small.pgm");

    write_text(dir / "m.yaml", R"(grid: {h: 0.5}
params: {gamma: 30, beta: 1.0e-4}
noise:
  base_sigma: 0.04
  seed: 9
  regions: [{x: 0, y: 0, width: 6, height: 10, sigma: 0.02}]
solver: {lambda_init: 3.0, mode: exact, subdomains: 2, overlap: 4, kind: classical, outer_iters: 3}
pairs:
  - {id: first, clean: c0.pgm}
  - {clean: c1.pgm, noisy: n1.pgm}
)");
    ModelParams defaults;
    defaults.mu = 1e-7;
    const Manifest m = load_manifest(dir / "m.yaml", defaults);
    CHECK(m.h == 0.5);
    CHECK(m.params.huber.gamma == 30.0);
    CHECK(m.params.beta == 1e-4);
    CHECK(m.params.mu == 1e-7);
    CHECK(m.params.n_train == 2);
    CHECK(m.noise.base_sigma == 0.04);
    CHECK(m.noise.seed == 9);
    REQUIRE(m.noise.regions.size() == 1);
    CHECK(m.noise.regions[0].width == 6);
    CHECK(m.solver.lambda_init == 3.0);
    CHECK(m.solver.mode == "exact");
    CHECK(m.solver.kind == "classical");
    CHECK(m.solver.outer_iters == 3);
    CHECK_FALSE(m.solver.tol.has_value());
    REQUIRE(m.pairs.size() == 2);
    CHECK(m.pairs[0].id == "first");
    CHECK(m.pairs[1].id == "pair1");
    CHECK(m.pairs[0].clean.grid() == GridSpec{12, 10, 0.5});
    CHECK(norm(m.pairs[0].noisy - add_noise(m.pairs[0].clean, m.noise, 0)) == 0.0);
    CHECK(norm(m.pairs[1].noisy - load_image(dir / "n1.pgm", 0.5)) == 0.0);
    const ProblemData d = m.problem();
    CHECK(d.size() == 2);
    CHECK(norm(d.u_dag[1] - m.pairs[1].clean) == 0.0);

    write_text(dir / "unknown.yaml", "pairs: [{clean: c0.pgm}]\nextra: 1\n");
    CHECK_THROWS_AS(load_manifest(dir / "unknown.yaml"), ConfigError);
    write_text(dir / "typo.yaml", "params: {gama: 3}\npairs: [{clean: c0.pgm}]\n");
    CHECK_THROWS_AS(load_manifest(dir / "typo.yaml"), ConfigError);
    write_text(dir / "mismatch.yaml", "pairs: [{clean: c0.pgm}, {clean: small.pgm}]\n");
    CHECK_THROWS_AS(load_manifest(dir / "mismatch.yaml"), ShapeError);
    write_text(dir / "pairsize.yaml", "pairs: [{clean: c0.pgm, noisy: small.pgm}]\n");
    CHECK_THROWS_AS(load_manifest(dir / "pairsize.yaml"), ShapeError);
    write_text(dir / "missing.yaml", "pairs: [{clean: nope.pgm}]\n");
    CHECK_THROWS_AS(load_manifest(dir / "missing.yaml"), IoError);
    write_text(dir / "empty.yaml", "grid: {h: 1}\n");
    CHECK_THROWS_AS(load_manifest(dir / "empty.yaml"), ConfigError);
    write_text(dir / "badregion.yaml", "noise: {regions: [{x: 0, y: 0, width: 40, height: 2, sigma: 0.1}]}\npairs: [{clean: c0.pgm}]\n");
    CHECK_THROWS_AS(load_manifest(dir / "badregion.yaml"), ConfigError);
    write_text(dir / "broken.yaml", "pairs: [\n");
    CHECK_THROWS_AS(load_manifest(dir / "broken.yaml"), ConfigError);
    CHECK_THROWS_AS(load_manifest(dir / "absent.yaml"), IoError);
}
