#include "tvlearn/data.hpp"

#include "tvlearn/error.hpp"

#include <png.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>

namespace tvlearn {

namespace fs = std::filesystem;

void NoiseSpec::validate(const GridSpec& grid) const {
    if (!(base_sigma >= 0.0) || !std::isfinite(base_sigma)) throw ConfigError("noise base_sigma must be >= 0");
    for (const auto& r : regions) {
        if (!(r.sigma >= 0.0) || !std::isfinite(r.sigma)) throw ConfigError("noise region sigma must be >= 0");
        if (r.width < 1 || r.height < 1 || r.x < 0 || r.y < 0 || r.x + r.width > grid.m || r.y + r.height > grid.l) {
            throw ConfigError("noise region lies outside the grid");
        }
    }
}

// Counter-based generator

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform on (0, 1], 53 bits.
double to_unit(std::uint64_t x) { return (double(x >> 11) + 1.0) * 0x1.0p-53; }

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    const std::uint64_t key = splitmix(splitmix(seed) ^ splitmix(stream + 0x632be59bd9b4e019ULL));
    const std::uint64_t a = splitmix(key ^ (2 * index));
    const std::uint64_t b = splitmix(key ^ (2 * index + 1));
    const double u1 = to_unit(a);
    const double u2 = to_unit(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ScalarField add_noise(const ScalarField& img, const NoiseSpec& spec, std::uint64_t stream) {
    const GridSpec& g = img.grid();
    spec.validate(g);
    ScalarField out = img;
    // Stream layout: base noise at 2*stream*K, region r at 2*stream*K + r + 1.
    const std::uint64_t per = spec.regions.size() + 1;
    for (int j = 0; j < g.l; ++j) {
        for (int i = 0; i < g.m; ++i) {
            const std::size_t n = g.node(i, j);
            double v = img[n];
            if (spec.base_sigma > 0.0) v += spec.base_sigma * counter_normal(spec.seed, stream * per, n);
            for (std::size_t r = 0; r < spec.regions.size(); ++r) {
                const NoiseRegion& reg = spec.regions[r];
                if (reg.sigma > 0.0 && reg.contains(i, j)) {
                    v += reg.sigma * counter_normal(spec.seed, stream * per + r + 1, n);
                }
            }
            out[n] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

ScalarField phantom(const GridSpec& grid, int variant) {
    grid.validate();
    ScalarField out(grid, 0.2);
    const int v = std::max(variant, 0);
    const int x0 = grid.m / 4 + (v % 3) * grid.m / 16;
    const int y0 = grid.l / 4 + ((v / 3) % 3) * grid.l / 16;
    const int w = grid.m / 2 - (v % 2) * grid.m / 8;
    const int hgt = grid.l / 2 - ((v + 1) % 2) * (v > 0 ? grid.l / 8 : 0);
    const double cx = grid.m * (0.70 - 0.05 * (v % 4));
    const double cy = grid.l * (0.30 + 0.05 * (v % 5));
    const double rad = std::min(grid.m, grid.l) * 0.15;
    for (int j = 0; j < grid.l; ++j) {
        for (int i = 0; i < grid.m; ++i) {
            if (i >= x0 && i < x0 + w && j >= y0 && j < y0 + hgt) out(i, j) = 0.8;
            if (v > 0 && std::hypot(i + 0.5 - cx, j + 0.5 - cy) < rad) out(i, j) = 0.5;
        }
    }
    return out;
}

// Image codecs

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const unsigned char* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data), std::streamsize(size));
    if (!out) throw IoError("write failed for " + path.string());
}

unsigned char quantize(double v) {
    const double s = std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<unsigned char>(s);
}

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return e;
}

class PgmReader {
public:
    explicit PgmReader(const std::vector<unsigned char>& b) : b_(b) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw IoError("pgm: " + what + " at byte " + std::to_string(pos_));
    }

    void skip_space() {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (std::isspace(b_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long number() {
        skip_space();
        if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) fail("expected a number");
        long v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_] - '0');
            if (v > 1'000'000) fail("header value too large");
            ++pos_;
        }
        return v;
    }

    std::size_t pos_ = 0;
    const std::vector<unsigned char>& b_;
};

}  // namespace

ScalarField decode_pgm(const std::vector<unsigned char>& bytes, double h) {
    PgmReader r(bytes);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') r.fail("missing P5 magic");
    r.pos_ = 2;
    const long w = r.number();
    const long hgt = r.number();
    const std::size_t maxval_at = r.pos_;
    const long maxval = r.number();
    if (maxval != 255) {
        r.pos_ = maxval_at;
        r.fail("unsupported maxval " + std::to_string(maxval) + " (only 8-bit is supported)");
    }
    if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) r.fail("expected whitespace after header");
    ++r.pos_;
    GridSpec g{int(w), int(hgt), h};
    if (w < 3 || hgt < 3) r.fail("image smaller than 3x3");
    const std::size_t need = g.nodes();
    if (bytes.size() - r.pos_ < need) {
        r.pos_ = bytes.size();
        r.fail("truncated pixel data");
    }
    std::vector<double> v(need);
    for (std::size_t k = 0; k < need; ++k) v[k] = bytes[r.pos_ + k] / 255.0;
    return ScalarField(g, std::move(v));
}

std::vector<unsigned char> encode_pgm(const ScalarField& v) {
    const GridSpec& g = v.grid();
    const std::string header = "P5\n" + std::to_string(g.m) + " " + std::to_string(g.l) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(header.size() + g.nodes());
    for (std::size_t k = 0; k < g.nodes(); ++k) out.push_back(quantize(v[k]));
    return out;
}

namespace {

ScalarField load_png(const fs::path& path, double h) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    const std::vector<unsigned char> bytes = read_bytes(path);
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw IoError("png: " + path.string() + ": " + img.message);
    }
    if ((img.format & PNG_FORMAT_FLAG_COLOR) != 0) {
        png_image_free(&img);
        throw IoError("png: " + path.string() + ": color images are not supported");
    }
    if ((img.format & PNG_FORMAT_FLAG_LINEAR) != 0) {
        png_image_free(&img);
        throw IoError("png: " + path.string() + ": 16-bit images are not supported");
    }
    img.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        throw IoError("png: " + path.string() + ": " + img.message);
    }
    GridSpec g{int(img.width), int(img.height), h};
    if (g.m < 3 || g.l < 3) throw IoError("png: image smaller than 3x3");
    std::vector<double> v(g.nodes());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = buf[k] / 255.0;
    return ScalarField(g, std::move(v));
}

void save_png(const ScalarField& v, const fs::path& path) {
    const GridSpec& g = v.grid();
    std::vector<unsigned char> buf(g.nodes());
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = quantize(v[k]);
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = png_uint_32(g.m);
    img.height = png_uint_32(g.l);
    img.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
        throw IoError("png: cannot write " + path.string() + ": " + img.message);
    }
}

}  // namespace

ScalarField load_image(const fs::path& path, double h) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return load_png(path, h);
    if (ext == ".pgm") {
        try {
            return decode_pgm(read_bytes(path), h);
        } catch (const IoError& e) {
            throw IoError(path.string() + ": " + e.what());
        }
    }
    throw IoError("unsupported image extension: " + path.string());
}

void save_image(const ScalarField& v, const fs::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return save_png(v, path);
    if (ext == ".pgm") {
        const auto bytes = encode_pgm(v);
        return write_bytes(path, bytes.data(), bytes.size());
    }
    throw IoError("unsupported image extension: " + path.string());
}

// Lambda raster

namespace {

constexpr char kMagic[8] = {'T', 'V', 'L', 'A', 'M', 'B', 'D', 'A'};

template <class T>
void put_le(std::vector<unsigned char>& out, T v) {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
}

template <class T>
T get_le(const unsigned char* p) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace

void save_lambda(const ScalarField& lambda, const fs::path& path) {
    const GridSpec& g = lambda.grid();
    std::vector<unsigned char> out(kMagic, kMagic + 8);
    put_le<std::uint32_t>(out, std::uint32_t(g.m));
    put_le<std::uint32_t>(out, std::uint32_t(g.l));
    out.reserve(16 + 8 * g.nodes());
    for (std::size_t k = 0; k < g.nodes(); ++k) put_le<double>(out, lambda[k]);
    write_bytes(path, out.data(), out.size());
}

ScalarField load_lambda(const fs::path& path, double h) {
    const std::vector<unsigned char> b = read_bytes(path);
    if (b.size() < 16) throw IoError("lambda raster: truncated header in " + path.string());
    if (std::memcmp(b.data(), kMagic, 8) != 0) throw IoError("lambda raster: bad magic in " + path.string());
    const auto m = get_le<std::uint32_t>(b.data() + 8);
    const auto l = get_le<std::uint32_t>(b.data() + 12);
    GridSpec g{int(m), int(l), h};
    if (m < 3 || l < 3 || m > 1'000'000 || l > 1'000'000) throw IoError("lambda raster: bad dimensions");
    if (b.size() != 16 + 8 * g.nodes()) throw IoError("lambda raster: size does not match header in " + path.string());
    std::vector<double> v(g.nodes());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = get_le<double>(b.data() + 16 + 8 * k);
    return ScalarField(g, std::move(v));
}

// Manifest

namespace {

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) throw ConfigError("manifest: section '" + where + "' must be a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!ok.count(key)) throw ConfigError("manifest: unknown key '" + key + "' in " + where);
    }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("manifest: bad value for '" + key + "'");
    }
}

template <class T>
void read_opt(const YAML::Node& sec, const char* key, std::optional<T>& out) {
    if (sec[key]) out = scalar<T>(sec[key], key);
}

}  // namespace

ProblemData Manifest::problem() const {
    ProblemData d;
    for (const auto& p : pairs) {
        d.f.push_back(p.noisy);
        d.u_dag.push_back(p.clean);
    }
    return d;
}

Manifest load_manifest(const fs::path& path, const ModelParams& defaults) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw IoError("cannot open manifest " + path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError("manifest: parse error: " + std::string(e.what()));
    }
    check_keys(root, "top level", {"grid", "params", "noise", "solver", "pairs"});

    Manifest m;
    m.source = path;
    m.params = defaults;
    const fs::path base = path.parent_path();

    if (const auto g = root["grid"]) {
        check_keys(g, "grid", {"h"});
        if (g["h"]) m.h = scalar<double>(g["h"], "h");
    }
    if (!(m.h > 0.0)) throw ConfigError("manifest: grid.h must be positive");

    if (const auto p = root["params"]) {
        check_keys(p, "params", {"gamma", "mu", "beta", "boundary"});
        if (p["gamma"]) m.params.huber = HuberParams::make(scalar<double>(p["gamma"], "gamma"));
        if (p["mu"]) m.params.mu = scalar<double>(p["mu"], "mu");
        if (p["beta"]) m.params.beta = scalar<double>(p["beta"], "beta");
        if (p["boundary"]) {
            const auto b = scalar<std::string>(p["boundary"], "boundary");
            if (b == "neumann") m.params.bc = BoundaryKind::NeumannReflect;
            else if (b == "dirichlet") m.params.bc = BoundaryKind::DirichletZero;
            else throw ConfigError("manifest: boundary must be neumann or dirichlet");
        }
    }

    if (const auto n = root["noise"]) {
        check_keys(n, "noise", {"base_sigma", "seed", "regions"});
        if (n["base_sigma"]) m.noise.base_sigma = scalar<double>(n["base_sigma"], "base_sigma");
        if (n["seed"]) m.noise.seed = scalar<std::uint64_t>(n["seed"], "seed");
        if (const auto regs = n["regions"]) {
            if (!regs.IsSequence()) throw ConfigError("manifest: noise.regions must be a list");
            for (const auto& r : regs) {
                check_keys(r, "noise.regions", {"x", "y", "width", "height", "sigma"});
                for (const char* k : {"x", "y", "width", "height", "sigma"}) {
                    if (!r[k]) throw ConfigError(std::string("manifest: noise region is missing '") + k + "'");
                }
                m.noise.regions.push_back({scalar<int>(r["x"], "x"), scalar<int>(r["y"], "y"),
                                           scalar<int>(r["width"], "width"), scalar<int>(r["height"], "height"),
                                           scalar<double>(r["sigma"], "sigma")});
            }
        }
    }

    if (const auto s = root["solver"]) {
        check_keys(s, "solver", {"lambda_init", "tol", "step_tol", "max_iter", "mode", "subdomains", "overlap", "kind",
                                 "outer_iters"});
        SolverSection& o = m.solver;
        read_opt(s, "lambda_init", o.lambda_init);
        read_opt(s, "tol", o.tol);
        read_opt(s, "step_tol", o.step_tol);
        read_opt(s, "max_iter", o.max_iter);
        read_opt(s, "mode", o.mode);
        read_opt(s, "subdomains", o.subdomains);
        read_opt(s, "overlap", o.overlap);
        read_opt(s, "kind", o.kind);
        read_opt(s, "outer_iters", o.outer_iters);
    }

    const auto pairs = root["pairs"];
    if (!pairs || !pairs.IsSequence() || pairs.size() == 0) throw ConfigError("manifest: 'pairs' must be a non-empty list");
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        check_keys(p, "pairs", {"id", "clean", "noisy"});
        if (!p["clean"]) throw ConfigError("manifest: pair " + std::to_string(k) + " has no 'clean' image");
        TrainingPair tp;
        tp.id = p["id"] ? scalar<std::string>(p["id"], "id") : "pair" + std::to_string(k);
        tp.clean = load_image(base / scalar<std::string>(p["clean"], "clean"), m.h);
        if (p["noisy"]) {
            tp.noisy = load_image(base / scalar<std::string>(p["noisy"], "noisy"), m.h);
            if (!(tp.noisy.grid() == tp.clean.grid())) {
                throw ShapeError("manifest: pair '" + tp.id + "' clean and noisy sizes differ");
            }
        } else {
            tp.noisy = add_noise(tp.clean, m.noise, k);
        }
        if (!m.pairs.empty() && !(tp.clean.grid() == m.pairs.front().clean.grid())) {
            throw ShapeError("manifest: pair '" + tp.id + "' differs in size from the first pair");
        }
        m.pairs.push_back(std::move(tp));
    }
    m.noise.validate(m.pairs.front().clean.grid());
    m.params.n_train = int(m.pairs.size());
    m.params.validate();
    return m;
}

}  // namespace tvlearn
