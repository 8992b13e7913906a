#include "tvlearn/data.hpp"
#include "tvlearn/denoise.hpp"
#include "tvlearn/error.hpp"
#include "tvlearn/metrics.hpp"
#include "tvlearn/schwarz.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <tuple>
#include <variant>

namespace py = pybind11;
using namespace tvlearn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Arrays are (rows, cols) = (l, m); row-major order matches node index i + j m.
ScalarField to_field(const Array& a, double h) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    const GridSpec g{int(a.shape(1)), int(a.shape(0)), h};
    g.validate();
    return ScalarField(g, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const ScalarField& f) {
    Array a({py::ssize_t(f.grid().l), py::ssize_t(f.grid().m)});
    std::copy(f.values().begin(), f.values().end(), a.mutable_data());
    return a;
}

ModelParams make_params(double gamma, double mu, double beta, int n_train) {
    ModelParams p;
    p.huber = HuberParams::make(gamma);
    p.mu = mu;
    p.beta = beta;
    p.n_train = n_train;
    p.validate();
    return p;
}

JacobianMode parse_mode(const std::string& s) {
    if (s == "exact") return JacobianMode::Exact;
    if (s == "projected") return JacobianMode::Projected;
    throw ConfigError("mode must be 'exact' or 'projected', got '" + s + "'");
}

using NoiseWindow = std::tuple<int, int, int, int, double>;

Array py_add_noise(const Array& clean, double sigma, std::uint64_t seed, std::uint64_t stream,
                   const std::vector<NoiseWindow>& regions) {
    NoiseSpec ns;
    ns.base_sigma = sigma;
    ns.seed = seed;
    for (const auto& [x, y, w, h, s] : regions) ns.regions.push_back({x, y, w, h, s});
    return to_array(add_noise(to_field(clean, 1.0), ns, stream));
}

Array py_denoise(const Array& f, const std::variant<double, Array>& lam, double gamma, double mu, double h) {
    const ModelParams p = make_params(gamma, mu, 1e-9, 1);
    const ScalarField ff = to_field(f, h);
    ScalarField u;
    if (std::holds_alternative<double>(lam)) {
        const double v = std::get<double>(lam);
        py::gil_scoped_release release;
        u = tv_denoise(ff, v, p);
    } else {
        const ScalarField lf = to_field(std::get<Array>(lam), h);
        py::gil_scoped_release release;
        u = tv_denoise(ff, lf, p);
    }
    return to_array(u);
}

py::dict py_learn(const std::vector<Array>& noisy, const std::vector<Array>& clean, double gamma, double mu,
                  double beta, double h, double lambda_init, int subdomains, int overlap, const std::string& kind,
                  int outer_iters, const std::string& mode, int threads, double tol, int max_iter) {
    if (noisy.size() != clean.size() || noisy.empty()) {
        throw ShapeError("learn: noisy and clean must be non-empty lists of equal length");
    }
    ProblemData data;
    for (std::size_t k = 0; k < noisy.size(); ++k) {
        data.f.push_back(to_field(noisy[k], h));
        data.u_dag.push_back(to_field(clean[k], h));
    }
    data.validate();
    const ModelParams p = make_params(gamma, mu, beta, data.size());
    DdConfig cfg;
    cfg.m_sub = subdomains;
    cfg.overlap = overlap;
    cfg.kind = parse_transmission_kind(kind);
    cfg.outer_iters = outer_iters;
    cfg.threads = threads;
    cfg.ssn.tol = tol;
    cfg.ssn.max_iter = max_iter;
    cfg.ssn.mode = parse_mode(mode);
    cfg.ssn.validate();

    DdResult r;
    {
        py::gil_scoped_release release;
        r = dd_solve(initial_state(data, p, lambda_init), data, p, cfg);
    }
    const int last = r.records.back().outer_iter;
    bool converged = true;
    py::list iterations;
    for (const auto& rec : r.records) {
        if (rec.outer_iter == last) converged = converged && rec.report.converged;
        iterations.append(rec.report.iterations);
    }
    py::list denoised;
    for (std::size_t k = 0; k < data.f.size(); ++k) denoised.append(to_array(r.y.u[k]));
    py::dict out;
    out["lambda"] = to_array(r.y.lambda);
    out["denoised"] = denoised;
    out["converged"] = converged;
    out["gaps"] = r.gaps;
    out["newton_iterations"] = iterations;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Learning spatially varying TV weights by semismooth Newton and Schwarz decomposition.";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<SolverError>(m, "SolverError", base.ptr());

    m.def("phantom", [](int rows, int cols, int variant) { return to_array(phantom(GridSpec{cols, rows, 1.0}, variant)); },
          py::arg("rows"), py::arg("cols"), py::arg("variant") = 0, "Piecewise-constant test image.");
    m.def("add_noise", &py_add_noise, py::arg("clean"), py::arg("sigma"), py::arg("seed") = 0, py::arg("stream") = 0,
          py::arg("regions") = std::vector<NoiseWindow>{},
          "Deterministic Gaussian noise; regions are (x, y, width, height, sigma) windows with extra noise.");
    m.def("denoise", &py_denoise, py::arg("f"), py::arg("lam"), py::arg("gamma") = 50.0, py::arg("mu") = 1e-13,
          py::arg("h") = 1.0, "Huber-TV denoising with a scalar or per-pixel weight.");
    m.def("learn", &py_learn, py::arg("noisy"), py::arg("clean"), py::kw_only(), py::arg("gamma") = 50.0,
          py::arg("mu") = 1e-13, py::arg("beta") = 1e-9, py::arg("h") = 1.0, py::arg("lambda_init") = 1.0,
          py::arg("subdomains") = 2, py::arg("overlap") = 20, py::arg("kind") = "optimized",
          py::arg("outer_iters") = 2, py::arg("mode") = "projected", py::arg("threads") = 1, py::arg("tol") = 1e-8,
          py::arg("max_iter") = 50, "Learn a per-pixel weight from training pairs.");
    m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_field(a, 1.0), to_field(b, 1.0)); });
    m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_field(a, 1.0), to_field(b, 1.0)); });
    m.def("total_variation", [](const Array& u, double h) { return total_variation(to_field(u, h)); }, py::arg("u"),
          py::arg("h") = 1.0);
    m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); }, py::arg("path"));
    m.def("save_image", [](const Array& a, const std::filesystem::path& p) { save_image(to_field(a, 1.0), p); },
          py::arg("image"), py::arg("path"));
    m.def("load_lambda", [](const std::filesystem::path& p) { return to_array(load_lambda(p)); }, py::arg("path"));
    m.def("save_lambda", [](const Array& a, const std::filesystem::path& p) { save_lambda(to_field(a, 1.0), p); },
          py::arg("lam"), py::arg("path"));
}
