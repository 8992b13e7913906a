#include "cli.hpp"

#include "tvlearn/data.hpp"
#include "tvlearn/denoise.hpp"
#include "tvlearn/error.hpp"
#include "tvlearn/metrics.hpp"
#include "tvlearn/schwarz.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

namespace tvlearn::cli {
namespace {

namespace fs = std::filesystem;

// Defaults of the reference configuration.
constexpr double kGamma = 50.0;
constexpr double kMu = 1e-13;
constexpr double kBeta = 1e-9;
constexpr int kSubdomains = 2;
constexpr int kOverlap = 20;
constexpr int kOuterIters = 2;

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    return f;
}

fs::path prepare_dir(const std::string& dir) {
    const fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    return p;
}

NoiseRegion parse_region(const std::string& s) {
    NoiseRegion r;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d,%d,%d,%d,%lf%c", &r.x, &r.y, &r.width, &r.height, &r.sigma, &tail) != 5) {
        throw ConfigError("--region expects x,y,width,height,sigma, got '" + s + "'");
    }
    return r;
}

JacobianMode parse_mode(const std::string& s) {
    if (s == "exact") return JacobianMode::Exact;
    if (s == "projected") return JacobianMode::Projected;
    throw ConfigError("mode must be exact or projected, got '" + s + "'");
}

// Lambda preview scaled so that max(lambda) maps to white.
ScalarField lambda_preview(const ScalarField& lambda) {
    ScalarField v = lambda;
    const double top = std::max(lambda.max(), 1e-300);
    for (auto& x : v.values()) x = std::max(x, 0.0) / top;
    return v;
}

// ---------------------------------------------------------------- noise

struct NoiseArgs {
    std::string manifest, input, output, out_dir = ".";
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::vector<std::string> regions;
};

int cmd_noise(const NoiseArgs& a, std::ostream& out) {
    const fs::path dir = prepare_dir(a.out_dir);
    if (!a.manifest.empty()) {
        const Manifest m = load_manifest(a.manifest);
        for (std::size_t k = 0; k < m.pairs.size(); ++k) {
            const auto& pr = m.pairs[k];
            const fs::path dst = dir / (pr.id + "_noisy.pgm");
            save_image(add_noise(pr.clean, m.noise, k), dst);
            out << dst.string() << "\n";
        }
        return Ok;
    }
    NoiseSpec spec;
    spec.base_sigma = a.sigma;
    spec.seed = a.seed;
    for (const auto& r : a.regions) spec.regions.push_back(parse_region(r));
    const ScalarField img = load_image(a.input);
    spec.validate(img.grid());
    const fs::path dst = dir / (a.output.empty() ? fs::path(a.input).stem().string() + "_noisy.pgm" : a.output);
    save_image(add_noise(img, spec, a.stream), dst);
    out << dst.string() << "\n";
    return Ok;
}

// ---------------------------------------------------------------- learn

struct LearnArgs {
    std::string manifest, out_dir = ".";
    int subdomains = kSubdomains, overlap = kOverlap, outer_iters = kOuterIters, max_iter = 50, threads = 1;
    std::string kind = "optimized", mode = "projected";
    double lambda_init = 1.0, tol = 1e-8, step_tol = 1e-10;
    double gamma = kGamma, mu = kMu, beta = kBeta;
    bool compare = false, verbose = false;
    // Options given explicitly on the command line (these beat the manifest).
    std::vector<std::string> given;

    bool has(const std::string& name) const { return std::find(given.begin(), given.end(), name) != given.end(); }
};

bool last_outer_converged(const DdResult& r) {
    const int last = r.records.back().outer_iter;
    for (const auto& rec : r.records) {
        if (rec.outer_iter == last && !rec.report.converged) return false;
    }
    return true;
}

void write_history_csv(std::ostream& f, const DdResult& r) {
    f << "outer_iter,subdomain,newton_iter,residual,step,active\n";
    char line[160];
    for (const auto& rec : r.records) {
        const auto& rep = rec.report;
        for (std::size_t k = 0; k < rep.residual_history.size(); ++k) {
            const double step = k == 0 ? 0.0 : rep.step_history[k - 1];
            const auto active = k == 0 ? std::size_t(0) : rep.active_sizes[k - 1];
            std::snprintf(line, sizeof line, "%d,%d,%zu,%.9e,%.9e,%zu\n", rec.outer_iter, rec.subdomain, k,
                          rep.residual_history[k], step, active);
            f << line;
        }
    }
}

int cmd_learn(LearnArgs a, std::ostream& out, std::ostream& err) {
    ModelParams defaults;
    defaults.huber = HuberParams::make(a.gamma);
    defaults.mu = a.mu;
    defaults.beta = a.beta;
    const Manifest man = load_manifest(a.manifest, defaults);
    ModelParams params = man.params;
    if (a.has("gamma")) params.huber = HuberParams::make(a.gamma);
    if (a.has("mu")) params.mu = a.mu;
    if (a.has("beta")) params.beta = a.beta;

    const SolverSection& s = man.solver;
    auto pick = [&](auto& field, const auto& from_manifest, const char* name) {
        if (!a.has(name) && from_manifest) field = *from_manifest;
    };
    pick(a.lambda_init, s.lambda_init, "lambda-init");
    pick(a.tol, s.tol, "tol");
    pick(a.step_tol, s.step_tol, "step-tol");
    pick(a.max_iter, s.max_iter, "max-iter");
    pick(a.mode, s.mode, "mode");
    pick(a.subdomains, s.subdomains, "subdomains");
    pick(a.overlap, s.overlap, "overlap");
    pick(a.kind, s.kind, "kind");
    pick(a.outer_iters, s.outer_iters, "outer-iters");

    const ProblemData data = man.problem();
    params.n_train = data.size();
    params.validate();

    DdConfig cfg;
    cfg.m_sub = a.subdomains;
    cfg.overlap = a.overlap;
    cfg.kind = parse_transmission_kind(a.kind);
    cfg.outer_iters = a.outer_iters;
    cfg.threads = a.threads;
    cfg.ssn.tol = a.tol;
    cfg.ssn.step_tol = a.step_tol;
    cfg.ssn.max_iter = a.max_iter;
    cfg.ssn.mode = parse_mode(a.mode);
    if (a.verbose) cfg.ssn.log = &err;
    cfg.ssn.validate();

    const fs::path dir = prepare_dir(a.out_dir);
    const OptState y0 = initial_state(data, params, a.lambda_init);
    const DdResult res = dd_solve(y0, data, params, cfg);
    const bool converged = last_outer_converged(res);

    save_lambda(res.y.lambda, dir / "lambda.bin");
    save_image(lambda_preview(res.y.lambda), dir / "lambda_preview.pgm");
    {
        auto f = open_out(dir / "dd_metrics.csv");
        write_dd_csv(f, res);
    }
    {
        auto f = open_out(dir / "ssn_history.csv");
        write_history_csv(f, res);
    }

    auto q = open_out(dir / "learn_quality.csv");
    q << "pair,ssim_noisy,ssim_denoised,psnr_noisy,psnr_denoised\n";
    for (std::size_t k = 0; k < man.pairs.size(); ++k) {
        const auto& pr = man.pairs[k];
        const ScalarField den = tv_denoise(data.f[k], res.y.lambda, params);
        save_image(den, dir / ("denoised_" + pr.id + ".pgm"));
        q << pr.id << "," << fmt("%.6f", ssim(data.f[k], pr.clean)) << "," << fmt("%.6f", ssim(den, pr.clean)) << ","
          << fmt("%.4f", psnr(data.f[k], pr.clean)) << "," << fmt("%.4f", psnr(den, pr.clean)) << "\n";
    }

    if (a.compare && cfg.m_sub > 1) {
        const SsnResult mono = ssn_solve(y0, data, params, cfg.ssn);
        auto c = open_out(dir / "compare.csv");
        c << "kind,gap_lambda_first,gap_lambda_last,er_lambda,er_u\n";
        for (auto kind : {TransmissionKind::Classical, TransmissionKind::Optimized}) {
            DdConfig kc = cfg;
            kc.kind = kind;
            kc.ssn.log = nullptr;
            const DdResult r = kind == cfg.kind ? res : dd_solve(y0, data, params, kc);
            double er_u = 0.0;
            for (int k = 0; k < data.size(); ++k) er_u += field_error(r.y.u[std::size_t(k)], mono.y.u[std::size_t(k)]);
            c << to_string(kind) << "," << fmt("%.9e", r.gaps.front()) << "," << fmt("%.9e", r.gaps.back()) << ","
              << fmt("%.9e", field_error(r.y.lambda, mono.y.lambda)) << "," << fmt("%.9e", er_u / data.size())
              << "\n";
        }
    }

    out << "pairs " << data.size() << " grid " << data.grid().m << "x" << data.grid().l << " subdomains "
        << res.layout.m_sub << " kind " << to_string(cfg.kind) << "\n";
    for (std::size_t g = 0; g < res.gaps.size(); ++g) out << "outer " << g + 1 << " gap_lambda " << fmt("%.6e", res.gaps[g]) << "\n";
    out << "lambda min " << fmt("%.6g", res.y.lambda.min()) << " mean " << fmt("%.6g", res.y.lambda.mean()) << " max "
        << fmt("%.6g", res.y.lambda.max()) << "\n";
    out << "converged=" << (converged ? "true" : "false") << "\n";
    if (!converged) {
        err << "tvlearn: Newton did not reach tolerance in the final outer iteration\n";
        return Solver;
    }
    return Ok;
}

// ---------------------------------------------------------------- denoise

struct DenoiseArgs {
    std::string image, lambda = "1", clean, output = "denoised.pgm", out_dir = ".";
    double gamma = kGamma, mu = kMu, h = 1.0;
};

int cmd_denoise(const DenoiseArgs& a, std::ostream& out) {
    ModelParams params;
    params.huber = HuberParams::make(a.gamma);
    params.mu = a.mu;
    params.validate();
    const ScalarField f = load_image(a.image, a.h);

    ScalarField den;
    double value = 0.0;
    std::size_t used = 0;
    try {
        value = std::stod(a.lambda, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == a.lambda.size() && used > 0) {
        if (!(value >= 0.0)) throw ConfigError("--lambda constant must be non-negative");
        den = tv_denoise(f, value, params);
    } else {
        den = tv_denoise(f, load_lambda(a.lambda, a.h), params);
    }

    const fs::path dir = prepare_dir(a.out_dir);
    save_image(den, dir / a.output);
    out << (dir / a.output).string() << "\n";
    if (!a.clean.empty()) {
        const ScalarField c = load_image(a.clean, a.h);
        if (!(c.grid() == f.grid())) throw ShapeError("--clean image size differs from the input");
        auto m = open_out(dir / "denoise_metrics.csv");
        const std::string hdr = "image,ssim,psnr\n";
        std::ostringstream rows;
        rows << "noisy," << fmt("%.6f", ssim(f, c)) << "," << fmt("%.4f", psnr(f, c)) << "\n"
             << "denoised," << fmt("%.6f", ssim(den, c)) << "," << fmt("%.4f", psnr(den, c)) << "\n";
        m << hdr << rows.str();
        out << hdr << rows.str();
    }
    return Ok;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string clean, out_dir;
    std::vector<std::string> candidates;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const ScalarField c = load_image(a.clean);
    std::ostringstream csv;
    csv << "candidate,ssim,psnr\n";
    for (const auto& path : a.candidates) {
        const ScalarField x = load_image(path);
        if (!(x.grid() == c.grid())) throw ShapeError("eval: " + path + " differs in size from the clean image");
        csv << path << "," << fmt("%.6f", ssim(x, c)) << "," << fmt("%.4f", psnr(x, c)) << "\n";
    }
    if (!a.out_dir.empty()) {
        auto f = open_out(prepare_dir(a.out_dir) / "eval.csv");
        f << csv.str();
    }
    out << csv.str();
    return Ok;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    int size = 32, count = 2;
    std::string out_dir = ".";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const GridSpec g{a.size, a.size, 1.0};
    g.validate();
    if (a.count < 1) throw ConfigError("--count must be >= 1");
    const fs::path dir = prepare_dir(a.out_dir);
    for (int k = 0; k < a.count; ++k) {
        const fs::path dst = dir / ("clean_" + std::to_string(k) + ".pgm");
        save_image(phantom(g, k), dst);
        out << dst.string() << "\n";
    }
    return Ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Learn spatially varying TV regularization weights and denoise images.", "tvlearn"};
    app.require_subcommand(1);

    NoiseArgs na;
    auto* noise = app.add_subcommand("noise", "Synthesize noisy images");
    noise->add_option("--manifest", na.manifest, "Add the manifest's noise to each clean image");
    noise->add_option("--input", na.input, "Single input image (.pgm/.png)");
    noise->add_option("--output", na.output, "Output file name inside --out-dir");
    noise->add_option("--sigma", na.sigma, "Base noise standard deviation")->check(CLI::NonNegativeNumber);
    noise->add_option("--seed", na.seed, "RNG seed");
    noise->add_option("--stream", na.stream, "Independent realization index");
    noise->add_option("--region", na.regions, "Extra noise window x,y,width,height,sigma (repeatable)");
    noise->add_option("--out-dir", na.out_dir, "Output directory");

    LearnArgs la;
    auto* learn = app.add_subcommand("learn", "Learn lambda from a training manifest");
    learn->add_option("manifest", la.manifest, "Training manifest (YAML)")->required();
    learn->add_option("--subdomains", la.subdomains, "Number of strips M");
    learn->add_option("--overlap", la.overlap, "Overlap width L in columns");
    learn->add_option("--kind", la.kind, "Transmission: classical | optimized");
    learn->add_option("--outer-iters", la.outer_iters, "Outer Schwarz iterations");
    learn->add_option("--lambda-init", la.lambda_init, "Constant initial lambda");
    learn->add_option("--tol", la.tol, "Newton residual tolerance");
    learn->add_option("--step-tol", la.step_tol, "Newton step tolerance");
    learn->add_option("--max-iter", la.max_iter, "Newton iteration limit");
    learn->add_option("--mode", la.mode, "Jacobian: exact | projected");
    learn->add_option("--gamma", la.gamma, "Huber parameter");
    learn->add_option("--mu", la.mu, "Elliptic regularization weight");
    learn->add_option("--beta", la.beta, "Lambda smoothing weight");
    learn->add_option("--threads", la.threads, "Worker threads for subdomain solves")->check(CLI::PositiveNumber);
    learn->add_flag("--compare", la.compare, "Also run both transmission kinds and a monolithic reference");
    learn->add_flag("--verbose", la.verbose, "Log Newton iterations to stderr");
    learn->add_option("--out-dir", la.out_dir, "Output directory");

    DenoiseArgs da;
    auto* denoise = app.add_subcommand("denoise", "Denoise an image with a learned or constant lambda");
    denoise->add_option("image", da.image, "Noisy image")->required();
    denoise->add_option("--lambda", da.lambda, "Lambda raster path or constant value");
    denoise->add_option("--clean", da.clean, "Clean reference for metrics");
    denoise->add_option("--gamma", da.gamma, "Huber parameter");
    denoise->add_option("--mu", da.mu, "Elliptic regularization weight");
    denoise->add_option("--spacing", da.h, "Grid spacing h")->check(CLI::PositiveNumber);
    denoise->add_option("--output", da.output, "Output file name inside --out-dir");
    denoise->add_option("--out-dir", da.out_dir, "Output directory");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "SSIM and PSNR of candidates against a clean image");
    eval->add_option("clean", ea.clean, "Clean reference")->required();
    eval->add_option("candidates", ea.candidates, "Images to score")->required();
    eval->add_option("--out-dir", ea.out_dir, "Also write eval.csv here");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Write piecewise-constant test images");
    synth->add_option("--size", sa.size, "Image side length");
    synth->add_option("--count", sa.count, "Number of images");
    synth->add_option("--out-dir", sa.out_dir, "Output directory");

    std::vector<char*> argv;
    std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"tvlearn"} : args;
    for (auto& s : storage) argv.push_back(s.data());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "tvlearn: " << e.what() << "\n";
        return Usage;
    }

    try {
        if (*noise) {
            if (na.manifest.empty() == na.input.empty()) throw ConfigError("noise: give exactly one of --manifest or --input");
            return cmd_noise(na, out);
        }
        if (*learn) {
            for (const auto* opt : learn->get_options()) {
                if (opt->count() > 0) la.given.push_back(opt->get_single_name());
            }
            return cmd_learn(la, out, err);
        }
        if (*denoise) return cmd_denoise(da, out);
        if (*eval) return cmd_eval(ea, out);
        if (*synth) return cmd_synth(sa, out);
    } catch (const SolverError& e) {
        err << "tvlearn: solver failure";
        if (e.subdomain() >= 0) err << " in subdomain " << e.subdomain();
        err << " at iteration " << e.iteration() << ": " << e.what() << "\n";
        return Solver;
    } catch (const IoError& e) {
        err << "tvlearn: " << e.what() << "\n";
        return Io;
    } catch (const Error& e) {
        err << "tvlearn: " << e.what() << "\n";
        return Usage;
    }
    return Usage;
}

}  // namespace tvlearn::cli
