#pragma once

// Image I/O, deterministic noise synthesis, training manifests and lambda
// rasters. Intensities live on [0, 1]; node (i, j) is pixel column i, row j.

#include "tvlearn/grid.hpp"
#include "tvlearn/system.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tvlearn {

struct TrainingPair {
    ScalarField clean;  // u_dag
    ScalarField noisy;  // f
    std::string id;
};

/// Axis-aligned window [x, x + width) x [y, y + height) in node indices.
struct NoiseRegion {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
    double sigma = 0.0;  // extra standard deviation inside the window

    bool contains(int i, int j) const { return i >= x && i < x + width && j >= y && j < y + height; }
};

struct NoiseSpec {
    double base_sigma = 0.0;
    std::vector<NoiseRegion> regions;
    std::uint64_t seed = 0;

    /// Throws ConfigError for negative sigmas or windows outside `grid`.
    void validate(const GridSpec& grid) const;
};

/// Standard normal sample determined only by (seed, stream, index).
double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// img + N(0, base_sigma^2) + region components, clamped to [0, 1]. `stream`
/// separates independent realizations under one seed (e.g. training pairs).
ScalarField add_noise(const ScalarField& img, const NoiseSpec& spec, std::uint64_t stream = 0);

/// Piecewise-constant test image on [0, 1]: background 0.2, a bright
/// rectangle (0.8) and, for variant > 0, a mid-gray disk (0.5). Placement
/// shifts with `variant`.
ScalarField phantom(const GridSpec& grid, int variant = 0);

/// 8-bit grayscale PGM (P5) or PNG, chosen by extension. Values map to k/255.
ScalarField load_image(const std::filesystem::path& path, double h = 1.0);

/// Writes v clamped to [0, 1] as round-half-even(255 v).
void save_image(const ScalarField& v, const std::filesystem::path& path);

/// Raw PGM codec, exposed for byte-level tests.
ScalarField decode_pgm(const std::vector<unsigned char>& bytes, double h = 1.0);
std::vector<unsigned char> encode_pgm(const ScalarField& v);

/// 16-byte header ("TVLAMBDA", uint32 m, uint32 l), then m*l float64, all
/// little endian.
void save_lambda(const ScalarField& lambda, const std::filesystem::path& path);
ScalarField load_lambda(const std::filesystem::path& path, double h = 1.0);

/// Optional solver settings carried by a manifest; unset fields fall back to
/// the caller's defaults.
struct SolverSection {
    std::optional<double> lambda_init;
    std::optional<double> tol;
    std::optional<double> step_tol;
    std::optional<int> max_iter;
    std::optional<std::string> mode;  // exact | projected
    std::optional<int> subdomains;
    std::optional<int> overlap;
    std::optional<std::string> kind;  // classical | optimized
    std::optional<int> outer_iters;
};

struct Manifest {
    std::filesystem::path source;
    double h = 1.0;
    ModelParams params;
    NoiseSpec noise;
    SolverSection solver;
    std::vector<TrainingPair> pairs;

    ProblemData problem() const;
};

/// Reads a YAML manifest:
///
///   grid:   {h: 1.0}
///   params: {gamma: 50, mu: 1e-13, beta: 1e-9, boundary: neumann}
///   noise:  {base_sigma: 0.05, seed: 7, regions: [{x, y, width, height, sigma}]}
///   solver: {lambda_init, tol, step_tol, max_iter, mode, subdomains, overlap, kind, outer_iters}
///   pairs:  [{id: a, clean: a.pgm, noisy: a_noisy.pgm}]
///
/// Paths are relative to the manifest. A pair without `noisy` is synthesized
/// from `clean` with the noise section, stream = pair index. Unknown keys,
/// missing files and mismatched image sizes are errors. `params` keys omitted
/// from the file keep the values of `defaults`.
Manifest load_manifest(const std::filesystem::path& path, const ModelParams& defaults = {});

}  // namespace tvlearn
