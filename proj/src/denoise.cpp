#include "tvlearn/denoise.hpp"

#include "tvlearn/error.hpp"

namespace tvlearn {

ScalarField tv_denoise(const ScalarField& f, const ScalarField& lambda, const ModelParams& params,
                       const StateSolveOptions& opts) {
    if (!(lambda.grid() == f.grid())) throw ShapeError("tv_denoise: lambda and image sizes differ");
    return solve_state(lambda, f, params, opts).u;
}

ScalarField tv_denoise(const ScalarField& f, double lambda, const ModelParams& params, const StateSolveOptions& opts) {
    return tv_denoise(f, ScalarField(f.grid(), lambda), params, opts);
}

}  // namespace tvlearn
