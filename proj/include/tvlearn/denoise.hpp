#pragma once

#include "tvlearn/system.hpp"

namespace tvlearn {

/// Huber-TV denoising with a spatially varying weight; negative entries of
/// lambda are clamped to 0.
ScalarField tv_denoise(const ScalarField& f, const ScalarField& lambda, const ModelParams& params,
                       const StateSolveOptions& opts = {});

/// Constant weight, broadcast onto the grid of f.
ScalarField tv_denoise(const ScalarField& f, double lambda, const ModelParams& params,
                       const StateSolveOptions& opts = {});

}  // namespace tvlearn
