#pragma once

#include "tvlearn/schwarz.hpp"

#include <limits>

namespace tvlearn {

/// Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, dynamic range 1. Grids smaller than 11 use the
/// largest odd window that fits.
double ssim(const ScalarField& a, const ScalarField& b);

/// 10 log10(1 / MSE); +infinity when the fields are identical.
double psnr(const ScalarField& a, const ScalarField& b);

/// Euclidean norm of a - b.
double field_error(const ScalarField& a, const ScalarField& b);

/// Sum over strips of the global residual norm restricted to the strip:
/// node rows on the strip columns, first-axis edges with both ends inside.
double ssnr_metric(const OptState& y, const ProblemData& data, const ModelParams& params,
                   const SubdomainLayout& layout);

/// Sum over nodes of |D u| with missing edge components read as zero.
double total_variation(const ScalarField& u);

}  // namespace tvlearn
