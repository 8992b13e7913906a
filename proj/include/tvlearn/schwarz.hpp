#pragma once

// Overlapping Schwarz decomposition into vertical strips along the first axis
// (i). Each outer iteration solves every strip with transmission rows on its
// artificial boundary columns, fed by the previous global iterate, then
// blends the strips back with linear partition-of-unity ramps.

#include "tvlearn/ssn.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace tvlearn {

/// Inclusive column range [first, last].
struct Window {
    int first = 0;
    int last = 0;

    int width() const { return last - first + 1; }
    bool contains(int i) const { return i >= first && i <= last; }
};

/// Artificial boundary column of one strip. `inward` points into the strip
/// (+1 on a left boundary, -1 on a right one).
struct InterfaceSite {
    int column = 0;  // global column index
    int inward = 1;
    int neighbour = 0;
};

struct SubdomainLayout {
    GridSpec grid;
    int m_sub = 1;
    int overlap = 0;
    std::vector<Window> ranges;
    std::vector<std::vector<InterfaceSite>> interfaces;

    GridSpec local_grid(int j) const { return {ranges[std::size_t(j)].width(), grid.l, grid.h}; }
};

/// Near-equal strips: widths w_j = T / M (+1 for j < T % M), T = m + (M-1) L,
/// each starting L columns before the previous one ends. Throws ConfigError
/// when a strip would be narrower than L + 2 or an inner strip could not keep
/// its two overlaps disjoint.
SubdomainLayout partition(const GridSpec& grid, int m_sub, int overlap);

enum class TransmissionKind { Classical, Optimized };

const char* to_string(TransmissionKind k);
TransmissionKind parse_transmission_kind(const std::string& s);

/// Robin coefficients on one interface, signed along +x: the left strip of a
/// pair gets +S, the right strip -S. Classical exchange leaves them empty.
struct InterfaceCoefficients {
    int column = 0;
    std::vector<double> s_u;  // per row j
    std::vector<double> s_p;
    double s_lambda = 0.0;
};

struct TransmissionSpec {
    TransmissionKind kind = TransmissionKind::Optimized;
    std::vector<std::vector<InterfaceCoefficients>> sites;  // [subdomain][interface]
};

/// Optimized: S_u = S_p = sqrt(2 max(lambda, 0) / max(mu, mu_floor)) at the
/// interface nodes, S_lambda = 1, signed as above.
TransmissionSpec transmission_params(const ScalarField& lambda, const ModelParams& params,
                                     const SubdomainLayout& layout, TransmissionKind kind, double mu_floor = 1e-8);

OptState restrict_state(const OptState& y, const Window& w);
ProblemData restrict_data(const ProblemData& data, const Window& w);

/// Transmission rows of strip j in local coordinates, with neighbour traces
/// read from the global iterate y.
Interfaces interface_rows(const OptState& y, const SubdomainLayout& layout, const TransmissionSpec& spec, int j);

/// Solves strip j starting from the restriction of y.
SsnResult solve_subdomain(const OptState& y, const ProblemData& data, const ModelParams& params,
                          const SubdomainLayout& layout, const TransmissionSpec& spec, int j, const SsnConfig& config);

/// Partition-of-unity weight of strip j at global column i (0 outside).
double merge_weight(const SubdomainLayout& layout, int j, int i);

/// Blends one local state per strip into a global one.
OptState merge(const std::vector<OptState>& locals, const SubdomainLayout& layout);

/// Mean over adjacent strip pairs of the Euclidean norm of the lambda
/// difference on their shared columns. Requires M >= 2.
double subdomain_gap(const std::vector<OptState>& locals, const SubdomainLayout& layout);

struct DdConfig {
    int m_sub = 2;
    int overlap = 20;
    TransmissionKind kind = TransmissionKind::Optimized;
    int outer_iters = 2;
    double gap_tol = 0.0;  // stop early once the gap drops to this value (0 disables)
    double mu_floor = 1e-8;
    int threads = 1;
    SsnConfig ssn;
};

struct SubdomainRecord {
    int outer_iter = 0;
    int subdomain = 0;
    SsnReport report;
    double residual = 0.0;
    double gap_lambda = 0.0;
    double wall_seconds = 0.0;
};

struct DdResult {
    OptState y;
    std::vector<double> gaps;  // one per outer iteration (empty for M = 1)
    std::vector<SubdomainRecord> records;
    SubdomainLayout layout;
};

/// Runs the outer Schwarz loop. M = 1 is a plain ssn_solve on the whole grid.
/// Subdomain solves run on up to `threads` workers; results do not depend on
/// scheduling. A SolverError from a strip is rethrown with its index.
DdResult dd_solve(const OptState& y0, const ProblemData& data, const ModelParams& params, const DdConfig& config);

/// Writes `outer_iter,subdomain,ssn_iters,residual,gap_lambda,wall_seconds` rows.
void write_dd_csv(std::ostream& out, const DdResult& result, bool header = true);

}  // namespace tvlearn
