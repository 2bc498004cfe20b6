#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "muse/error.hpp"
#include "muse/signal.hpp"

namespace muse::align {

// Monotone alignment from (0, 0) to (n-1, m-1). Pairs are (source, reference).
struct WarpPath {
    std::vector<std::pair<Index, Index>> pairs;
    double cost = 0.0;
};

// Dynamic time warping with absolute-difference local cost and an optional
// Sakoe-Chiba radius |i - j| <= band. Ties in the backtrace (relative
// 1e-11) prefer the diagonal step, then a source advance, then a reference
// advance.
template <typename A, typename B>
[[nodiscard]] WarpPath dtw(const Eigen::MatrixBase<A>& source, const Eigen::MatrixBase<B>& reference,
                           std::optional<Index> band = std::nullopt)
{
    const Index n = source.size();
    const Index m = reference.size();
    if (n == 0 || m == 0) throw ParameterError("dtw: empty input");
    const Index radius = band.value_or(std::max(n, m));
    if (radius < 0) throw ParameterError("dtw: negative band");
    if (radius < std::abs(n - m))
        throw ParameterError("dtw: band " + std::to_string(radius) + " cannot connect lengths " + std::to_string(n)
                             + " and " + std::to_string(m));

    // Column i of `acc` holds reference indices j with j - i in [-shift, reach].
    const Index shift = std::min(radius, n - 1);
    const Index reach = std::min(radius, m - 1);
    const Index width = shift + reach + 1;
    constexpr double inf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Constant(width, n, inf);
    auto in_band = [&](Index i, Index j) { return j >= 0 && j < m && std::abs(i - j) <= radius; };
    auto at = [&](Index i, Index j) -> double& { return acc(j - i + shift, i); };
    auto get = [&](Index i, Index j) { return (i >= 0 && in_band(i, j)) ? at(i, j) : inf; };

    for (Index i = 0; i < n; ++i) {
        const Index lo = std::max<Index>(0, i - radius);
        const Index hi = std::min<Index>(m - 1, i + radius);
        for (Index j = lo; j <= hi; ++j) {
            const double local = std::abs(static_cast<double>(source(i)) - static_cast<double>(reference(j)));
            if (i == 0 && j == 0) {
                at(i, j) = local;
                continue;
            }
            const double best = std::min({get(i - 1, j - 1), get(i - 1, j), get(i, j - 1)});
            at(i, j) = best + local;
        }
    }

    WarpPath path;
    path.cost = at(n - 1, m - 1);
    Index i = n - 1;
    Index j = m - 1;
    path.pairs.emplace_back(i, j);
    while (i > 0 || j > 0) {
        const double diag = get(i - 1, j - 1);
        const double src = get(i - 1, j);
        const double ref = get(i, j - 1);
        // Costs equal up to rounding count as tied, otherwise an affine
        // rescaling of the input could flip the path.
        const double low = std::min({diag, src, ref});
        const double slack = 1e-11 * (1.0 + low);
        if (diag <= low + slack) {
            --i;
            --j;
        } else if (src <= low + slack) {
            --i;
        } else {
            --j;
        }
        path.pairs.emplace_back(i, j);
    }
    std::reverse(path.pairs.begin(), path.pairs.end());
    return path;
}

// Source samples averaged onto each reference index they map to.
[[nodiscard]] Vector warp_onto_reference(const Vector& source, const WarpPath& path, Index reference_length);

enum class ReferenceStrategy {
    mean,        // reference := mean of the current warped traces, iterated
    first_rater, // every trace aligned once to the first trace
};

struct AlignConfig {
    int max_iter = 20;
    double tol = 1e-6;
    std::optional<Index> band;
    double default_band_fraction = 0.1;
    ReferenceStrategy strategy = ReferenceStrategy::mean;
};

struct AlignmentResult {
    std::vector<Vector> warped_traces;
    std::vector<WarpPath> paths;
    Vector reference;
    Index band = 0;
    int iterations = 0;
    bool converged = false;
};

[[nodiscard]] Index default_band(Index length, double fraction = 0.1);

// Iterative reference-based alignment of several equal-length traces.
// Inputs are re-standardised before alignment.
[[nodiscard]] AlignmentResult multi_align(const signal::RaterSet& set, const AlignConfig& config = {});
[[nodiscard]] AlignmentResult multi_align(const std::vector<Vector>& traces, const AlignConfig& config = {});

// Mean DTW cost over all unordered pairs of traces.
[[nodiscard]] double mean_pairwise_dtw_cost(const std::vector<Vector>& traces, std::optional<Index> band);

} // namespace muse::align
