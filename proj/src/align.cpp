#include "muse/align.hpp"

namespace muse::align {

Vector warp_onto_reference(const Vector& source, const WarpPath& path, Index reference_length)
{
    Vector sum = Vector::Zero(reference_length);
    Eigen::VectorXi count = Eigen::VectorXi::Zero(reference_length);
    for (const auto& [src, ref] : path.pairs) {
        if (src < 0 || src >= source.size() || ref < 0 || ref >= reference_length)
            throw ParameterError("warp_onto_reference: path index out of range");
        sum(ref) += source(src);
        ++count(ref);
    }
    for (Index j = 0; j < reference_length; ++j) {
        if (count(j) == 0) throw ParameterError("warp_onto_reference: path does not cover reference index " + std::to_string(j));
        sum(j) /= count(j);
    }
    return sum;
}

Index default_band(Index length, double fraction)
{
    return std::max<Index>(1, static_cast<Index>(std::ceil(fraction * static_cast<double>(length))));
}

namespace {

Vector mean_of(const std::vector<Vector>& traces)
{
    Vector m = Vector::Zero(traces.front().size());
    for (const auto& t : traces) m += t;
    return m / static_cast<double>(traces.size());
}

} // namespace

AlignmentResult multi_align(const std::vector<Vector>& traces, const AlignConfig& config)
{
    if (traces.size() < 2) throw ParameterError("multi_align: at least two traces required");
    const Index length = traces.front().size();
    for (const auto& t : traces) {
        if (t.size() != length) throw ParameterError("multi_align: traces of unequal length");
        if (t.size() == 0) throw ParameterError("multi_align: empty trace");
    }
    if (config.max_iter < 1) throw ParameterError("multi_align: max_iter must be >= 1");

    std::vector<Vector> inputs;
    inputs.reserve(traces.size());
    for (const auto& t : traces) inputs.push_back(signal::standardize(t).values);

    AlignmentResult result;
    result.band = config.band.value_or(default_band(length, config.default_band_fraction));
    result.warped_traces = inputs;
    result.paths.resize(inputs.size());

    auto align_all = [&](const Vector& reference) {
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            result.paths[k] = dtw(inputs[k], reference, result.band);
            result.warped_traces[k] = warp_onto_reference(inputs[k], result.paths[k], length);
        }
    };

    if (config.strategy == ReferenceStrategy::first_rater) {
        result.reference = inputs.front();
        align_all(result.reference);
        result.iterations = 1;
        result.converged = true;
        return result;
    }

    Vector reference = mean_of(inputs);
    for (int it = 0; it < config.max_iter; ++it) {
        align_all(reference);
        Vector next = mean_of(result.warped_traces);
        const double change = (next - reference).cwiseAbs().maxCoeff();
        reference = std::move(next);
        result.iterations = it + 1;
        if (change < config.tol) {
            result.converged = true;
            break;
        }
    }
    result.reference = std::move(reference);
    return result;
}

AlignmentResult multi_align(const signal::RaterSet& set, const AlignConfig& config)
{
    signal::validate(set, 2);
    std::vector<Vector> traces;
    traces.reserve(set.traces.size());
    for (const auto& t : set.traces) traces.push_back(t.values);
    return multi_align(traces, config);
}

double mean_pairwise_dtw_cost(const std::vector<Vector>& traces, std::optional<Index> band)
{
    if (traces.size() < 2) throw ParameterError("mean_pairwise_dtw_cost: at least two traces required");
    double total = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < traces.size(); ++a) {
        for (std::size_t b = a + 1; b < traces.size(); ++b) {
            total += dtw(traces[a], traces[b], band).cost;
            ++pairs;
        }
    }
    return total / pairs;
}

} // namespace muse::align
