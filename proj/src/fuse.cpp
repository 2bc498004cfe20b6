#include "muse/fuse.hpp"

#include <cmath>
#include <limits>

#include "muse/log.hpp"
#include "muse/metrics.hpp"

namespace muse::fuse {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

void check_equal_lengths(const std::vector<Vector>& traces, const char* who)
{
    for (const auto& t : traces)
        if (t.size() != traces.front().size()) throw ParameterError(std::string(who) + ": traces of unequal length");
}

} // namespace

std::vector<double> ewe_weights(const std::vector<Vector>& traces)
{
    if (traces.size() < 2) throw ParameterError("ewe_weights: at least two traces required");
    check_equal_lengths(traces, "ewe_weights");
    if (traces.front().size() < 2) throw ParameterError("ewe_weights: traces need at least two samples");

    Vector total = Vector::Zero(traces.front().size());
    for (const auto& t : traces) total += t;

    const auto others = static_cast<double>(traces.size() - 1);
    std::vector<double> weights(traces.size(), 0.0);
    double sum = 0.0;
    for (std::size_t k = 0; k < traces.size(); ++k) {
        const Vector rest = (total - traces[k]) / others;
        double r = 0.0;
        try {
            r = metrics::pearson(traces[k], rest);
        } catch (const UndefinedError&) {
            r = 0.0;
        }
        weights[k] = std::max(0.0, r);
        sum += weights[k];
    }
    if (sum <= 0.0) return std::vector<double>(traces.size(), 1.0 / static_cast<double>(traces.size()));
    for (auto& w : weights) w /= sum;
    return weights;
}

Vector ewe_fuse(const std::vector<Vector>& traces, std::span<const double> weights)
{
    if (traces.empty()) throw ParameterError("ewe_fuse: no traces");
    if (traces.size() != weights.size()) throw ParameterError("ewe_fuse: trace and weight counts differ");
    check_equal_lengths(traces, "ewe_fuse");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ParameterError("ewe_fuse: weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("ewe_fuse: weights must sum to 1");

    Vector out = Vector::Zero(traces.front().size());
    for (std::size_t k = 0; k < traces.size(); ++k) out += weights[k] * traces[k];
    return out;
}

std::size_t lowest_weight_index(std::span<const double> weights)
{
    if (weights.empty()) throw ParameterError("lowest_weight_index: no weights");
    std::size_t best = 0;
    for (std::size_t k = 1; k < weights.size(); ++k)
        if (weights[k] < weights[best]) best = k;
    return best;
}

Agreement pairwise_agreement(const std::vector<Vector>& traces)
{
    std::vector<double> values;
    for (std::size_t a = 0; a < traces.size(); ++a) {
        for (std::size_t b = a + 1; b < traces.size(); ++b) {
            try {
                values.push_back(metrics::pearson(traces[a], traces[b]));
            } catch (const UndefinedError&) {
            }
        }
    }
    if (values.empty()) return {nan, nan, 0};
    // own aligned copy: reductions over a Map of std::vector storage depend on its address
    const Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
    const double mean = v.mean();
    const double var = (v.array() - mean).square().mean();
    return {mean, std::sqrt(var), static_cast<int>(values.size())};
}

GoldStandard raaw(const signal::RaterSet& set, const RaawConfig& config)
{
    signal::validate(set, 2);

    GoldStandard gold;
    gold.recording_id = set.recording_id;
    gold.kind = set.traces.front().kind;
    gold.sample_rate_hz = set.traces.front().sample_rate_hz;

    std::vector<Vector> standardized;
    for (const auto& t : set.traces) {
        auto s = signal::standardize(t.values);
        if (s.degenerate) warn("recording '" + set.recording_id + "': trace '" + t.rater_id + "' is constant");
        gold.rater_ids.push_back(t.rater_id);
        gold.degenerate.push_back(s.degenerate);
        standardized.push_back(std::move(s.values));
    }
    gold.agreement_pre = pairwise_agreement(standardized);

    gold.alignment = align::multi_align(standardized, config.align);
    gold.weights = ewe_weights(gold.alignment.warped_traces);
    gold.values = ewe_fuse(gold.alignment.warped_traces, gold.weights);
    gold.agreement = pairwise_agreement(gold.alignment.warped_traces);
    return gold;
}

signal::AnnotationTrace prepare_physio(const signal::AnnotationTrace& eda, double label_hz, Index length,
                                       const PhysioConfig& config)
{
    signal::validate(eda);
    if (length < 1) throw ParameterError("prepare_physio: label length must be positive");
    const double target = config.target_hz.value_or(label_hz);
    auto trace = signal::resample(eda, target);
    if (trace.values.size() != length) {
        if (std::abs(trace.values.size() - length) > 1)
            warn("physio trace '" + eda.rater_id + "' has " + std::to_string(trace.values.size())
                 + " samples after resampling, label grid has " + std::to_string(length));
        const Index keep = std::min(trace.values.size(), length);
        Vector fitted(length);
        fitted.head(keep) = trace.values.head(keep);
        if (keep < length) fitted.tail(length - keep).setConstant(trace.values(keep - 1));
        trace.values = std::move(fitted);
    }
    if (config.smooth) {
        const Index window = std::min(config.sg_window, trace.values.size());
        if (window >= 2 && config.sg_order < window) trace = signal::savitzky_golay(trace, window, config.sg_order);
        else if (window < config.sg_window)
            warn("physio trace '" + eda.rater_id + "' shorter than the smoothing window, left unsmoothed");
        else throw ParameterError("prepare_physio: sg_order must be smaller than sg_window");
    }
    trace = signal::standardize(trace);
    if (trace.degenerate) warn("physio trace '" + eda.rater_id + "' is constant; it will receive zero weight");
    return trace;
}

GoldStandard physio_fuse(const signal::RaterSet& set, const signal::AnnotationTrace& eda, const PhysioConfig& config)
{
    signal::validate(set, 2);
    if (eda.kind != signal::SignalKind::physio) throw ParameterError("physio_fuse: EDA trace must be of kind physio");

    const auto& first = set.traces.front();
    if (config.target_hz && *config.target_hz != first.sample_rate_hz)
        throw ParameterError("physio_fuse: target rate differs from the annotation rate");
    auto pseudo = prepare_physio(eda, first.sample_rate_hz, first.values.size(), config);
    pseudo.kind = first.kind;
    pseudo.sample_rate_hz = first.sample_rate_hz;

    const GoldStandard annotators = raaw(set, config.raaw);
    const std::size_t removed = lowest_weight_index(annotators.weights);

    signal::RaterSet substituted;
    substituted.recording_id = set.recording_id;
    for (std::size_t k = 0; k < set.traces.size(); ++k)
        if (k != removed) substituted.traces.push_back(set.traces[k]);
    substituted.traces.push_back(pseudo);

    GoldStandard gold = raaw(substituted, config.raaw);
    gold.removed_rater = set.traces[removed].rater_id;
    return gold;
}

Agreement agreement_stats(std::span<const GoldStandard> gold_standards)
{
    if (gold_standards.empty()) throw ParameterError("agreement_stats: no recordings");
    std::vector<double> values;
    for (const auto& g : gold_standards) {
        if (!std::isfinite(g.agreement.mean)) {
            warn("agreement_stats: recording '" + g.recording_id + "' has no defined inter-rater correlation, skipped");
            continue;
        }
        values.push_back(g.agreement.mean);
    }
    if (values.empty()) throw UndefinedError("agreement_stats: no recording with a defined agreement");
    // own aligned copy: reductions over a Map of std::vector storage depend on its address
    const Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
    const double mean = v.mean();
    return {mean, std::sqrt((v.array() - mean).square().mean()), static_cast<int>(values.size())};
}

} // namespace muse::fuse
