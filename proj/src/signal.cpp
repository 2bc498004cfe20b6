#include "muse/signal.hpp"

namespace muse::signal {

std::string_view to_string(SignalKind kind)
{
    switch (kind) {
    case SignalKind::valence: return "valence";
    case SignalKind::arousal: return "arousal";
    case SignalKind::physio: return "physio";
    }
    return "unknown";
}

SignalKind parse_kind(std::string_view name)
{
    if (name == "valence") return SignalKind::valence;
    if (name == "arousal") return SignalKind::arousal;
    if (name == "physio") return SignalKind::physio;
    throw ParameterError("unknown signal kind '" + std::string(name) + "'");
}

void validate(const AnnotationTrace& trace)
{
    if (trace.values.size() == 0) throw ParameterError("trace '" + trace.rater_id + "' is empty");
    if (!(trace.sample_rate_hz > 0) || !std::isfinite(trace.sample_rate_hz))
        throw ParameterError("trace '" + trace.rater_id + "' has a non-positive sample rate");
    if (!trace.values.allFinite()) throw ParameterError("trace '" + trace.rater_id + "' has non-finite values");
}

void validate(const RaterSet& set, std::size_t min_traces)
{
    if (set.traces.size() < min_traces)
        throw ParameterError("recording '" + set.recording_id + "' has " + std::to_string(set.traces.size())
                             + " trace(s), at least " + std::to_string(min_traces) + " required");
    for (const auto& t : set.traces) validate(t);
    if (set.traces.empty()) return;
    const auto& first = set.traces.front();
    for (const auto& t : set.traces) {
        if (t.kind != first.kind)
            throw ParameterError("recording '" + set.recording_id + "' mixes signal kinds");
        if (t.sample_rate_hz != first.sample_rate_hz)
            throw ParameterError("recording '" + set.recording_id + "' mixes sample rates");
        if (t.values.size() != first.values.size())
            throw ParameterError("recording '" + set.recording_id + "' has traces of unequal length");
    }
}

AnnotationTrace standardize(const AnnotationTrace& trace)
{
    auto s = standardize(trace.values);
    AnnotationTrace out = trace;
    out.values = std::move(s.values);
    out.degenerate = s.degenerate;
    return out;
}

AnnotationTrace resample(const AnnotationTrace& trace, double target_hz)
{
    AnnotationTrace out = trace;
    out.values = resample(trace.values, trace.sample_rate_hz, target_hz);
    out.sample_rate_hz = target_hz;
    return out;
}

AnnotationTrace savitzky_golay(const AnnotationTrace& trace, Index window, Index order)
{
    AnnotationTrace out = trace;
    out.values = savitzky_golay(trace.values, window, order);
    return out;
}

} // namespace muse::signal
