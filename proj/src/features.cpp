#include "muse/features.hpp"

#include <algorithm>
#include <map>

namespace muse::discretize {

std::string_view to_string(Target target)
{
    return target == Target::valence ? "valence" : "arousal";
}

Target parse_target(std::string_view name)
{
    if (name == "valence") return Target::valence;
    if (name == "arousal") return Target::arousal;
    throw ParameterError("unknown target '" + std::string(name) + "'");
}

double SegmentFeatures::operator[](std::string_view name) const
{
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return values(static_cast<Index>(i));
    throw ParameterError("segment feature '" + std::string(name) + "' not present");
}

const std::vector<std::string>& feature_names(Target target)
{
    static const std::vector<std::string> arousal = {"median",  "std",      "q10",      "q90",      "relEnergy",
                                                     "relSoC",  "relPeaks", "relLSBMe", "relLSAMe", "relCBMe"};
    static const std::vector<std::string> valence = [] {
        auto v = arousal;
        for (const char* n : {"mean", "q5", "q25", "q33", "q66", "q75", "q95", "PreDa"}) v.emplace_back(n);
        return v;
    }();
    return target == Target::valence ? valence : arousal;
}

double quantile(const Vector& values, double q)
{
    if (values.size() == 0) throw ParameterError("quantile: empty input");
    if (q < 0.0 || q > 1.0) throw ParameterError("quantile: q outside [0, 1]");
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

namespace {

Index longest_run(const Vector& x, auto&& predicate)
{
    Index best = 0;
    Index run = 0;
    for (Index i = 0; i < x.size(); ++i) {
        run = predicate(x(i)) ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

} // namespace

SegmentFeatures segment_features(const Vector& x, Target target, std::string segment_id)
{
    const Index n = x.size();
    if (n < 2) throw ParameterError("segment_features: segment needs at least two samples");
    if (!x.allFinite()) throw ParameterError("segment_features: non-finite values");

    const double len = static_cast<double>(n);
    const double mean = x.mean();
    std::map<std::string, double> f;
    f["median"] = quantile(x, 0.5);
    f["std"] = std::sqrt((x.array() - mean).square().mean());
    f["q10"] = quantile(x, 0.10);
    f["q90"] = quantile(x, 0.90);
    f["relEnergy"] = x.squaredNorm() / len;
    f["relSoC"] = (x.tail(n - 1) - x.head(n - 1)).cwiseAbs().sum() / static_cast<double>(n - 1);

    Index peaks = 0;
    for (Index i = 1; i + 1 < n; ++i)
        if (x(i) > x(i - 1) && x(i) > x(i + 1)) ++peaks;
    f["relPeaks"] = static_cast<double>(peaks) / len;
    f["relLSBMe"] = static_cast<double>(longest_run(x, [&](double v) { return v < mean; })) / len;
    f["relLSAMe"] = static_cast<double>(longest_run(x, [&](double v) { return v > mean; })) / len;
    f["relCBMe"] = static_cast<double>((x.array() < mean).count()) / len;

    if (target == Target::valence) {
        f["mean"] = mean;
        for (auto [name, q] : {std::pair{"q5", 0.05}, {"q25", 0.25}, {"q33", 0.33}, {"q66", 0.66}, {"q75", 0.75}, {"q95", 0.95}})
            f[name] = quantile(x, q);
        std::map<double, Index> counts;
        for (Index i = 0; i < n; ++i) ++counts[x(i)];
        Index repeated = 0;
        for (const auto& [value, c] : counts)
            if (c > 1) repeated += c;
        f["PreDa"] = static_cast<double>(repeated) / len;
    }

    SegmentFeatures out;
    out.segment_id = std::move(segment_id);
    out.target = target;
    out.names = feature_names(target);
    out.values.resize(static_cast<Index>(out.names.size()));
    for (std::size_t i = 0; i < out.names.size(); ++i) out.values(static_cast<Index>(i)) = f.at(out.names[i]);
    return out;
}

} // namespace muse::discretize
