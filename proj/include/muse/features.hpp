#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "muse/signal.hpp"

namespace muse::discretize {

enum class Target { valence, arousal };

std::string_view to_string(Target target);
Target parse_target(std::string_view name);

// Named segment-level statistics of a gold-standard excerpt.
struct SegmentFeatures {
    std::string segment_id;
    Target target = Target::arousal;
    std::vector<std::string> names;
    Vector values;

    [[nodiscard]] double operator[](std::string_view name) const;
};

// Arousal: median, std, q10, q90, relEnergy, relSoC, relPeaks, relLSBMe,
// relLSAMe, relCBMe. Valence additionally: mean, q5, q25, q33, q66, q75,
// q95, PreDa.
[[nodiscard]] const std::vector<std::string>& feature_names(Target target);

// Quantile by linear interpolation between order statistics.
[[nodiscard]] double quantile(const Vector& values, double q);

// Relative features are divided by the segment length, except relSoC
// which is divided by the number of differences.
[[nodiscard]] SegmentFeatures segment_features(const Vector& segment, Target target, std::string segment_id = {});

} // namespace muse::discretize
