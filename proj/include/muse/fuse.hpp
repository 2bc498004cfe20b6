#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "muse/align.hpp"
#include "muse/signal.hpp"

namespace muse::fuse {

// Evaluator weighted estimator: each trace is weighted by its Pearson
// correlation with the mean of all other traces, clipped at zero and
// normalised. Falls back to uniform weights when every raw weight is zero.
[[nodiscard]] std::vector<double> ewe_weights(const std::vector<Vector>& traces);

// Pointwise weighted average.
[[nodiscard]] Vector ewe_fuse(const std::vector<Vector>& traces, std::span<const double> weights);

// Index of the smallest weight, lowest index on ties.
[[nodiscard]] std::size_t lowest_weight_index(std::span<const double> weights);

struct Agreement {
    double mean = 0.0;
    double std = 0.0;
    int pairs = 0; // number of rater pairs with a defined correlation
};

// Mean and population std of pairwise Pearson CC between traces. Pairs
// involving a constant trace are skipped; with no defined pair the result
// carries NaN statistics.
[[nodiscard]] Agreement pairwise_agreement(const std::vector<Vector>& traces);

struct RaawConfig {
    align::AlignConfig align;
};

struct GoldStandard {
    std::string recording_id;
    signal::SignalKind kind = signal::SignalKind::arousal;
    double sample_rate_hz = 1.0;
    Vector values;
    std::vector<std::string> rater_ids;
    std::vector<double> weights;
    std::vector<bool> degenerate;
    align::AlignmentResult alignment;
    // Post-alignment inter-rater agreement; the pre-alignment values are kept
    // alongside for reference.
    Agreement agreement;
    Agreement agreement_pre;
    // Set by physio_fuse: the annotator replaced by the physiological signal.
    std::optional<std::string> removed_rater;
};

// Standardise, align, weight and fuse the traces of one recording.
[[nodiscard]] GoldStandard raaw(const signal::RaterSet& set, const RaawConfig& config = {});

struct PhysioConfig {
    RaawConfig raaw;
    // Defaults to the annotation sample rate.
    std::optional<double> target_hz;
    Index sg_window = 26;
    Index sg_order = 3;
    bool smooth = true;
};

// Brings a physiological trace onto the label grid: resample, smooth,
// standardise, then truncate or hold the last value to `length` samples.
[[nodiscard]] signal::AnnotationTrace prepare_physio(const signal::AnnotationTrace& eda, double label_hz, Index length,
                                                     const PhysioConfig& config);

// RAAW where the lowest-weighted annotator is replaced by the EDA signal.
[[nodiscard]] GoldStandard physio_fuse(const signal::RaterSet& set, const signal::AnnotationTrace& eda,
                                       const PhysioConfig& config = {});

// Mean and population std of per-recording agreement. Recordings without a
// defined agreement are skipped with a warning.
[[nodiscard]] Agreement agreement_stats(std::span<const GoldStandard> gold_standards);

} // namespace muse::fuse
