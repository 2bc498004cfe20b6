#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "muse/dataio.hpp"
#include "muse/signal.hpp"

namespace muse::synth {

struct SynthConfig {
    std::uint64_t seed = 101;
    double duration_s = 300.0;
    double rate_hz = 2.0;
    int n_raters = 5;
    double max_lag_s = 2.0;
    // latent sinusoid periods; a 2 s lag barely matters on slower signals
    double min_period_s = 6.0;
    double max_period_s = 30.0;
    double noise_sigma = 0.05;
    double scale_jitter = 0.2;  // rater gain drawn from [1 - j, 1 + j]
    double offset_jitter = 0.2; // rater offset drawn from [-j, j]
    double eda_drift = 0.5;
    double eda_rate_hz = 1000.0;
    Index feature_dim = 8;
    double feature_noise = 0.1;

    void validate() const;
    [[nodiscard]] Index length() const;
};

// Smoothed sum of 3-6 random sinusoids with periods in [min_period_s,
// max_period_s], clipped to [-1, 1].
[[nodiscard]] Vector gen_latent(const SynthConfig& config);

struct GeneratedRaters {
    signal::RaterSet set;
    std::vector<double> lags_s; // positive lag: the rater reacts late
    std::vector<double> scales;
    std::vector<double> offsets;
};

// rater_k(t) = a_k latent(t - lag_k) + b_k + noise
[[nodiscard]] GeneratedRaters gen_raters(const Vector& latent, const SynthConfig& config,
                                         signal::SignalKind kind = signal::SignalKind::arousal,
                                         std::string recording_id = "synthetic");

// Non-negative skin-conductance-like signal at config.eda_rate_hz: slow
// drift plus a response that follows the latent signal.
[[nodiscard]] signal::AnnotationTrace gen_eda(const Vector& latent, const SynthConfig& config);

// Random linear map of (latent, latent^2, 1) plus per-dimension noise. The
// map depends on config.seed only, the noise also on the recording id.
[[nodiscard]] dataio::FeatureSequence gen_features(const Vector& latent, const SynthConfig& config,
                                                   std::string feature_name = "synthetic",
                                                   std::string recording_id = "synthetic");

struct CorpusConfig {
    SynthConfig base;
    int recordings = 10;
    std::vector<std::string> feature_sets = {"audio", "video"};
    std::vector<double> feature_noise = {0.3, 0.8};
    double segment_s = 20.0;
    bool write_eda = true;
};

// Writes annotations/, latent/, eda/, features/, partition.csv and
// segments.csv under `root` using the regular data layouts.
void write_corpus(const std::filesystem::path& root, const CorpusConfig& config);

} // namespace muse::synth
