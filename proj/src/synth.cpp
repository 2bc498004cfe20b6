#include "muse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace muse::synth {

namespace {

// Independent deterministic stream per generator.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

enum : std::uint64_t { latent_tag = 1, rater_tag = 2, eda_tag = 3, feature_tag = 4, feature_noise_tag = 5 };

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Linear interpolation at fractional index, clamped at the edges.
double sample_at(const Vector& x, double pos)
{
    if (pos <= 0.0) return x(0);
    const auto last = static_cast<double>(x.size() - 1);
    if (pos >= last) return x(x.size() - 1);
    const auto lo = static_cast<Index>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    return x(lo) + frac * (x(lo + 1) - x(lo));
}

} // namespace

void SynthConfig::validate() const
{
    if (!(duration_s > 0) || !(rate_hz > 0)) throw ParameterError("synth: duration and rate must be positive");
    if (length() < 2) throw ParameterError("synth: fewer than two samples");
    if (n_raters < 1) throw ParameterError("synth: at least one rater required");
    if (max_lag_s < 0 || max_lag_s > 0.2 * duration_s) throw ParameterError("synth: max lag must lie in [0, 0.2 duration]");
    if (noise_sigma < 0 || scale_jitter < 0 || scale_jitter >= 1 || offset_jitter < 0)
        throw ParameterError("synth: invalid noise or jitter");
    if (feature_dim < 1 || feature_noise < 0) throw ParameterError("synth: invalid feature settings");
    if (!(eda_rate_hz > 0) || eda_drift < 0) throw ParameterError("synth: invalid EDA settings");
    if (!(min_period_s > 0) || max_period_s < min_period_s) throw ParameterError("synth: invalid period range");
}

Index SynthConfig::length() const
{
    return static_cast<Index>(std::llround(duration_s * rate_hz));
}

Vector gen_latent(const SynthConfig& config)
{
    config.validate();
    auto rng = stream(config.seed, latent_tag);
    std::uniform_int_distribution<int> count(3, 6);
    std::uniform_real_distribution<double> period(config.min_period_s, config.max_period_s);
    std::uniform_real_distribution<double> amplitude(0.5, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    const Index n = config.length();
    Vector raw = Vector::Zero(n);
    const int components = count(rng);
    for (int c = 0; c < components; ++c) {
        const double p = period(rng);
        const double a = amplitude(rng);
        const double phi = phase(rng);
        for (Index i = 0; i < n; ++i)
            raw(i) += a * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / config.rate_hz / p + phi);
    }
    raw = signal::standardize(raw).values * 0.8;
    raw = raw.cwiseMax(-1.0).cwiseMin(1.0);

    constexpr Index half = 2;
    Vector smooth(n);
    for (Index i = 0; i < n; ++i) {
        const Index lo = std::max<Index>(0, i - half);
        const Index hi = std::min<Index>(n - 1, i + half);
        smooth(i) = raw.segment(lo, hi - lo + 1).mean();
    }
    return smooth;
}

GeneratedRaters gen_raters(const Vector& latent, const SynthConfig& config, signal::SignalKind kind,
                           std::string recording_id)
{
    config.validate();
    if (latent.size() < 2) throw ParameterError("gen_raters: latent too short");
    auto rng = stream(config.seed, rater_tag);
    std::uniform_real_distribution<double> lag(-config.max_lag_s, config.max_lag_s);
    std::uniform_real_distribution<double> scale(1.0 - config.scale_jitter, 1.0 + config.scale_jitter);
    std::uniform_real_distribution<double> offset(-config.offset_jitter, config.offset_jitter);
    std::normal_distribution<double> noise(0.0, 1.0);

    GeneratedRaters out;
    out.set.recording_id = std::move(recording_id);
    for (int k = 0; k < config.n_raters; ++k) {
        const double lag_s = config.max_lag_s > 0 ? lag(rng) : 0.0;
        const double a = config.scale_jitter > 0 ? scale(rng) : 1.0;
        const double b = config.offset_jitter > 0 ? offset(rng) : 0.0;
        signal::AnnotationTrace trace;
        trace.rater_id = "rater" + std::to_string(k);
        trace.kind = kind;
        trace.sample_rate_hz = config.rate_hz;
        trace.values.resize(latent.size());
        for (Index i = 0; i < latent.size(); ++i) {
            const double e = config.noise_sigma > 0 ? config.noise_sigma * noise(rng) : 0.0;
            trace.values(i) = a * sample_at(latent, static_cast<double>(i) - lag_s * config.rate_hz) + b + e;
        }
        out.lags_s.push_back(lag_s);
        out.scales.push_back(a);
        out.offsets.push_back(b);
        out.set.traces.push_back(std::move(trace));
    }
    return out;
}

signal::AnnotationTrace gen_eda(const Vector& latent, const SynthConfig& config)
{
    config.validate();
    auto rng = stream(config.seed, eda_tag);
    std::uniform_real_distribution<double> drift_period(150.0, 400.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 0.02);
    const double period = drift_period(rng);
    const double phi = phase(rng);

    const auto n = static_cast<Index>(std::llround(config.duration_s * config.eda_rate_hz));
    signal::AnnotationTrace eda;
    eda.rater_id = "eda";
    eda.kind = signal::SignalKind::physio;
    eda.sample_rate_hz = config.eda_rate_hz;
    eda.values.resize(n);
    const double ratio = config.rate_hz / config.eda_rate_hz;
    for (Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / config.eda_rate_hz;
        const double drift = config.eda_drift * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * t / period + phi));
        const double response = 0.8 * 0.5 * (sample_at(latent, static_cast<double>(i) * ratio) + 1.0);
        eda.values(i) = std::max(0.0, 2.0 + drift + response + noise(rng));
    }
    return eda;
}

dataio::FeatureSequence gen_features(const Vector& latent, const SynthConfig& config, std::string feature_name,
                                     std::string recording_id)
{
    config.validate();
    auto map_rng = stream(config.seed, feature_tag);
    auto rng = stream(config.seed ^ fnv1a(recording_id), feature_noise_tag);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix map(config.feature_dim, 3);
    for (Index r = 0; r < map.rows(); ++r)
        for (Index c = 0; c < 3; ++c) map(r, c) = normal(map_rng);

    dataio::FeatureSequence f;
    f.recording_id = std::move(recording_id);
    f.feature_name = std::move(feature_name);
    f.sample_rate_hz = config.rate_hz;
    f.matrix.resize(latent.size(), config.feature_dim);
    for (Index t = 0; t < latent.size(); ++t) {
        const Eigen::Vector3d basis(latent(t), latent(t) * latent(t), 1.0);
        f.matrix.row(t) = (map * basis).transpose();
        if (config.feature_noise > 0)
            for (Index c = 0; c < config.feature_dim; ++c) f.matrix(t, c) += config.feature_noise * normal(rng);
        f.timestamps_ms.push_back(1000.0 * static_cast<double>(t) / config.rate_hz);
    }
    return f;
}

void write_corpus(const std::filesystem::path& root, const CorpusConfig& config)
{
    config.base.validate();
    if (config.recordings < 3) throw ParameterError("write_corpus: at least three recordings required");
    if (config.feature_sets.size() != config.feature_noise.size())
        throw ParameterError("write_corpus: one noise level per feature set required");
    if (!(config.segment_s > 0)) throw ParameterError("write_corpus: segment length must be positive");

    const int n_test = std::max(1, config.recordings / 5);
    const int n_devel = std::max(1, config.recordings / 5);
    const int n_train = config.recordings - n_devel - n_test;
    dataio::Partition partition;
    std::vector<dataio::Segment> segments;

    for (int r = 0; r < config.recordings; ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "rec%03d", r);
        const std::string rec = name;
        const auto split = r < n_train ? dataio::Split::train
                                       : (r < n_train + n_devel ? dataio::Split::devel : dataio::Split::test);
        partition.split_of[rec] = split;

        SynthConfig cfg = config.base;
        cfg.seed = config.base.seed * 1000003ULL + static_cast<std::uint64_t>(r) * 7919ULL;
        std::vector<Vector> latents;
        for (auto kind : {signal::SignalKind::valence, signal::SignalKind::arousal}) {
            SynthConfig k_cfg = cfg;
            k_cfg.seed = cfg.seed + (kind == signal::SignalKind::valence ? 0 : 1);
            const Vector latent = gen_latent(k_cfg);
            latents.push_back(latent);
            const auto kind_name = std::string(signal::to_string(kind));
            dataio::write_series(root / "latent" / kind_name / (rec + ".csv"), "value", latent, cfg.rate_hz);
            const auto raters = gen_raters(latent, k_cfg, kind, rec);
            for (const auto& t : raters.set.traces)
                dataio::write_annotation(root / "annotations" / rec / kind_name / (t.rater_id + ".csv"), t);
        }
        if (config.write_eda) {
            const auto eda = gen_eda(latents[1], cfg);
            dataio::write_annotation(root / "eda" / (rec + ".csv"), eda);
        }
        for (std::size_t s = 0; s < config.feature_sets.size(); ++s) {
            SynthConfig f_cfg = cfg;
            f_cfg.feature_noise = config.feature_noise[s];
            f_cfg.feature_dim = std::max<Index>(1, cfg.feature_dim / 2);
            // one map per feature set, shared by all recordings
            f_cfg.seed = config.base.seed * 1000003ULL + 500009ULL + 2 * s;
            auto valence = gen_features(latents[0], f_cfg, config.feature_sets[s], rec);
            f_cfg.seed += 1;
            const auto arousal = gen_features(latents[1], f_cfg, config.feature_sets[s], rec);
            Matrix both(valence.matrix.rows(), valence.matrix.cols() + arousal.matrix.cols());
            both << valence.matrix, arousal.matrix;
            valence.matrix = std::move(both);
            dataio::write_features(root / "features" / config.feature_sets[s] / (rec + ".csv"), valence);
        }

        const double duration_ms = 1000.0 * static_cast<double>(cfg.length() - 1) / cfg.rate_hz;
        const double step = 1000.0 * config.segment_s;
        int k = 0;
        for (double start = 0.0; start + step <= duration_ms + 1e-9; start += step, ++k) {
            char sid[48];
            std::snprintf(sid, sizeof sid, "%s_s%03d", rec.c_str(), k);
            segments.push_back({sid, rec, start, start + step, std::string(dataio::to_string(split)), {}});
        }
    }
    dataio::write_partition(root / "partition.csv", partition);
    dataio::write_segments(root / "segments.csv", segments);
}

} // namespace muse::synth
