#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "muse/signal.hpp"

namespace muse::dataio {

namespace fs = std::filesystem;

// A feature stream of one recording: time x dim.
struct FeatureSequence {
    std::string recording_id;
    std::string feature_name;
    double sample_rate_hz = 0.0; // 0 when the timestamps are not uniform
    Matrix matrix;
    std::vector<double> timestamps_ms;
};

// Word-level features with their [start, end] intervals.
struct WordFeatures {
    std::vector<double> start_ms;
    std::vector<double> end_ms;
    Matrix matrix;
};

struct LabelGrid {
    double start_ms = 0.0;
    double step_ms = 250.0;
    Index count = 0;

    [[nodiscard]] double at(Index k) const { return start_ms + static_cast<double>(k) * step_ms; }
    [[nodiscard]] std::vector<double> timestamps() const;
    [[nodiscard]] static LabelGrid from_timestamps(const std::vector<double>& timestamps_ms);
    [[nodiscard]] static LabelGrid from_rate(double rate_hz, Index count, double start_ms = 0.0);
};

// Frame features matched to each label step by nearest timestamp within
// half a step; unmatched steps get a zero row.
[[nodiscard]] FeatureSequence align_to_labels(const FeatureSequence& features, const LabelGrid& grid);

// Word features repeated over every label step inside [start, end]; steps
// outside any word get a zero row. A later word overrides an earlier one
// at a shared boundary step.
[[nodiscard]] FeatureSequence align_to_labels(const WordFeatures& words, const LabelGrid& grid,
                                              std::string recording_id = {}, std::string feature_name = {});

struct WindowSpec {
    Index window_steps = 200;
    Index hop_steps = 100;

    void validate() const;
};

struct WindowSlice {
    Index start = 0;
    Index length = 0;
    bool operator==(const WindowSlice&) const = default;
};

// Windows start at 0, hop, 2 hop, ... while start < length; the last ones
// are truncated at the sequence end.
[[nodiscard]] std::vector<WindowSlice> window(Index length, const WindowSpec& spec);

enum class Split { train, devel, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct Partition {
    std::map<std::string, Split> split_of;

    [[nodiscard]] std::vector<std::string> recordings(Split split) const;
};

// Rejects any recording listed under two different splits.
[[nodiscard]] Partition read_partition(const fs::path& path);
void write_partition(const fs::path& path, const Partition& partition);

struct Segment {
    std::string segment_id;
    std::string recording_id;
    double start_ms = 0.0;
    double end_ms = 0.0;
    std::string partition;
    std::string group;
};

using SameGroup = std::function<bool(const Segment&, const Segment&)>;

// Merges consecutive segments of the same recording whose gap is strictly
// below max_gap_ms and for which same_group holds (default: equal `group`).
[[nodiscard]] std::vector<Segment> merge_segments(std::vector<Segment> segments, double max_gap_ms = 2000.0,
                                                  const SameGroup& same_group = {});

[[nodiscard]] std::vector<Segment> read_segments(const fs::path& path);
void write_segments(const fs::path& path, const std::vector<Segment>& segments);

[[nodiscard]] std::map<std::string, int> read_labels(const fs::path& path);
void write_labels(const fs::path& path, const std::vector<std::pair<std::string, int>>& labels);

// `timestamp_ms,<column>` series on a uniform grid.
struct Series {
    std::vector<double> timestamps_ms;
    Vector values;
};

[[nodiscard]] Series read_series(const fs::path& path, std::string_view value_column);
void write_series(const fs::path& path, std::string_view value_column, const Vector& values, double rate_hz,
                  double start_ms = 0.0);

// Sample rate implied by uniformly spaced timestamps.
[[nodiscard]] double infer_rate_hz(const std::vector<double>& timestamps_ms, const std::string& context);

// One annotation file: `timestamp_ms,value`.
[[nodiscard]] signal::AnnotationTrace read_annotation(const fs::path& path, std::string rater_id,
                                                      signal::SignalKind kind);
void write_annotation(const fs::path& path, const signal::AnnotationTrace& trace);

// `<root>/<recording_id>/<kind>/<rater_id>.csv`, raters sorted by id.
[[nodiscard]] signal::RaterSet read_rater_set(const fs::path& root, const std::string& recording_id,
                                              signal::SignalKind kind);
[[nodiscard]] std::vector<std::string> list_recordings(const fs::path& annotation_root);

// `timestamp_ms,f0,f1,...`
[[nodiscard]] FeatureSequence read_features(const fs::path& path, std::string recording_id = {},
                                            std::string feature_name = {});
void write_features(const fs::path& path, const FeatureSequence& features);

// `<root>/<recording_id>.csv` stems, sorted.
[[nodiscard]] std::vector<std::string> list_csv_stems(const fs::path& dir);

} // namespace muse::dataio
