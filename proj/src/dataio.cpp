#include "muse/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "muse/csv.hpp"

namespace muse::dataio {

// --- grids and alignment ---------------------------------------------------

std::vector<double> LabelGrid::timestamps() const
{
    std::vector<double> t(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) t[static_cast<std::size_t>(k)] = at(k);
    return t;
}

LabelGrid LabelGrid::from_timestamps(const std::vector<double>& ts)
{
    if (ts.empty()) throw ParameterError("label grid: no timestamps");
    LabelGrid g;
    g.start_ms = ts.front();
    g.count = static_cast<Index>(ts.size());
    if (ts.size() == 1) return g;
    g.step_ms = (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);
    if (!(g.step_ms > 0)) throw ParameterError("label grid: timestamps not increasing");
    for (std::size_t k = 0; k < ts.size(); ++k)
        if (std::abs(ts[k] - g.at(static_cast<Index>(k))) > 1e-6 * g.step_ms + 1e-9)
            throw ParameterError("label grid: timestamps are not uniform");
    return g;
}

LabelGrid LabelGrid::from_rate(double rate_hz, Index count, double start_ms)
{
    if (!(rate_hz > 0)) throw ParameterError("label grid: rate must be positive");
    return {start_ms, 1000.0 / rate_hz, count};
}

namespace {

void check_sorted(const std::vector<double>& ts, const char* what)
{
    for (std::size_t i = 1; i < ts.size(); ++i)
        if (!(ts[i] > ts[i - 1])) throw ParameterError(std::string(what) + ": timestamps are not strictly increasing");
}

} // namespace

FeatureSequence align_to_labels(const FeatureSequence& features, const LabelGrid& grid)
{
    if (static_cast<Index>(features.timestamps_ms.size()) != features.matrix.rows())
        throw ParameterError("align_to_labels: timestamp count differs from row count");
    check_sorted(features.timestamps_ms, "align_to_labels");

    FeatureSequence out;
    out.recording_id = features.recording_id;
    out.feature_name = features.feature_name;
    out.sample_rate_hz = 1000.0 / grid.step_ms;
    out.timestamps_ms = grid.timestamps();
    out.matrix = Matrix::Zero(grid.count, features.matrix.cols());

    const auto& ts = features.timestamps_ms;
    const double half = 0.5 * grid.step_ms + 1e-9;
    for (Index k = 0; k < grid.count; ++k) {
        const double t = grid.at(k);
        const auto it = std::lower_bound(ts.begin(), ts.end(), t);
        std::optional<std::size_t> best;
        double best_d = std::numeric_limits<double>::infinity();
        if (it != ts.begin()) {
            best = static_cast<std::size_t>(std::distance(ts.begin(), it) - 1);
            best_d = t - ts[*best];
        }
        if (it != ts.end() && *it - t < best_d) {
            best = static_cast<std::size_t>(std::distance(ts.begin(), it));
            best_d = *it - t;
        }
        if (best && best_d <= half) out.matrix.row(k) = features.matrix.row(static_cast<Index>(*best));
    }
    return out;
}

FeatureSequence align_to_labels(const WordFeatures& words, const LabelGrid& grid, std::string recording_id,
                                std::string feature_name)
{
    const auto n = words.start_ms.size();
    if (words.end_ms.size() != n || static_cast<Index>(n) != words.matrix.rows())
        throw ParameterError("align_to_labels: word interval count differs from row count");
    for (std::size_t i = 0; i < n; ++i) {
        if (words.end_ms[i] < words.start_ms[i]) throw ParameterError("align_to_labels: word ends before it starts");
        if (i > 0 && words.start_ms[i] < words.start_ms[i - 1])
            throw ParameterError("align_to_labels: word timestamps are not sorted");
    }

    FeatureSequence out;
    out.recording_id = std::move(recording_id);
    out.feature_name = std::move(feature_name);
    out.sample_rate_hz = 1000.0 / grid.step_ms;
    out.timestamps_ms = grid.timestamps();
    out.matrix = Matrix::Zero(grid.count, words.matrix.cols());
    constexpr double eps = 1e-9;
    for (std::size_t w = 0; w < n; ++w) {
        const auto first = static_cast<Index>(std::ceil((words.start_ms[w] - grid.start_ms) / grid.step_ms - eps));
        const auto last = static_cast<Index>(std::floor((words.end_ms[w] - grid.start_ms) / grid.step_ms + eps));
        for (Index k = std::max<Index>(0, first); k <= std::min(last, grid.count - 1); ++k)
            out.matrix.row(k) = words.matrix.row(static_cast<Index>(w));
    }
    return out;
}

// --- windowing -------------------------------------------------------------

void WindowSpec::validate() const
{
    if (window_steps < 1) throw ParameterError("window: window must be >= 1");
    if (hop_steps < 1 || hop_steps > window_steps) throw ParameterError("window: hop must lie in [1, window]");
}

std::vector<WindowSlice> window(Index length, const WindowSpec& spec)
{
    spec.validate();
    if (length < 1) throw ParameterError("window: empty sequence");
    std::vector<WindowSlice> out;
    for (Index start = 0; start < length; start += spec.hop_steps)
        out.push_back({start, std::min(spec.window_steps, length - start)});
    return out;
}

// --- partitions and segments -----------------------------------------------

std::string_view to_string(Split split)
{
    switch (split) {
    case Split::train: return "train";
    case Split::devel: return "devel";
    case Split::test: return "test";
    }
    return "unknown";
}

Split parse_split(std::string_view name)
{
    if (name == "train") return Split::train;
    if (name == "devel" || name == "dev" || name == "development") return Split::devel;
    if (name == "test") return Split::test;
    throw DataError("unknown partition '" + std::string(name) + "'");
}

std::vector<std::string> Partition::recordings(Split split) const
{
    std::vector<std::string> out;
    for (const auto& [rec, s] : split_of)
        if (s == split) out.push_back(rec);
    return out;
}

Partition read_partition(const fs::path& path)
{
    const auto t = io::read_csv(path);
    const auto rec = t.column("recording_id");
    const auto part = t.column("partition");
    Partition p;
    for (const auto& row : t.rows) {
        const Split s = parse_split(row[part]);
        const auto [it, inserted] = p.split_of.emplace(row[rec], s);
        if (!inserted && it->second != s)
            throw DataError("recording '" + row[rec] + "' appears in both " + std::string(to_string(it->second))
                            + " and " + std::string(to_string(s)));
    }
    return p;
}

void write_partition(const fs::path& path, const Partition& partition)
{
    io::Table t{{"recording_id", "partition"}, {}};
    for (const auto& [rec, s] : partition.split_of) t.rows.push_back({rec, std::string(to_string(s))});
    io::write_csv(path, t);
}

std::vector<Segment> merge_segments(std::vector<Segment> segments, double max_gap_ms, const SameGroup& same_group)
{
    std::stable_sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
        return a.recording_id != b.recording_id ? a.recording_id < b.recording_id : a.start_ms < b.start_ms;
    });
    const SameGroup group = same_group ? same_group : [](const Segment& a, const Segment& b) { return a.group == b.group; };
    std::vector<Segment> out;
    for (auto& s : segments) {
        if (!out.empty()) {
            auto& last = out.back();
            if (last.recording_id == s.recording_id && s.start_ms - last.end_ms < max_gap_ms && group(last, s)) {
                last.end_ms = std::max(last.end_ms, s.end_ms);
                continue;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Segment> read_segments(const fs::path& path)
{
    const auto t = io::read_csv(path);
    const auto id = t.column("segment_id");
    const auto rec = t.column("recording_id");
    const auto start = t.column("start_ms");
    const auto end = t.column("end_ms");
    const auto part = t.column("partition");
    std::optional<std::size_t> group;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == "group") group = i;
    std::vector<Segment> out;
    for (const auto& row : t.rows) {
        Segment s{row[id], row[rec], io::parse_double(row[start], path.string()), io::parse_double(row[end], path.string()),
                  row[part], group ? row[*group] : std::string()};
        if (s.end_ms < s.start_ms) throw DataError("segment '" + s.segment_id + "' ends before it starts");
        out.push_back(std::move(s));
    }
    return out;
}

void write_segments(const fs::path& path, const std::vector<Segment>& segments)
{
    io::Table t{{"segment_id", "recording_id", "start_ms", "end_ms", "partition"}, {}};
    for (const auto& s : segments)
        t.rows.push_back({s.segment_id, s.recording_id, io::format_double(s.start_ms), io::format_double(s.end_ms), s.partition});
    io::write_csv(path, t);
}

std::map<std::string, int> read_labels(const fs::path& path)
{
    const auto t = io::read_csv(path);
    const auto id = t.column("segment_id");
    const auto cls = t.column("class");
    std::map<std::string, int> out;
    for (const auto& row : t.rows) out[row[id]] = static_cast<int>(io::parse_long(row[cls], path.string()));
    return out;
}

void write_labels(const fs::path& path, const std::vector<std::pair<std::string, int>>& labels)
{
    io::Table t{{"segment_id", "class"}, {}};
    for (const auto& [id, c] : labels) t.rows.push_back({id, std::to_string(c)});
    io::write_csv(path, t);
}

// --- series ----------------------------------------------------------------

double infer_rate_hz(const std::vector<double>& ts, const std::string& context)
{
    if (ts.size() < 2) throw DataError(context + ": cannot infer a sample rate from fewer than two rows");
    const auto grid = [&] {
        try {
            return LabelGrid::from_timestamps(ts);
        } catch (const ParameterError& e) {
            throw DataError(context + ": " + e.what());
        }
    }();
    return 1000.0 / grid.step_ms;
}

Series read_series(const fs::path& path, std::string_view value_column)
{
    const auto t = io::read_csv(path);
    const auto tc = t.column("timestamp_ms");
    const auto vc = t.column(value_column);
    Series s;
    s.values.resize(static_cast<Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        s.timestamps_ms.push_back(io::parse_double(t.rows[i][tc], path.string()));
        s.values(static_cast<Index>(i)) = io::parse_double(t.rows[i][vc], path.string());
    }
    if (s.timestamps_ms.empty()) throw DataError("'" + path.string() + "' has no rows");
    return s;
}

void write_series(const fs::path& path, std::string_view value_column, const Vector& values, double rate_hz,
                  double start_ms)
{
    io::Table t{{"timestamp_ms", std::string(value_column)}, {}};
    t.rows.reserve(static_cast<std::size_t>(values.size()));
    const double step = 1000.0 / rate_hz;
    for (Index k = 0; k < values.size(); ++k)
        t.rows.push_back({io::format_double(start_ms + static_cast<double>(k) * step), io::format_double(values(k))});
    io::write_csv(path, t);
}

signal::AnnotationTrace read_annotation(const fs::path& path, std::string rater_id, signal::SignalKind kind)
{
    auto s = read_series(path, "value");
    signal::AnnotationTrace trace;
    trace.rater_id = std::move(rater_id);
    trace.kind = kind;
    trace.sample_rate_hz = s.timestamps_ms.size() >= 2 ? infer_rate_hz(s.timestamps_ms, path.string()) : 1.0;
    trace.values = std::move(s.values);
    return trace;
}

void write_annotation(const fs::path& path, const signal::AnnotationTrace& trace)
{
    write_series(path, "value", trace.values, trace.sample_rate_hz);
}

std::vector<std::string> list_csv_stems(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

signal::RaterSet read_rater_set(const fs::path& root, const std::string& recording_id, signal::SignalKind kind)
{
    const auto dir = root / recording_id / std::string(signal::to_string(kind));
    signal::RaterSet set;
    set.recording_id = recording_id;
    for (const auto& rater : list_csv_stems(dir)) set.traces.push_back(read_annotation(dir / (rater + ".csv"), rater, kind));
    return set;
}

std::vector<std::string> list_recordings(const fs::path& annotation_root)
{
    if (!fs::is_directory(annotation_root)) throw DataError("'" + annotation_root.string() + "' is not a directory");
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(annotation_root))
        if (e.is_directory()) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

FeatureSequence read_features(const fs::path& path, std::string recording_id, std::string feature_name)
{
    const auto t = io::read_csv(path);
    const auto tc = t.column("timestamp_ms");
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (i != tc) cols.push_back(i);
    FeatureSequence f;
    f.recording_id = recording_id.empty() ? path.stem().string() : std::move(recording_id);
    f.feature_name = std::move(feature_name);
    f.matrix.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        f.timestamps_ms.push_back(io::parse_double(t.rows[r][tc], path.string()));
        for (std::size_t c = 0; c < cols.size(); ++c)
            f.matrix(static_cast<Index>(r), static_cast<Index>(c)) = io::parse_double(t.rows[r][cols[c]], path.string());
    }
    try {
        f.sample_rate_hz = f.timestamps_ms.size() >= 2 ? 1000.0 / LabelGrid::from_timestamps(f.timestamps_ms).step_ms : 0.0;
    } catch (const ParameterError&) {
        f.sample_rate_hz = 0.0;
    }
    return f;
}

void write_features(const fs::path& path, const FeatureSequence& features)
{
    if (static_cast<Index>(features.timestamps_ms.size()) != features.matrix.rows())
        throw ParameterError("write_features: timestamp count differs from row count");
    io::Table t;
    t.header.push_back("timestamp_ms");
    for (Index c = 0; c < features.matrix.cols(); ++c) t.header.push_back("f" + std::to_string(c));
    for (Index r = 0; r < features.matrix.rows(); ++r) {
        std::vector<std::string> row{io::format_double(features.timestamps_ms[static_cast<std::size_t>(r)])};
        for (Index c = 0; c < features.matrix.cols(); ++c) row.push_back(io::format_double(features.matrix(r, c)));
        t.rows.push_back(std::move(row));
    }
    io::write_csv(path, t);
}

} // namespace muse::dataio
