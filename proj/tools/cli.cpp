#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "muse/cluster.hpp"
#include "muse/csv.hpp"
#include "muse/error.hpp"
#include "muse/features.hpp"
#include "muse/fuse.hpp"
#include "muse/latefusion.hpp"
#include "muse/log.hpp"
#include "muse/metrics.hpp"
#include "muse/synth.hpp"
#include "muse/train.hpp"

namespace muse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig default_run_config(seq::Task task)
{
    RunConfig rc;
    rc.task = task;
    switch (task) {
    case seq::Task::wilder:
        rc.grid_hz = 4.0;
        rc.window = {200, 100};
        rc.model.learning_rate = 1e-3;
        break;
    case seq::Task::sent:
        rc.grid_hz = 4.0;
        rc.window = {200, 100};
        rc.model.learning_rate = 5e-3;
        rc.model.head = seq::Head::classification;
        break;
    case seq::Task::stress:
    case seq::Task::physio:
        rc.grid_hz = 2.0;
        rc.window = {300, 50};
        rc.model.learning_rate = 1e-3;
        break;
    }
    return rc;
}

namespace {

// Runs fn(0..n-1) on up to `jobs` threads. The error of the lowest failing
// index is rethrown so that failures do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn)
{
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(std::max<std::size_t>(n, 1))));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

json to_json(const fuse::Agreement& a)
{
    return {{"mean", a.mean}, {"std", a.std}, {"pairs", a.pairs}};
}

void write_json(const fs::path& path, const json& j)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

json gold_metadata(const fuse::GoldStandard& g)
{
    json j;
    j["recording_id"] = g.recording_id;
    j["kind"] = signal::to_string(g.kind);
    j["sample_rate_hz"] = g.sample_rate_hz;
    j["length"] = g.values.size();
    j["rater_ids"] = g.rater_ids;
    j["weights"] = g.weights;
    j["degenerate"] = g.degenerate;
    j["band"] = g.alignment.band;
    j["iterations"] = g.alignment.iterations;
    j["converged"] = g.alignment.converged;
    j["agreement"] = to_json(g.agreement);
    j["agreement_pre"] = to_json(g.agreement_pre);
    if (g.removed_rater) j["removed_rater"] = *g.removed_rater;
    return j;
}

json path_dump(const fuse::GoldStandard& g)
{
    json paths = json::array();
    for (std::size_t k = 0; k < g.alignment.paths.size(); ++k) {
        json pairs = json::array();
        for (const auto& [i, r] : g.alignment.paths[k].pairs) pairs.push_back({i, r});
        paths.push_back({{"rater_id", g.rater_ids[k]}, {"cost", g.alignment.paths[k].cost}, {"pairs", pairs}});
    }
    return paths;
}

align::ReferenceStrategy parse_strategy(const std::string& s)
{
    if (s == "mean") return align::ReferenceStrategy::mean;
    if (s == "first_rater") return align::ReferenceStrategy::first_rater;
    throw ParameterError("unknown reference strategy '" + s + "'");
}

void print_agreement(std::ostream& out, const std::string& label, std::span<const fuse::GoldStandard> golds)
{
    const auto a = fuse::agreement_stats(golds);
    out << label << " recordings = " << golds.size() << '\n';
    out << label << " agreement_mean = " << a.mean << '\n';
    out << label << " agreement_std = " << a.std << '\n';
}

struct Paths {
    std::string data_root;

    [[nodiscard]] fs::path operator()(const std::string& p) const
    {
        fs::path path(p);
        if (!data_root.empty() && path.is_relative()) return fs::path(data_root) / path;
        return path;
    }
};

// --- raaw ------------------------------------------------------------------

struct RaawArgs {
    std::string in, out;
    std::vector<std::string> kinds{"valence", "arousal"};
    std::optional<Index> band;
    int max_iter = 20;
    double tol = 1e-6;
    std::string strategy = "mean";
    bool dump_paths = false;
    int jobs = 1;
    std::uint64_t seed = 101;
};

void cmd_raaw(const RaawArgs& a, const Paths& paths, std::ostream& out, std::ostream& err)
{
    const auto in = paths(a.in);
    const auto dst = paths(a.out);
    fuse::RaawConfig cfg;
    cfg.align.band = a.band;
    cfg.align.max_iter = a.max_iter;
    cfg.align.tol = a.tol;
    cfg.align.strategy = parse_strategy(a.strategy);
    if (a.band && *a.band < 0) throw ParameterError("--band must be non-negative");

    const auto recordings = dataio::list_recordings(in);
    if (recordings.empty()) throw DataError("no recordings under '" + in.string() + "'");
    for (const auto& kind_name : a.kinds) {
        const auto kind = signal::parse_kind(kind_name);
        std::vector<signal::RaterSet> sets(recordings.size());
        parallel_for(recordings.size(), a.jobs, [&](std::size_t i) {
            sets[i] = dataio::read_rater_set(in, recordings[i], kind);
        });
        for (const auto& s : sets) signal::validate(s, 2);

        std::vector<fuse::GoldStandard> golds(sets.size());
        parallel_for(sets.size(), a.jobs, [&](std::size_t i) {
            golds[i] = fuse::raaw(sets[i], cfg);
            const auto& g = golds[i];
            const auto dir = dst / kind_name;
            dataio::write_series(dir / (g.recording_id + ".csv"), "value", g.values, g.sample_rate_hz);
            auto meta = gold_metadata(g);
            meta["strategy"] = a.strategy;
            meta["seed"] = a.seed;
            write_json(dir / (g.recording_id + ".meta.json"), meta);
            if (a.dump_paths) write_json(dir / (g.recording_id + ".paths.json"), path_dump(g));
        });
        err << "raaw: " << kind_name << ": fused " << golds.size() << " recording(s)\n";
        print_agreement(out, kind_name, golds);
    }
}

// --- physio ----------------------------------------------------------------

struct PhysioArgs {
    std::string in, eda, out;
    std::string kind = "arousal";
    Index sg_window = 26;
    Index sg_order = 3;
    double target_hz = 2.0;
    bool no_smooth = false;
    std::optional<Index> band;
    int max_iter = 20;
    double tol = 1e-6;
    int jobs = 1;
    std::uint64_t seed = 101;
};

void cmd_physio(const PhysioArgs& a, const Paths& paths, std::ostream& out, std::ostream& err)
{
    const auto in = paths(a.in);
    const auto eda_dir = paths(a.eda);
    const auto dst = paths(a.out);
    if (a.sg_window < 1 || a.sg_order < 0) throw ParameterError("invalid Savitzky-Golay settings");
    if (!(a.target_hz > 0)) throw ParameterError("--target-hz must be positive");
    fuse::PhysioConfig cfg;
    cfg.raaw.align.band = a.band;
    cfg.raaw.align.max_iter = a.max_iter;
    cfg.raaw.align.tol = a.tol;
    cfg.target_hz = a.target_hz;
    cfg.sg_window = a.sg_window;
    cfg.sg_order = a.sg_order;
    cfg.smooth = !a.no_smooth;
    const auto kind = signal::parse_kind(a.kind);

    const auto recordings = dataio::list_recordings(in);
    if (recordings.empty()) throw DataError("no recordings under '" + in.string() + "'");
    for (const auto& rec : recordings) {
        const auto p = eda_dir / (rec + ".csv");
        if (!fs::is_regular_file(p))
            throw ParameterError("missing EDA file for recording '" + rec + "': " + p.string());
    }

    std::vector<fuse::GoldStandard> golds(recordings.size());
    parallel_for(recordings.size(), a.jobs, [&](std::size_t i) {
        auto set = dataio::read_rater_set(in, recordings[i], kind);
        for (auto& t : set.traces)
            if (t.sample_rate_hz != a.target_hz) t = signal::resample(t, a.target_hz);
        signal::validate(set, 2);
        const auto eda = dataio::read_annotation(eda_dir / (recordings[i] + ".csv"), "eda", signal::SignalKind::physio);
        golds[i] = fuse::physio_fuse(set, eda, cfg);
        const auto& g = golds[i];
        dataio::write_series(dst / (g.recording_id + ".csv"), "value", g.values, g.sample_rate_hz);
        auto meta = gold_metadata(g);
        meta["sg_window"] = a.sg_window;
        meta["sg_order"] = a.sg_order;
        meta["target_hz"] = a.target_hz;
        meta["smooth"] = cfg.smooth;
        meta["seed"] = a.seed;
        write_json(dst / (g.recording_id + ".meta.json"), meta);
    });
    err << "physio: fused " << golds.size() << " recording(s)\n";
    print_agreement(out, "physio", golds);
}

// --- discretize ------------------------------------------------------------

struct DiscretizeArgs {
    std::string gold, segments, out;
    std::vector<std::string> targets{"valence", "arousal"};
    std::string method = "kmeans";
    int classes = 5;
    Index components = 5;
    int jobs = 1;
    std::uint64_t seed = 101;
};

void cmd_discretize(const DiscretizeArgs& a, const Paths& paths, std::ostream& out, std::ostream& err)
{
    const auto gold_root = paths(a.gold);
    const auto dst = paths(a.out);
    const auto method = discretize::parse_method(a.method);
    if (a.classes < 2) throw ParameterError("--classes must be at least 2");
    const auto segments = dataio::read_segments(paths(a.segments));
    if (segments.empty()) throw DataError("no segments");

    for (const auto& target_name : a.targets) {
        const auto target = discretize::parse_target(target_name);
        std::map<std::string, std::optional<dataio::Series>> cache;
        auto gold_of = [&](const std::string& rec) -> const std::optional<dataio::Series>& {
            auto it = cache.find(rec);
            if (it != cache.end()) return it->second;
            const auto p = gold_root / target_name / (rec + ".csv");
            std::optional<dataio::Series> s;
            if (fs::is_regular_file(p)) s = dataio::read_series(p, "value");
            return cache.emplace(rec, std::move(s)).first->second;
        };

        std::vector<discretize::SegmentFeatures> train, other;
        for (const auto& seg : segments) {
            const bool is_train = seg.partition == "train";
            const auto& gold = gold_of(seg.recording_id);
            if (!gold) {
                if (is_train) throw DataError("no " + target_name + " gold standard for training recording '" + seg.recording_id + "'");
                continue;
            }
            std::vector<double> slice;
            for (std::size_t i = 0; i < gold->timestamps_ms.size(); ++i)
                if (gold->timestamps_ms[i] >= seg.start_ms && gold->timestamps_ms[i] <= seg.end_ms)
                    slice.push_back(gold->values(static_cast<Index>(i)));
            if (slice.size() < 2) {
                warn("segment '" + seg.segment_id + "' covers fewer than two gold samples, skipped");
                continue;
            }
            auto f = discretize::segment_features(Eigen::Map<const Vector>(slice.data(), static_cast<Index>(slice.size())),
                                                  target, seg.segment_id);
            (is_train ? train : other).push_back(std::move(f));
        }
        if (train.empty()) throw DataError("no training segments for " + target_name);

        Matrix rows(static_cast<Index>(train.size()), train.front().values.size());
        for (std::size_t i = 0; i < train.size(); ++i) rows.row(static_cast<Index>(i)) = train[i].values.transpose();
        const auto model = discretize::fit_class_model(rows, target, method, a.seed, a.classes, a.components);

        std::vector<int> labels;
        std::vector<std::pair<std::string, int>> assigned;
        for (const auto& f : train) {
            labels.push_back(model.classify(f.values));
            assigned.emplace_back(f.segment_id, labels.back());
        }
        for (const auto& f : other) assigned.emplace_back(f.segment_id, model.classify(f.values));
        const auto report = discretize::validate_clusters(model.transform(rows), labels, a.classes);

        discretize::save(model, dst / (target_name + "_model.json"));
        dataio::write_labels(dst / (target_name + "_classes.csv"), assigned);

        out << target_name << " method = " << discretize::to_string(method) << '\n';
        out << target_name << " silhouette = " << report.silhouette << '\n';
        out << target_name << " class_counts =";
        for (auto c : report.class_counts) out << ' ' << c;
        out << '\n' << target_name << " min_share = " << (report.min_share_ok ? "pass" : "fail") << '\n';
        err << "discretize: " << target_name << ": " << train.size() << " training segment(s), " << other.size()
            << " other\n";
    }
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    std::string task;
    std::string features, gold, labels, segments, partition, out;
    std::optional<Index> hidden;
    std::optional<int> layers;
    std::optional<bool> bidirectional;
    std::optional<double> lr;
    std::optional<double> l2;
    std::optional<int> epochs;
    std::optional<int> patience;
    std::optional<int> batch;
    std::optional<Index> window;
    std::optional<Index> hop;
    bool off_grid = false;
    int jobs = 1;
    std::uint64_t seed = 101;
};

RunConfig resolve(const TrainArgs& a)
{
    auto rc = default_run_config(seq::parse_task(a.task));
    rc.seed = a.seed;
    rc.model.seed = a.seed;
    if (a.hidden) rc.model.hidden = *a.hidden;
    if (a.layers) rc.model.layers = *a.layers;
    if (a.bidirectional) rc.model.bidirectional = *a.bidirectional;
    if (a.lr) rc.model.learning_rate = *a.lr;
    if (a.l2) rc.model.l2_penalty = *a.l2;
    if (a.epochs) rc.model.max_epochs = *a.epochs;
    if (a.patience) rc.model.patience = *a.patience;
    if (a.batch) rc.model.batch_size = *a.batch;
    if (a.window) rc.window.window_steps = *a.window;
    if (a.hop) rc.window.hop_steps = *a.hop;
    rc.window.validate();
    if (!a.off_grid) seq::check_grid(rc.model, rc.task);
    return rc;
}

// Feature rows of one recording on its label grid. Recordings without a
// gold file (test) use the task grid over the feature time span.
struct Prepared {
    std::string id;
    dataio::Split split;
    dataio::LabelGrid grid;
    Matrix features;
    Vector gold;
};

Prepared prepare_recording(const std::string& rec, dataio::Split split, const fs::path& features_dir,
                           const fs::path& gold_dir, double grid_hz)
{
    Prepared p{rec, split, {}, {}, {}};
    const auto f = dataio::read_features(features_dir / (rec + ".csv"), rec);
    if (f.timestamps_ms.empty()) throw DataError("features of '" + rec + "' are empty");
    const auto gold_path = gold_dir / (rec + ".csv");
    if (fs::is_regular_file(gold_path)) {
        const auto s = dataio::read_series(gold_path, "value");
        p.grid = dataio::LabelGrid::from_timestamps(s.timestamps_ms);
        p.gold = s.values;
    } else if (split == dataio::Split::test) {
        const double step = 1000.0 / grid_hz;
        const auto count = static_cast<Index>(std::floor((f.timestamps_ms.back() - f.timestamps_ms.front()) / step + 1e-9)) + 1;
        p.grid = dataio::LabelGrid::from_rate(grid_hz, count, f.timestamps_ms.front());
    } else {
        throw DataError("no gold standard for " + std::string(dataio::to_string(split)) + " recording '" + rec + "'");
    }
    p.features = dataio::align_to_labels(f, p.grid).matrix;
    return p;
}

void report_training(const seq::TrainResult& r, const RunConfig& rc, std::ostream& out)
{
    out << "task = " << seq::to_string(rc.task) << '\n';
    out << "epochs = " << r.history.epochs.size() << '\n';
    out << "best_epoch = " << r.history.best_epoch << '\n';
    out << "best_devel_metric = " << r.history.best_metric << '\n';
    out << "early_stopped = " << (r.history.early_stopped ? "true" : "false") << '\n';
}

void train_regression(const TrainArgs& a, const RunConfig& rc, const Paths& paths, std::ostream& out,
                      std::ostream& err)
{
    if (a.gold.empty()) throw ParameterError("train: --gold is required for regression tasks");
    const auto features_dir = paths(a.features);
    const auto gold_dir = paths(a.gold);
    const auto dst = paths(a.out);
    const auto partition = dataio::read_partition(paths(a.partition));

    std::vector<std::string> recs;
    for (const auto& rec : dataio::list_csv_stems(features_dir)) {
        if (partition.split_of.count(rec)) recs.push_back(rec);
        else warn("recording '" + rec + "' is not in the partition, skipped");
    }
    if (recs.empty()) throw DataError("no partitioned recordings under '" + features_dir.string() + "'");
    std::vector<Prepared> prepared(recs.size());
    parallel_for(recs.size(), a.jobs, [&](std::size_t i) {
        prepared[i] = prepare_recording(recs[i], partition.split_of.at(recs[i]), features_dir, gold_dir, rc.grid_hz);
    });

    std::vector<seq::Sample> train_seqs;
    seq::TrainingData data;
    for (const auto& p : prepared) {
        if (p.split == dataio::Split::train) train_seqs.push_back({p.id, p.features, p.gold, -1});
        else if (p.split == dataio::Split::devel) data.devel.push_back({p.id, p.features, p.gold, -1});
    }
    if (train_seqs.empty()) throw DataError("no training recordings");
    data.train = seq::make_windows(train_seqs, rc.window);
    err << "train: " << train_seqs.size() << " training recording(s), " << data.train.size() << " window(s), "
        << data.devel.size() << " devel recording(s)\n";

    const auto result = seq::train(seq::SequenceRegressor(prepared.front().features.cols(), rc.model), data, rc.model);
    seq::save_checkpoint(dst / "model.json", result.model, result.optimizer);
    seq::write_history(dst / "history.csv", result.history);
    for (const auto& p : prepared)
        dataio::write_series(dst / "predictions" / (p.id + ".csv"), "pred", result.model.predict(p.features),
                             1000.0 / p.grid.step_ms, p.grid.start_ms);
    report_training(result, rc, out);
}

void train_classification(const TrainArgs& a, const RunConfig& rc, const Paths& paths, std::ostream& out,
                          std::ostream& err)
{
    if (a.labels.empty() || a.segments.empty())
        throw ParameterError("train: --labels and --segments are required for classification");
    const auto features_dir = paths(a.features);
    const auto dst = paths(a.out);
    const auto partition = dataio::read_partition(paths(a.partition));
    const auto labels = dataio::read_labels(paths(a.labels));
    const auto segments = dataio::read_segments(paths(a.segments));

    std::map<std::string, dataio::FeatureSequence> features;
    std::vector<seq::Sample> all;
    std::vector<dataio::Split> split_of;
    for (const auto& seg : segments) {
        auto it = partition.split_of.find(seg.recording_id);
        if (it == partition.split_of.end()) continue;
        if (!features.count(seg.recording_id))
            features[seg.recording_id] = dataio::read_features(features_dir / (seg.recording_id + ".csv"), seg.recording_id);
        const auto& f = features[seg.recording_id];
        std::vector<Index> rows;
        for (std::size_t i = 0; i < f.timestamps_ms.size(); ++i)
            if (f.timestamps_ms[i] >= seg.start_ms && f.timestamps_ms[i] <= seg.end_ms) rows.push_back(static_cast<Index>(i));
        if (rows.empty()) {
            warn("segment '" + seg.segment_id + "' has no feature rows, skipped");
            continue;
        }
        int label = -1;
        if (auto l = labels.find(seg.segment_id); l != labels.end()) label = l->second;
        else if (it->second != dataio::Split::test)
            throw DataError("no label for segment '" + seg.segment_id + "'");
        all.push_back({seg.segment_id, f.matrix(rows, Eigen::all), {}, label});
        split_of.push_back(it->second);
    }
    seq::TrainingData data;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (split_of[i] == dataio::Split::train) data.train.push_back(all[i]);
        else if (split_of[i] == dataio::Split::devel) data.devel.push_back(all[i]);
    }
    if (data.train.empty()) throw DataError("no training segments");
    err << "train: " << data.train.size() << " training segment(s), " << data.devel.size() << " devel segment(s)\n";

    const auto result = seq::train(seq::SequenceRegressor(data.train.front().features.cols(), rc.model), data, rc.model);
    seq::save_checkpoint(dst / "model.json", result.model, result.optimizer);
    seq::write_history(dst / "history.csv", result.history);
    std::vector<std::pair<std::string, int>> predicted;
    for (const auto& s : all) {
        Index best = 0;
        result.model.logits(s.features).maxCoeff(&best);
        predicted.emplace_back(s.id, static_cast<int>(best));
    }
    dataio::write_labels(dst / "predictions.csv", predicted);
    report_training(result, rc, out);
}

void cmd_train(const TrainArgs& a, const Paths& paths, std::ostream& out, std::ostream& err)
{
    const auto rc = resolve(a);
    if (rc.model.head == seq::Head::classification) train_classification(a, rc, paths, out, err);
    else train_regression(a, rc, paths, out, err);
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string metric = "ccc";
    std::vector<std::string> targets{"arousal"};
    std::vector<std::string> pred, gold;
    std::string partition;
    std::string split = "devel";
    int classes = 5;
    std::string format = "text";
    int jobs = 1;
    std::uint64_t seed = 101;
};

double eval_ccc(const fs::path& pred_dir, const fs::path& gold_dir, const std::optional<dataio::Partition>& partition,
                dataio::Split split)
{
    std::vector<std::string> recs;
    if (partition) {
        for (const auto& rec : partition->recordings(split))
            if (fs::is_regular_file(gold_dir / (rec + ".csv"))) recs.push_back(rec);
    } else {
        recs = dataio::list_csv_stems(gold_dir);
    }
    if (recs.empty()) throw DataError("no gold files to evaluate under '" + gold_dir.string() + "'");
    std::vector<Vector> preds, golds;
    for (const auto& rec : recs) {
        const auto p = pred_dir / (rec + ".csv");
        if (!fs::is_regular_file(p)) throw DataError("missing prediction for '" + rec + "': " + p.string());
        // prediction streams carry `pred`; gold-format files (`value`) are accepted too
        const auto header = io::read_csv(p).header;
        const bool has_pred = std::find(header.begin(), header.end(), "pred") != header.end();
        auto pred = dataio::read_series(p, has_pred ? "pred" : "value");
        auto gold = dataio::read_series(gold_dir / (rec + ".csv"), "value");
        if (pred.values.size() != gold.values.size())
            throw DataError("prediction length " + std::to_string(pred.values.size()) + " differs from gold length "
                            + std::to_string(gold.values.size()) + " for '" + rec + "'");
        preds.push_back(std::move(pred.values));
        golds.push_back(std::move(gold.values));
    }
    return metrics::ccc_concat(preds, golds);
}

double eval_f1(const fs::path& pred_file, const fs::path& gold_file, int classes)
{
    const auto pred = dataio::read_labels(pred_file);
    const auto gold = dataio::read_labels(gold_file);
    std::vector<int> p, g;
    for (const auto& [id, c] : gold) {
        auto it = pred.find(id);
        if (it == pred.end()) throw DataError("missing prediction for segment '" + id + "'");
        p.push_back(it->second);
        g.push_back(c);
    }
    if (g.empty()) throw DataError("no gold labels in '" + gold_file.string() + "'");
    return metrics::macro_f1(p, g, classes);
}

void cmd_eval(const EvalArgs& a, const Paths& paths, std::ostream& out)
{
    if (a.pred.size() != a.targets.size() || a.gold.size() != a.targets.size())
        throw ParameterError("eval: give one --pred and one --gold per target");
    if (a.metric != "ccc" && a.metric != "f1") throw ParameterError("eval: unknown metric '" + a.metric + "'");
    std::optional<dataio::Partition> partition;
    if (!a.partition.empty()) partition = dataio::read_partition(paths(a.partition));
    const auto split = dataio::parse_split(a.split);

    metrics::ScoreReport report;
    report.metric = a.metric;
    for (std::size_t t = 0; t < a.targets.size(); ++t) {
        report.per_target[a.targets[t]] = a.metric == "ccc"
                                              ? eval_ccc(paths(a.pred[t]), paths(a.gold[t]), partition, split)
                                              : eval_f1(paths(a.pred[t]), paths(a.gold[t]), a.classes);
    }
    out << (a.format == "kv" ? report.to_key_value() : report.to_text());
}

// --- fuse-late -------------------------------------------------------------

struct FuseArgs {
    std::string task = "wilder";
    std::vector<std::string> streams;
    std::vector<std::string> names;
    std::string gold, partition, out;
    std::optional<int> epochs;
    std::optional<Index> window;
    std::optional<Index> hop;
    std::string format = "text";
    int jobs = 1;
    std::uint64_t seed = 101;
};

void cmd_fuse_late(const FuseArgs& a, const Paths& paths, std::ostream& out, std::ostream& err)
{
    const auto task = seq::parse_task(a.task);
    auto cfg = late::fusion_config(task, a.seed);
    if (cfg.head != seq::Head::regression)
        throw ParameterError("fuse-late: the command line fuses per-step prediction streams; use a regression task");
    if (a.streams.size() < 2) throw ParameterError("fuse-late: at least two --stream directories required");
    if (!a.names.empty() && a.names.size() != a.streams.size())
        throw ParameterError("fuse-late: give one --name per --stream");
    if (a.epochs) cfg.max_epochs = *a.epochs;
    std::optional<dataio::WindowSpec> window;
    if (a.window || a.hop) {
        auto w = default_run_config(task).window;
        if (a.window) w.window_steps = *a.window;
        if (a.hop) w.hop_steps = *a.hop;
        w.validate();
        window = w;
    }

    late::FusionPlan plan;
    for (std::size_t s = 0; s < a.streams.size(); ++s)
        plan.stream_names.push_back(a.names.empty() ? fs::path(a.streams[s]).lexically_normal().parent_path().filename().string() + "/"
                                                          + fs::path(a.streams[s]).lexically_normal().filename().string()
                                                    : a.names[s]);
    const auto partition = dataio::read_partition(paths(a.partition));
    const auto gold_dir = paths(a.gold);
    std::vector<double> start_ms, rate_hz;
    for (const auto& [rec, split] : partition.split_of) {
        late::FusionRecording r;
        r.id = rec;
        r.split = split;
        double start = 0.0, rate = 0.0;
        for (std::size_t s = 0; s < a.streams.size(); ++s) {
            const auto series = dataio::read_series(paths(a.streams[s]) / (rec + ".csv"), "pred");
            if (s == 0) {
                r.streams.resize(series.values.size(), static_cast<Index>(a.streams.size()));
                start = series.timestamps_ms.front();
                rate = series.values.size() > 1 ? dataio::infer_rate_hz(series.timestamps_ms, rec) : 1.0;
            } else if (series.values.size() != r.streams.rows()) {
                throw ParameterError("fuse-late: streams of '" + rec + "' differ in length");
            }
            r.streams.col(static_cast<Index>(s)) = series.values;
        }
        if (split != dataio::Split::test) r.gold = dataio::read_series(gold_dir / (rec + ".csv"), "value").values;
        plan.recordings.push_back(std::move(r));
        start_ms.push_back(start);
        rate_hz.push_back(rate);
    }

    const auto result = late::fuse_predictions(plan, task, a.seed, window, cfg);
    const auto dst = paths(a.out);
    seq::save_checkpoint(dst / "model.json", result.trained.model, result.trained.optimizer);
    seq::write_history(dst / "history.csv", result.trained.history);
    for (std::size_t i = 0; i < plan.recordings.size(); ++i)
        dataio::write_series(dst / "predictions" / (plan.recordings[i].id + ".csv"), "pred",
                             result.predictions.at(plan.recordings[i].id), rate_hz[i], start_ms[i]);
    err << "fuse-late: " << result.trained.history.epochs.size() << " epoch(s), best " << result.trained.history.best_epoch
        << '\n';

    metrics::ScoreReport report;
    report.per_target["fusion"] = result.devel_score;
    out << (a.format == "kv" ? report.to_key_value() : report.to_text());
    for (std::size_t s = 0; s < result.stream_devel_scores.size(); ++s)
        out << "stream " << plan.stream_names[s] << " = " << result.stream_devel_scores[s] << '\n';
}

// --- synth -----------------------------------------------------------------

void cmd_synth(const synth::CorpusConfig& c, const std::string& out_dir, const Paths& paths, std::ostream& err)
{
    synth::write_corpus(paths(out_dir), c);
    err << "synth: wrote " << c.recordings << " recording(s) to " << paths(out_dir).string() << '\n';
}

// --- config file -----------------------------------------------------------

// `key = value` lines become `--key=value` arguments unless the key was given
// on the command line. Blank lines and lines starting with '#' are skipped.
std::vector<std::string> expand_config(std::vector<std::string> args)
{
    std::string file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
            break;
        }
    }
    if (file.empty()) return args;
    std::ifstream in(file);
    if (!in) throw ParameterError("cannot read config file '" + file + "'");
    auto given = [&](const std::string& key) {
        return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == "--" + key || a.rfind("--" + key + "=", 0) == 0;
        });
    };
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParameterError(file + ":" + std::to_string(number) + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParameterError(file + ":" + std::to_string(number) + ": empty key");
        if (!given(key)) args.push_back("--" + key + "=" + value);
    }
    return args;
}

class SinkGuard {
public:
    explicit SinkGuard(std::ostream& err)
        : previous_(set_warning_sink([&err](const std::string& m) { err << "warning: " << m << '\n'; }))
    {
    }
    ~SinkGuard() { set_warning_sink(std::move(previous_)); }
    SinkGuard(const SinkGuard&) = delete;
    SinkGuard& operator=(const SinkGuard&) = delete;

private:
    WarningSink previous_;
};

} // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err)
{
    SinkGuard guard(err);
    CLI::App app{"Gold-standard fusion, class extraction and sequence baselines for continuous affect data", "muse"};
    app.require_subcommand(1);
    app.fallthrough();
    Paths paths;
    app.add_option("--data-root", paths.data_root, "Base directory for relative paths")->envname("MUSE_DATA_ROOT");
    app.add_option("--config", "File of 'key = value' option defaults");

    const std::vector<std::string> tasks{"wilder", "sent", "stress", "physio"};
    std::function<void()> action;

    RaawArgs raaw;
    auto* c_raaw = app.add_subcommand("raaw", "Fuse rater traces into gold standards");
    c_raaw->add_option("--in", raaw.in, "Annotation root (<rec>/<kind>/<rater>.csv)")->required();
    c_raaw->add_option("--out", raaw.out, "Output directory")->required();
    c_raaw->add_option("--kind", raaw.kinds, "Signal kinds")->delimiter(',')->capture_default_str();
    c_raaw->add_option("--band", raaw.band, "Warping band in samples (default: 10% of the length)");
    c_raaw->add_option("--max-iter", raaw.max_iter)->capture_default_str();
    c_raaw->add_option("--tol", raaw.tol)->capture_default_str();
    c_raaw->add_option("--strategy", raaw.strategy)->check(CLI::IsMember({"mean", "first_rater"}))->capture_default_str();
    c_raaw->add_flag("--dump-paths", raaw.dump_paths, "Also write warping paths");
    c_raaw->add_option("--jobs", raaw.jobs)->capture_default_str();
    c_raaw->add_option("--seed", raaw.seed)->capture_default_str();
    c_raaw->callback([&] { action = [&] { cmd_raaw(raaw, paths, out, err); }; });

    PhysioArgs physio;
    auto* c_physio = app.add_subcommand("physio", "Fuse annotators with electrodermal activity");
    c_physio->add_option("--in", physio.in, "Annotation root")->required();
    c_physio->add_option("--eda", physio.eda, "Directory of <rec>.csv EDA files")->required();
    c_physio->add_option("--out", physio.out, "Output directory")->required();
    c_physio->add_option("--kind", physio.kind)->capture_default_str();
    c_physio->add_option("--sg-window", physio.sg_window)->capture_default_str();
    c_physio->add_option("--sg-order", physio.sg_order)->capture_default_str();
    c_physio->add_option("--target-hz", physio.target_hz)->capture_default_str();
    c_physio->add_flag("--no-smooth", physio.no_smooth, "Skip the smoothing filter");
    c_physio->add_option("--band", physio.band);
    c_physio->add_option("--max-iter", physio.max_iter)->capture_default_str();
    c_physio->add_option("--tol", physio.tol)->capture_default_str();
    c_physio->add_option("--jobs", physio.jobs)->capture_default_str();
    c_physio->add_option("--seed", physio.seed)->capture_default_str();
    c_physio->callback([&] { action = [&] { cmd_physio(physio, paths, out, err); }; });

    DiscretizeArgs disc;
    auto* c_disc = app.add_subcommand("discretize", "Extract segment classes from gold standards");
    c_disc->add_option("--gold", disc.gold, "Gold root (<target>/<rec>.csv)")->required();
    c_disc->add_option("--segments", disc.segments, "Segment CSV")->required();
    c_disc->add_option("--out", disc.out, "Output directory")->required();
    c_disc->add_option("--targets", disc.targets)->delimiter(',')->capture_default_str();
    c_disc->add_option("--method", disc.method)->check(CLI::IsMember({"kmeans", "gmm"}))->capture_default_str();
    c_disc->add_option("--classes", disc.classes)->capture_default_str();
    c_disc->add_option("--components", disc.components)->capture_default_str();
    c_disc->add_option("--jobs", disc.jobs)->capture_default_str();
    c_disc->add_option("--seed", disc.seed)->capture_default_str();
    c_disc->callback([&] { action = [&] { cmd_discretize(disc, paths, out, err); }; });

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a recurrent baseline");
    c_train->add_option("--task", tr.task)->required()->check(CLI::IsMember(tasks));
    c_train->add_option("--features", tr.features, "Feature directory (<rec>.csv)")->required();
    c_train->add_option("--gold", tr.gold, "Gold directory (<rec>.csv), regression tasks");
    c_train->add_option("--labels", tr.labels, "Segment class CSV, classification");
    c_train->add_option("--segments", tr.segments, "Segment CSV, classification");
    c_train->add_option("--partition", tr.partition)->required();
    c_train->add_option("--out", tr.out)->required();
    c_train->add_option("--hidden", tr.hidden);
    c_train->add_option("--layers", tr.layers);
    c_train->add_option("--bidirectional", tr.bidirectional);
    c_train->add_option("--lr", tr.lr);
    c_train->add_option("--l2", tr.l2);
    c_train->add_option("--epochs", tr.epochs);
    c_train->add_option("--patience", tr.patience);
    c_train->add_option("--batch", tr.batch);
    c_train->add_option("--window", tr.window);
    c_train->add_option("--hop", tr.hop);
    c_train->add_flag("--off-grid", tr.off_grid, "Allow hyper-parameters outside the task grid");
    c_train->add_option("--jobs", tr.jobs)->capture_default_str();
    c_train->add_option("--seed", tr.seed)->capture_default_str();
    c_train->callback([&] { action = [&] { cmd_train(tr, paths, out, err); }; });

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Score predictions against gold standards");
    c_eval->add_option("--metric", ev.metric)->check(CLI::IsMember({"ccc", "f1"}))->capture_default_str();
    c_eval->add_option("--targets", ev.targets)->delimiter(',')->capture_default_str();
    c_eval->add_option("--pred", ev.pred, "Prediction directory (ccc) or label CSV (f1), one per target")->required();
    c_eval->add_option("--gold", ev.gold, "Gold directory (ccc) or label CSV (f1), one per target")->required();
    c_eval->add_option("--partition", ev.partition);
    c_eval->add_option("--split", ev.split)->check(CLI::IsMember({"train", "devel", "test"}))->capture_default_str();
    c_eval->add_option("--classes", ev.classes)->capture_default_str();
    c_eval->add_option("--format", ev.format)->check(CLI::IsMember({"text", "kv"}))->capture_default_str();
    c_eval->add_option("--jobs", ev.jobs)->capture_default_str();
    c_eval->add_option("--seed", ev.seed)->capture_default_str();
    c_eval->callback([&] { action = [&] { cmd_eval(ev, paths, out); }; });

    FuseArgs fl;
    auto* c_fuse = app.add_subcommand("fuse-late", "Fuse per-modality prediction streams");
    c_fuse->add_option("--task", fl.task)->check(CLI::IsMember(tasks))->capture_default_str();
    c_fuse->add_option("--stream", fl.streams, "Prediction directory (<rec>.csv), repeatable")->required();
    c_fuse->add_option("--name", fl.names, "Stream name, one per --stream");
    c_fuse->add_option("--gold", fl.gold)->required();
    c_fuse->add_option("--partition", fl.partition)->required();
    c_fuse->add_option("--out", fl.out)->required();
    c_fuse->add_option("--epochs", fl.epochs);
    c_fuse->add_option("--window", fl.window);
    c_fuse->add_option("--hop", fl.hop);
    c_fuse->add_option("--format", fl.format)->check(CLI::IsMember({"text", "kv"}))->capture_default_str();
    c_fuse->add_option("--jobs", fl.jobs)->capture_default_str();
    c_fuse->add_option("--seed", fl.seed)->capture_default_str();
    c_fuse->callback([&] { action = [&] { cmd_fuse_late(fl, paths, out, err); }; });

    synth::CorpusConfig sc;
    std::string synth_out;
    bool no_eda = false;
    auto* c_synth = app.add_subcommand("synth", "Write a synthetic corpus");
    c_synth->add_option("--out", synth_out)->required();
    c_synth->add_option("--recordings", sc.recordings)->capture_default_str();
    c_synth->add_option("--duration", sc.base.duration_s)->capture_default_str();
    c_synth->add_option("--rate", sc.base.rate_hz)->capture_default_str();
    c_synth->add_option("--raters", sc.base.n_raters)->capture_default_str();
    c_synth->add_option("--max-lag", sc.base.max_lag_s)->capture_default_str();
    c_synth->add_option("--min-period", sc.base.min_period_s, "Shortest latent period in seconds")->capture_default_str();
    c_synth->add_option("--max-period", sc.base.max_period_s, "Longest latent period in seconds")->capture_default_str();
    c_synth->add_option("--noise", sc.base.noise_sigma)->capture_default_str();
    c_synth->add_option("--scale-jitter", sc.base.scale_jitter)->capture_default_str();
    c_synth->add_option("--offset-jitter", sc.base.offset_jitter)->capture_default_str();
    c_synth->add_option("--eda-drift", sc.base.eda_drift)->capture_default_str();
    c_synth->add_option("--eda-hz", sc.base.eda_rate_hz)->capture_default_str();
    c_synth->add_option("--feature-dim", sc.base.feature_dim)->capture_default_str();
    c_synth->add_option("--feature-sets", sc.feature_sets)->delimiter(',')->capture_default_str();
    c_synth->add_option("--feature-noise", sc.feature_noise)->delimiter(',')->capture_default_str();
    c_synth->add_option("--segment", sc.segment_s, "Segment length in seconds")->capture_default_str();
    c_synth->add_flag("--no-eda", no_eda);
    c_synth->add_option("--jobs", "Accepted for uniformity");
    c_synth->add_option("--seed", sc.base.seed)->capture_default_str();
    c_synth->callback([&] {
        action = [&] {
            sc.write_eda = !no_eda;
            cmd_synth(sc, synth_out, paths, err);
        };
    });

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return Exit::ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return Exit::usage;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return Exit::usage;
    }

    try {
        if (action) action();
        return Exit::ok;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return Exit::usage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return Exit::data;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return Exit::data;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return Exit::numeric;
    } catch (const UndefinedError& e) {
        err << "numeric error: " << e.what() << '\n';
        return Exit::numeric;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return Exit::internal;
    }
}

} // namespace muse::cli
