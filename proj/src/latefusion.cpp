#include "muse/latefusion.hpp"

#include "muse/metrics.hpp"

namespace muse::late {

seq::RegressorConfig fusion_config(seq::Task task, std::uint64_t seed)
{
    seq::RegressorConfig c;
    c.seed = seed;
    if (task == seq::Task::sent) {
        c.bidirectional = true;
        c.learning_rate = 5e-3;
        c.hidden = 32;
        c.layers = 2;
        c.head = seq::Head::classification;
        return c;
    }
    c.bidirectional = false;
    c.learning_rate = 1e-4;
    c.hidden = 64;
    c.layers = 1;
    c.head = seq::Head::regression;
    return c;
}

namespace {

dataio::WindowSpec default_window(seq::Task task)
{
    if (task == seq::Task::stress || task == seq::Task::physio) return {300, 50};
    return {200, 100};
}

} // namespace

FusionResult fuse_predictions(const FusionPlan& plan, seq::Task task, std::uint64_t seed,
                              std::optional<dataio::WindowSpec> window, std::optional<seq::RegressorConfig> config)
{
    const auto n_streams = static_cast<Index>(plan.stream_names.size());
    if (n_streams < 2) throw ParameterError("fuse_predictions: at least two prediction streams required");
    if (plan.recordings.empty()) throw ParameterError("fuse_predictions: no recordings");
    const seq::RegressorConfig cfg = config.value_or(fusion_config(task, seed));
    const bool regression = cfg.head == seq::Head::regression;

    std::vector<seq::Sample> train_seqs, devel;
    for (const auto& r : plan.recordings) {
        if (r.streams.cols() != n_streams)
            throw ParameterError("fuse_predictions: recording '" + r.id + "' has " + std::to_string(r.streams.cols())
                                 + " streams, expected " + std::to_string(n_streams));
        if (r.streams.rows() < 1) throw ParameterError("fuse_predictions: recording '" + r.id + "' is empty");
        if (r.split == dataio::Split::test) continue;
        if (regression && r.gold.size() != r.streams.rows())
            throw ParameterError("fuse_predictions: stream length differs from gold length in '" + r.id + "'");
        seq::Sample s{r.id, r.streams, regression ? r.gold : Vector(), r.label};
        (r.split == dataio::Split::train ? train_seqs : devel).push_back(std::move(s));
    }
    if (train_seqs.empty()) throw ParameterError("fuse_predictions: no training recordings");

    seq::TrainingData data;
    data.train = regression ? seq::make_windows(train_seqs, window.value_or(default_window(task))) : train_seqs;
    data.devel = devel;

    FusionResult result{seq::train(seq::SequenceRegressor(n_streams, cfg), data, cfg), plan.stream_names, {}, {}, 0.0, {}};
    const auto& model = result.trained.model;
    for (const auto& r : plan.recordings) {
        if (regression) {
            result.predictions[r.id] = model.predict(r.streams);
        } else {
            Index best = 0;
            model.logits(r.streams).maxCoeff(&best);
            result.classes[r.id] = static_cast<int>(best);
        }
    }
    if (!devel.empty()) {
        result.devel_score = seq::evaluate(model, devel);
        if (regression) {
            std::vector<Vector> golds;
            for (const auto& s : devel) golds.push_back(s.target);
            for (Index k = 0; k < n_streams; ++k) {
                std::vector<Vector> stream;
                for (const auto& s : devel) stream.push_back(s.features.col(k));
                double score = 0.0;
                try {
                    score = metrics::ccc_concat(stream, golds);
                } catch (const UndefinedError&) {
                }
                result.stream_devel_scores.push_back(score);
            }
        }
    }
    return result;
}

} // namespace muse::late
