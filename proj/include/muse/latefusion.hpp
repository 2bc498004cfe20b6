#pragma once

#include <map>
#include <string>
#include <vector>

#include "muse/dataio.hpp"
#include "muse/lstm.hpp"
#include "muse/train.hpp"

namespace muse::late {

// Per-modality predictions of one recording, stacked column-wise.
struct FusionRecording {
    std::string id;
    dataio::Split split = dataio::Split::train;
    Matrix streams; // time x n_streams
    Vector gold;    // per-step target; never read for the test split
    int label = -1; // classification target
};

struct FusionPlan {
    std::vector<std::string> stream_names; // column order of `streams`
    std::vector<FusionRecording> recordings;
};

// Fixed fusion network: uni-directional, h 64, one layer, lr 1e-4 for the
// regression tasks; bi-directional, h 32, two layers, lr 5e-3 for sent.
[[nodiscard]] seq::RegressorConfig fusion_config(seq::Task task, std::uint64_t seed = 101);

struct FusionResult {
    seq::TrainResult trained;
    std::vector<std::string> stream_names;
    std::map<std::string, Vector> predictions; // regression, every split
    std::map<std::string, int> classes;        // classification, every split
    double devel_score = 0.0;
    std::vector<double> stream_devel_scores; // regression only
};

// Trains the fusion model on train-split streams (devel for early stopping)
// and predicts every recording.
[[nodiscard]] FusionResult fuse_predictions(const FusionPlan& plan, seq::Task task, std::uint64_t seed = 101,
                                            std::optional<dataio::WindowSpec> window = std::nullopt,
                                            std::optional<seq::RegressorConfig> config = std::nullopt);

} // namespace muse::late
