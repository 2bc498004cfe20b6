#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "muse/dataio.hpp"
#include "muse/lstm.hpp"

namespace muse::seq {

// One training or evaluation example: a feature matrix (time x dim) with
// either a per-step target (regression) or a class label (classification).
struct Sample {
    std::string id;
    Matrix features;
    Vector target;
    int label = -1;
};

struct TrainingData {
    std::vector<Sample> train; // usually windows
    std::vector<Sample> devel; // full sequences
};

// Cuts every sequence into windows; each window is an independent example.
[[nodiscard]] std::vector<Sample> make_windows(const std::vector<Sample>& sequences, const dataio::WindowSpec& spec);

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    Vector m;
    Vector v;
    long step = 0;

    void update(Vector& params, const Vector& grad, double learning_rate);
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double devel_metric = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_metric = 0.0;
    bool early_stopped = false;
};

struct TrainResult {
    SequenceRegressor model;
    Adam optimizer;
    TrainHistory history;
};

// Mean per-sample loss of a batch plus l2 * sum(w^2) over weight entries.
// Fills grad with the matching gradient when non-null.
double batch_loss_and_gradient(const SequenceRegressor& model, std::span<const Sample* const> batch, double l2,
                               Vector* grad);

// CCC over the concatenated predictions (regression; 0 when undefined) or
// macro F1 (classification).
[[nodiscard]] double evaluate(const SequenceRegressor& model, const std::vector<Sample>& samples);

[[nodiscard]] std::vector<Vector> predict_all(const SequenceRegressor& model, const std::vector<Sample>& samples);

// Adam on shuffled mini-batches, devel scoring after every epoch, early
// stopping after `patience` epochs without improvement; the best devel
// snapshot is restored before returning. Uses the optimisation fields of
// `config` (rate, penalty, epochs, patience, seed, batch size).
[[nodiscard]] TrainResult train(SequenceRegressor model, const TrainingData& data, const RegressorConfig& config);

void write_history(const std::filesystem::path& path, const TrainHistory& history);

void save_checkpoint(const std::filesystem::path& path, const SequenceRegressor& model, const Adam& optimizer);
[[nodiscard]] std::pair<SequenceRegressor, Adam> load_checkpoint(const std::filesystem::path& path);

} // namespace muse::seq
