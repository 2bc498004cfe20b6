#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muse/signal.hpp"

namespace muse::seq {

enum class Head {
    regression,     // one output per time step
    classification, // logits over classes from time-averaged states
};

enum class Task { wilder, sent, stress, physio };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

struct RegressorConfig {
    Index hidden = 64;
    int layers = 1;
    bool bidirectional = false;
    double learning_rate = 1e-3;
    double l2_penalty = 0.0;
    int max_epochs = 100;
    int patience = 15;
    std::uint64_t seed = 101;
    int batch_size = 32;
    Head head = Head::regression;
    int n_classes = 5;
};

// Throws ParameterError if any hyper-parameter lies outside the search grid
// of the given task.
void check_grid(const RegressorConfig& config, Task task);

// Parameters of one LSTM direction: 4 (input h + h^2 + h).
[[nodiscard]] constexpr Index lstm_parameter_count(Index input, Index hidden)
{
    return 4 * (input * hidden + hidden * hidden + hidden);
}

// Location of one weight or bias block inside the flat parameter vector.
struct ParamBlock {
    std::string name;
    Index offset = 0;
    Index rows = 0;
    Index cols = 0;
    bool is_weight = true; // weights take the L2 penalty, biases do not

    [[nodiscard]] Index size() const { return rows * cols; }
};

// Stacked uni- or bi-directional LSTM with a linear head. Gates are
// ordered input, forget, cell, output. All parameters live in one flat
// vector so that optimisers and checks can treat them uniformly.
class SequenceRegressor {
public:
    SequenceRegressor(Index input_dim, RegressorConfig config);

    [[nodiscard]] const RegressorConfig& config() const { return config_; }
    [[nodiscard]] Index input_dim() const { return input_dim_; }
    [[nodiscard]] Index state_dim() const { return config_.hidden * directions(); }
    [[nodiscard]] Index output_dim() const;
    [[nodiscard]] int directions() const { return config_.bidirectional ? 2 : 1; }

    [[nodiscard]] Vector& parameters() { return params_; }
    [[nodiscard]] const Vector& parameters() const { return params_; }
    [[nodiscard]] Index parameter_count() const { return params_.size(); }
    [[nodiscard]] const std::vector<ParamBlock>& blocks() const { return blocks_; }
    // 1 for weight entries, 0 for biases.
    [[nodiscard]] const Vector& weight_mask() const { return weight_mask_; }

    // features: time x input_dim.
    [[nodiscard]] Matrix hidden_states(const Matrix& features) const;
    [[nodiscard]] Vector predict(const Matrix& features) const;
    [[nodiscard]] Vector logits(const Matrix& features) const;

    // Per-sequence loss (1 - CCC or cross-entropy) and, when `grad` is non-null,
    // its exact gradient with respect to parameters(), accumulated into grad.
    double loss_and_gradient(const Matrix& features, const Vector& target, Vector* grad) const;
    double loss_and_gradient(const Matrix& features, int label, Vector* grad) const;
    // Summed over sequences of one common length, evaluated side by side.
    double loss_and_gradient(std::span<const Matrix* const> features, std::span<const Vector* const> targets,
                             Vector* grad) const;
    double loss_and_gradient(std::span<const Matrix* const> features, std::span<const int> labels,
                             Vector* grad) const;

private:
    struct Cache;

    void build_layout();
    void initialise();
    void forward(std::span<const Matrix* const> features, Cache& cache) const;
    void backward(const Cache& cache, const Matrix& d_states, Vector& grad) const;

    Index input_dim_;
    RegressorConfig config_;
    Vector params_;
    Vector weight_mask_;
    std::vector<ParamBlock> blocks_;
    // Block index of W for (layer, direction); U and b follow it.
    std::vector<std::size_t> cell_block_;
    std::size_t head_block_ = 0;
};

// 1 - CCC with `eps` added to the CCC denominator. Writes d loss / d pred
// into grad when non-null.
double ccc_loss(const Vector& pred, const Vector& gold, Vector* grad = nullptr, double eps = 1e-8);

// Softmax cross-entropy of one example.
double cross_entropy(const Vector& logits, int label, Vector* grad = nullptr);

} // namespace muse::seq
