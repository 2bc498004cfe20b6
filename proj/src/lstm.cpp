#include "muse/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace muse::seq {

std::string_view to_string(Task task)
{
    switch (task) {
    case Task::wilder: return "wilder";
    case Task::sent: return "sent";
    case Task::stress: return "stress";
    case Task::physio: return "physio";
    }
    return "unknown";
}

Task parse_task(std::string_view name)
{
    if (name == "wilder") return Task::wilder;
    if (name == "sent") return Task::sent;
    if (name == "stress") return Task::stress;
    if (name == "physio") return Task::physio;
    throw ParameterError("unknown task '" + std::string(name) + "'");
}

void check_grid(const RegressorConfig& c, Task task)
{
    auto one_of = [](auto value, std::initializer_list<decltype(value)> grid) {
        return std::find(grid.begin(), grid.end(), value) != grid.end();
    };
    if (!one_of(c.hidden, {32, 64, 128})) throw ParameterError("hidden size must be one of 32, 64, 128");
    if (!one_of(c.layers, {1, 2, 4})) throw ParameterError("layer count must be one of 1, 2, 4");
    if (!one_of(c.l2_penalty, {0.0, 0.01})) throw ParameterError("l2 penalty must be 0 or 0.01");
    bool lr_ok = false;
    switch (task) {
    case Task::wilder: lr_ok = one_of(c.learning_rate, {1e-4, 1e-3, 5e-3}); break;
    case Task::sent: lr_ok = one_of(c.learning_rate, {1e-3, 5e-3, 1e-2}); break;
    case Task::stress:
    case Task::physio: lr_ok = one_of(c.learning_rate, {1e-4, 2e-4, 5e-4, 1e-3}); break;
    }
    if (!lr_ok) throw ParameterError("learning rate outside the " + std::string(to_string(task)) + " grid");
}

// --- losses ----------------------------------------------------------------

double ccc_loss(const Vector& pred, const Vector& gold, Vector* grad, double eps)
{
    if (pred.size() != gold.size() || pred.size() == 0) throw ParameterError("ccc_loss: length mismatch");
    const auto n = static_cast<double>(pred.size());
    const double mp = pred.mean();
    const double mg = gold.mean();
    const Vector dp = pred.array() - mp;
    const Vector dg = gold.array() - mg;
    const double cov = dp.dot(dg) / n;
    const double denom = dp.squaredNorm() / n + dg.squaredNorm() / n + (mp - mg) * (mp - mg) + eps;
    const double value = 2.0 * cov / denom;
    if (grad) {
        // d cov / d p_t = dg_t / n ; d denom / d p_t = 2 (p_t - mg) / n
        const Vector d_denom = 2.0 * (pred.array() - mg) / n;
        *grad = -(2.0 * dg / n * denom - 2.0 * cov * d_denom) / (denom * denom);
    }
    return 1.0 - value;
}

double cross_entropy(const Vector& logits, int label, Vector* grad)
{
    if (label < 0 || label >= logits.size()) throw ParameterError("cross_entropy: label out of range");
    const double top = logits.maxCoeff();
    const Vector e = (logits.array() - top).exp();
    const double z = e.sum();
    if (grad) {
        *grad = e / z;
        (*grad)(label) -= 1.0;
    }
    return -(logits(label) - top - std::log(z));
}

namespace {

inline double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

} // namespace

// --- model -----------------------------------------------------------------

// Sequences of one batch share a length T and are stored side by side:
// column t * B + b holds step t of sequence b.
struct SequenceRegressor::Cache {
    struct Direction {
        Matrix gates;  // 4h x TB, activated
        Matrix cell;   // h x TB
        Matrix tanh_c; // h x TB
        Matrix state;  // h x TB
    };
    struct Layer {
        Matrix input; // in x TB
        std::vector<Direction> dirs;
    };
    Index steps = 0;
    Index batch = 0;
    std::vector<Layer> layers;
    Matrix top; // D x TB
};

SequenceRegressor::SequenceRegressor(Index input_dim, RegressorConfig config)
    : input_dim_(input_dim), config_(std::move(config))
{
    if (input_dim_ < 1) throw ParameterError("SequenceRegressor: input dimension must be positive");
    if (config_.hidden < 1) throw ParameterError("SequenceRegressor: hidden size must be positive");
    if (config_.layers < 1) throw ParameterError("SequenceRegressor: at least one layer required");
    if (config_.head == Head::classification && config_.n_classes < 2)
        throw ParameterError("SequenceRegressor: at least two classes required");
    build_layout();
    initialise();
}

Index SequenceRegressor::output_dim() const
{
    return config_.head == Head::regression ? 1 : config_.n_classes;
}

void SequenceRegressor::build_layout()
{
    const Index h = config_.hidden;
    Index offset = 0;
    auto add = [&](std::string name, Index rows, Index cols, bool weight) {
        blocks_.push_back({std::move(name), offset, rows, cols, weight});
        offset += rows * cols;
        return blocks_.size() - 1;
    };
    for (int l = 0; l < config_.layers; ++l) {
        const Index in = l == 0 ? input_dim_ : state_dim();
        for (int d = 0; d < directions(); ++d) {
            const std::string tag = "layer" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
            cell_block_.push_back(add(tag + ".W", 4 * h, in, true));
            add(tag + ".U", 4 * h, h, true);
            add(tag + ".b", 4 * h, 1, false);
        }
    }
    head_block_ = add("head.W", output_dim(), state_dim(), true);
    add("head.b", output_dim(), 1, false);

    params_ = Vector::Zero(offset);
    weight_mask_ = Vector::Zero(offset);
    for (const auto& b : blocks_)
        if (b.is_weight) weight_mask_.segment(b.offset, b.size()).setOnes();
}

void SequenceRegressor::initialise()
{
    std::mt19937_64 rng(config_.seed);
    const double cell_bound = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(state_dim()));
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        const bool head = i >= head_block_;
        std::uniform_real_distribution<double> u(-(head ? head_bound : cell_bound), head ? head_bound : cell_bound);
        for (Index k = 0; k < b.size(); ++k) params_(b.offset + k) = u(rng);
    }
    const Index h = config_.hidden;
    for (std::size_t cb : cell_block_) params_.segment(blocks_[cb + 2].offset + h, h).setOnes();
}

void SequenceRegressor::forward(std::span<const Matrix* const> features, Cache& cache) const
{
    if (features.empty()) throw ParameterError("SequenceRegressor: empty batch");
    const Index T = features.front()->rows();
    const auto B = static_cast<Index>(features.size());
    if (T < 1) throw ParameterError("SequenceRegressor: empty sequence");
    for (const Matrix* f : features) {
        if (f->cols() != input_dim_)
            throw ParameterError("SequenceRegressor: expected " + std::to_string(input_dim_) + " features, got "
                                 + std::to_string(f->cols()));
        if (f->rows() != T) throw ParameterError("SequenceRegressor: batched sequences differ in length");
    }
    const Index h = config_.hidden;
    cache.steps = T;
    cache.batch = B;

    Matrix x(input_dim_, T * B);
    for (Index b = 0; b < B; ++b)
        for (Index t = 0; t < T; ++t) x.col(t * B + b) = features[static_cast<std::size_t>(b)]->row(t).transpose();

    cache.layers.assign(static_cast<std::size_t>(config_.layers), {});
    for (int l = 0; l < config_.layers; ++l) {
        auto& layer = cache.layers[static_cast<std::size_t>(l)];
        layer.input = std::move(x);
        layer.dirs.resize(static_cast<std::size_t>(directions()));
        Matrix out(state_dim(), T * B);
        for (int d = 0; d < directions(); ++d) {
            const std::size_t cb = cell_block_[static_cast<std::size_t>(l * directions() + d)];
            const auto& bw = blocks_[cb];
            const auto& bu = blocks_[cb + 1];
            const auto& bb = blocks_[cb + 2];
            const Eigen::Map<const Matrix> W(params_.data() + bw.offset, bw.rows, bw.cols);
            const Eigen::Map<const Matrix> U(params_.data() + bu.offset, bu.rows, bu.cols);
            const Eigen::Map<const Vector> b(params_.data() + bb.offset, bb.rows);

            auto& dir = layer.dirs[static_cast<std::size_t>(d)];
            dir.gates.noalias() = W * layer.input;
            dir.gates.colwise() += b;
            dir.cell.resize(h, T * B);
            dir.tanh_c.resize(h, T * B);
            dir.state.resize(h, T * B);
            for (Index s = 0; s < T; ++s) {
                const Index t = d == 0 ? s : T - 1 - s;
                const Index tp = d == 0 ? t - 1 : t + 1;
                auto z = dir.gates.middleCols(t * B, B);
                if (s > 0) z.noalias() += U * dir.state.middleCols(tp * B, B);
                z.topRows(2 * h) = z.topRows(2 * h).unaryExpr([](double v) { return sigmoid(v); });
                z.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
                z.bottomRows(h) = z.bottomRows(h).unaryExpr([](double v) { return sigmoid(v); });
                auto c = dir.cell.middleCols(t * B, B);
                c = z.topRows(h).cwiseProduct(z.middleRows(2 * h, h));
                if (s > 0) c += z.middleRows(h, h).cwiseProduct(dir.cell.middleCols(tp * B, B));
                dir.tanh_c.middleCols(t * B, B) = c.array().tanh().matrix();
                dir.state.middleCols(t * B, B) = z.bottomRows(h).cwiseProduct(dir.tanh_c.middleCols(t * B, B));
            }
            out.middleRows(d * h, h) = dir.state;
        }
        x = std::move(out);
    }
    cache.top = std::move(x);
}

void SequenceRegressor::backward(const Cache& cache, const Matrix& d_states, Vector& grad) const
{
    const Index h = config_.hidden;
    const Index T = cache.steps;
    const Index B = cache.batch;
    Matrix d_out = d_states;
    for (int l = config_.layers - 1; l >= 0; --l) {
        const auto& layer = cache.layers[static_cast<std::size_t>(l)];
        Matrix d_input = Matrix::Zero(layer.input.rows(), T * B);
        for (int d = 0; d < directions(); ++d) {
            const std::size_t cb = cell_block_[static_cast<std::size_t>(l * directions() + d)];
            const auto& bw = blocks_[cb];
            const auto& bu = blocks_[cb + 1];
            const auto& bb = blocks_[cb + 2];
            const Eigen::Map<const Matrix> W(params_.data() + bw.offset, bw.rows, bw.cols);
            const Eigen::Map<const Matrix> U(params_.data() + bu.offset, bu.rows, bu.cols);
            Eigen::Map<Matrix> dW(grad.data() + bw.offset, bw.rows, bw.cols);
            Eigen::Map<Matrix> dU(grad.data() + bu.offset, bu.rows, bu.cols);
            Eigen::Map<Vector> db(grad.data() + bb.offset, bb.rows);

            const auto& dir = layer.dirs[static_cast<std::size_t>(d)];
            Matrix dz(4 * h, T * B);
            Matrix dh_next = Matrix::Zero(h, B);
            Matrix dc_next = Matrix::Zero(h, B);
            for (Index s = T - 1; s >= 0; --s) {
                const Index t = d == 0 ? s : T - 1 - s;
                const bool has_prev = s > 0;
                const Index tp = d == 0 ? t - 1 : t + 1;
                const auto gates = dir.gates.middleCols(t * B, B);
                const auto i = gates.topRows(h).array();
                const auto f = gates.middleRows(h, h).array();
                const auto g = gates.middleRows(2 * h, h).array();
                const auto o = gates.bottomRows(h).array();
                const auto tc = dir.tanh_c.middleCols(t * B, B).array();

                const Matrix dh = d_out.block(d * h, t * B, h, B) + dh_next;
                const Matrix dc = (dh.array() * o * (1.0 - tc.square())).matrix() + dc_next;
                auto col = dz.middleCols(t * B, B);
                col.topRows(h) = (dc.array() * g * i * (1.0 - i)).matrix();
                if (has_prev)
                    col.middleRows(h, h) =
                        (dc.array() * dir.cell.middleCols(tp * B, B).array() * f * (1.0 - f)).matrix();
                else
                    col.middleRows(h, h).setZero();
                col.middleRows(2 * h, h) = (dc.array() * i * (1.0 - g.square())).matrix();
                col.bottomRows(h) = (dh.array() * tc * o * (1.0 - o)).matrix();

                dc_next = (dc.array() * f).matrix();
                if (has_prev) dh_next.noalias() = U.transpose() * col;
                else dh_next.setZero();
            }
            // recurrent weights: each step pairs with the state it read
            if (T > 1) {
                const Index n = (T - 1) * B;
                if (d == 0) dU.noalias() += dz.rightCols(n) * dir.state.leftCols(n).transpose();
                else dU.noalias() += dz.leftCols(n) * dir.state.rightCols(n).transpose();
            }
            dW.noalias() += dz * layer.input.transpose();
            db += dz.rowwise().sum();
            d_input.noalias() += W.transpose() * dz;
        }
        d_out = std::move(d_input);
    }
}

Matrix SequenceRegressor::hidden_states(const Matrix& features) const
{
    Cache cache;
    const Matrix* one[] = {&features};
    forward(one, cache);
    return cache.top.transpose();
}

Vector SequenceRegressor::predict(const Matrix& features) const
{
    if (config_.head != Head::regression) throw ParameterError("predict: model has a classification head");
    Cache cache;
    const Matrix* one[] = {&features};
    forward(one, cache);
    const auto& bw = blocks_[head_block_];
    const Eigen::Map<const Matrix> Wh(params_.data() + bw.offset, bw.rows, bw.cols);
    const double bh = params_(blocks_[head_block_ + 1].offset);
    return (Wh * cache.top).transpose().array() + bh;
}

Vector SequenceRegressor::logits(const Matrix& features) const
{
    if (config_.head != Head::classification) throw ParameterError("logits: model has a regression head");
    Cache cache;
    const Matrix* one[] = {&features};
    forward(one, cache);
    const auto& bw = blocks_[head_block_];
    const Eigen::Map<const Matrix> Wh(params_.data() + bw.offset, bw.rows, bw.cols);
    const Eigen::Map<const Vector> bh(params_.data() + blocks_[head_block_ + 1].offset, bw.rows);
    return Wh * cache.top.rowwise().mean() + bh;
}

double SequenceRegressor::loss_and_gradient(const Matrix& features, const Vector& target, Vector* grad) const
{
    const Matrix* f[] = {&features};
    const Vector* y[] = {&target};
    return loss_and_gradient(f, y, grad);
}

double SequenceRegressor::loss_and_gradient(const Matrix& features, int label, Vector* grad) const
{
    const Matrix* f[] = {&features};
    const int y[] = {label};
    return loss_and_gradient(f, std::span<const int>(y), grad);
}

double SequenceRegressor::loss_and_gradient(std::span<const Matrix* const> features,
                                            std::span<const Vector* const> targets, Vector* grad) const
{
    if (config_.head != Head::regression) throw ParameterError("loss_and_gradient: model has a classification head");
    if (targets.size() != features.size()) throw ParameterError("loss_and_gradient: one target per sequence required");
    for (std::size_t b = 0; b < features.size(); ++b)
        if (targets[b]->size() != features[b]->rows()) throw ParameterError("loss_and_gradient: target length mismatch");
    Cache cache;
    forward(features, cache);
    const Index T = cache.steps;
    const Index B = cache.batch;
    const auto& bw = blocks_[head_block_];
    const Eigen::Map<const Matrix> Wh(params_.data() + bw.offset, bw.rows, bw.cols);
    const double bh = params_(blocks_[head_block_ + 1].offset);
    const Vector all = (Wh * cache.top).transpose().array() + bh; // index t * B + b

    double loss = 0.0;
    Vector d_all(T * B);
    for (Index b = 0; b < B; ++b) {
        const Vector pred = Eigen::Map<const Vector, 0, Eigen::InnerStride<>>(all.data() + b, T, Eigen::InnerStride<>(B));
        Vector d_pred;
        loss += ccc_loss(pred, *targets[static_cast<std::size_t>(b)], grad ? &d_pred : nullptr);
        if (grad) Eigen::Map<Vector, 0, Eigen::InnerStride<>>(d_all.data() + b, T, Eigen::InnerStride<>(B)) = d_pred;
    }
    if (!grad) return loss;
    if (grad->size() != params_.size()) *grad = Vector::Zero(params_.size());

    Eigen::Map<Matrix> dWh(grad->data() + bw.offset, bw.rows, bw.cols);
    dWh.noalias() += (cache.top * d_all).transpose();
    (*grad)(blocks_[head_block_ + 1].offset) += d_all.sum();
    const Matrix d_states = Wh.transpose() * d_all.transpose();
    backward(cache, d_states, *grad);
    return loss;
}

double SequenceRegressor::loss_and_gradient(std::span<const Matrix* const> features, std::span<const int> labels,
                                            Vector* grad) const
{
    if (config_.head != Head::classification) throw ParameterError("loss_and_gradient: model has a regression head");
    if (labels.size() != features.size()) throw ParameterError("loss_and_gradient: one label per sequence required");
    Cache cache;
    forward(features, cache);
    const Index T = cache.steps;
    const Index B = cache.batch;
    const auto& bw = blocks_[head_block_];
    const auto& bb = blocks_[head_block_ + 1];
    const Eigen::Map<const Matrix> Wh(params_.data() + bw.offset, bw.rows, bw.cols);
    const Eigen::Map<const Vector> bh(params_.data() + bb.offset, bb.rows);

    Matrix pooled = Matrix::Zero(state_dim(), B);
    for (Index t = 0; t < T; ++t) pooled += cache.top.middleCols(t * B, B);
    pooled /= static_cast<double>(T);

    double loss = 0.0;
    Matrix d_logits(output_dim(), B);
    for (Index b = 0; b < B; ++b) {
        const Vector z = Wh * pooled.col(b) + bh;
        Vector dz;
        loss += cross_entropy(z, labels[static_cast<std::size_t>(b)], grad ? &dz : nullptr);
        if (grad) d_logits.col(b) = dz;
    }
    if (!grad) return loss;
    if (grad->size() != params_.size()) *grad = Vector::Zero(params_.size());

    Eigen::Map<Matrix> dWh(grad->data() + bw.offset, bw.rows, bw.cols);
    dWh.noalias() += d_logits * pooled.transpose();
    grad->segment(bb.offset, bb.rows) += d_logits.rowwise().sum();
    const Matrix d_pooled = Wh.transpose() * d_logits / static_cast<double>(T);
    const Matrix d_states = d_pooled.replicate(1, T);
    backward(cache, d_states, *grad);
    return loss;
}

} // namespace muse::seq
