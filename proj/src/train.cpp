#include "muse/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "muse/csv.hpp"
#include "muse/metrics.hpp"

namespace muse::seq {

std::vector<Sample> make_windows(const std::vector<Sample>& sequences, const dataio::WindowSpec& spec)
{
    std::vector<Sample> out;
    for (const auto& s : sequences) {
        for (const auto& w : dataio::window(s.features.rows(), spec)) {
            Sample piece;
            piece.id = s.id + "@" + std::to_string(w.start);
            piece.features = s.features.middleRows(w.start, w.length);
            if (s.target.size() > 0) piece.target = s.target.segment(w.start, w.length);
            piece.label = s.label;
            out.push_back(std::move(piece));
        }
    }
    return out;
}

void Adam::update(Vector& params, const Vector& grad, double learning_rate)
{
    if (m.size() != params.size()) {
        m = Vector::Zero(params.size());
        v = Vector::Zero(params.size());
        step = 0;
    }
    ++step;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    params.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

double batch_loss_and_gradient(const SequenceRegressor& model, std::span<const Sample* const> batch, double l2,
                               Vector* grad)
{
    if (batch.empty()) throw ParameterError("batch_loss_and_gradient: empty batch");
    const bool regression = model.config().head == Head::regression;
    if (grad) *grad = Vector::Zero(model.parameter_count());
    double loss = 0.0;
    for (const Sample* s : batch) {
        loss += regression ? model.loss_and_gradient(s->features, s->target, grad)
                           : model.loss_and_gradient(s->features, s->label, grad);
    }
    const auto n = static_cast<double>(batch.size());
    loss /= n;
    if (grad) *grad /= n;
    if (l2 > 0.0) {
        const auto& w = model.parameters();
        const auto& mask = model.weight_mask();
        loss += l2 * w.cwiseProduct(mask).squaredNorm();
        if (grad) *grad += 2.0 * l2 * w.cwiseProduct(mask);
    }
    return loss;
}

std::vector<Vector> predict_all(const SequenceRegressor& model, const std::vector<Sample>& samples)
{
    std::vector<Vector> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(model.predict(s.features));
    return out;
}

double evaluate(const SequenceRegressor& model, const std::vector<Sample>& samples)
{
    if (samples.empty()) throw ParameterError("evaluate: no samples");
    if (model.config().head == Head::regression) {
        std::vector<Vector> golds;
        for (const auto& s : samples) golds.push_back(s.target);
        try {
            return metrics::ccc_concat(predict_all(model, samples), golds);
        } catch (const UndefinedError&) {
            return 0.0;
        }
    }
    std::vector<int> pred, gold;
    for (const auto& s : samples) {
        Index best = 0;
        model.logits(s.features).maxCoeff(&best);
        pred.push_back(static_cast<int>(best));
        gold.push_back(s.label);
    }
    return metrics::macro_f1(pred, gold, model.config().n_classes);
}

TrainResult train(SequenceRegressor model, const TrainingData& data, const RegressorConfig& config)
{
    if (data.train.empty()) throw ParameterError("train: empty training set");
    if (config.batch_size < 1) throw ParameterError("train: batch size must be positive");
    if (config.max_epochs < 1) throw ParameterError("train: max_epochs must be positive");
    if (config.patience < 0) throw ParameterError("train: patience must be non-negative");
    const bool regression = model.config().head == Head::regression;
    for (const auto& s : data.train) {
        if (s.features.cols() != model.input_dim()) throw ParameterError("train: feature dimension mismatch");
        if (regression && s.target.size() != s.features.rows()) throw ParameterError("train: target length mismatch");
    }
    const auto& monitor = data.devel.empty() ? data.train : data.devel;

    Adam adam;
    TrainHistory history;
    Vector best_params = model.parameters();
    history.best_metric = -std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    int stale = 0;
    Vector grad;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<const Sample*> batch;
            for (std::size_t k = start; k < end; ++k) batch.push_back(&data.train[order[k]]);
            const double loss = batch_loss_and_gradient(model, batch, config.l2_penalty, &grad);
            if (!std::isfinite(loss) || !grad.allFinite())
                throw NumericError("train: non-finite loss or gradient at epoch " + std::to_string(epoch) + ", batch "
                                   + std::to_string(batches + 1));
            adam.update(model.parameters(), grad, config.learning_rate);
            if (!model.parameters().allFinite())
                throw NumericError("train: non-finite parameters after update at epoch " + std::to_string(epoch));
            loss_sum += loss;
            ++batches;
        }
        const double metric = evaluate(model, monitor);
        history.epochs.push_back({epoch, loss_sum / static_cast<double>(batches), metric});
        if (metric > history.best_metric) {
            history.best_metric = metric;
            history.best_epoch = epoch;
            best_params = model.parameters();
            stale = 0;
        } else if (++stale >= config.patience) {
            history.early_stopped = true;
            break;
        }
    }
    model.parameters() = best_params;
    return {std::move(model), std::move(adam), std::move(history)};
}

void write_history(const std::filesystem::path& path, const TrainHistory& history)
{
    io::Table t{{"epoch", "train_loss", "devel_metric"}, {}};
    for (const auto& e : history.epochs)
        t.rows.push_back({std::to_string(e.epoch), io::format_double(e.train_loss), io::format_double(e.devel_metric)});
    io::write_csv(path, t);
}

namespace {

using nlohmann::json;

constexpr const char* checkpoint_format = "muse-seqmodel";
constexpr int checkpoint_version = 1;

json to_json(const Vector& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from(const json& j)
{
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const SequenceRegressor& model, const Adam& optimizer)
{
    const auto& c = model.config();
    json j;
    j["format"] = checkpoint_format;
    j["version"] = checkpoint_version;
    j["input_dim"] = model.input_dim();
    j["config"] = {{"hidden", c.hidden},
                   {"layers", c.layers},
                   {"bidirectional", c.bidirectional},
                   {"learning_rate", c.learning_rate},
                   {"l2_penalty", c.l2_penalty},
                   {"max_epochs", c.max_epochs},
                   {"patience", c.patience},
                   {"seed", c.seed},
                   {"batch_size", c.batch_size},
                   {"head", c.head == Head::regression ? "regression" : "classification"},
                   {"n_classes", c.n_classes}};
    j["parameters"] = to_json(model.parameters());
    j["adam"] = {{"beta1", optimizer.beta1}, {"beta2", optimizer.beta2}, {"eps", optimizer.eps},
                 {"step", optimizer.step},   {"m", to_json(optimizer.m)}, {"v", to_json(optimizer.v)}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
    out << j.dump() << '\n';
}

std::pair<SequenceRegressor, Adam> load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot read checkpoint '" + path.string() + "'");
    try {
        const json j = json::parse(in);
        if (j.at("format") != checkpoint_format) throw DataError("'" + path.string() + "' is not a model checkpoint");
        if (j.at("version").get<int>() != checkpoint_version)
            throw DataError("unsupported checkpoint version in '" + path.string() + "'");
        const auto& jc = j.at("config");
        RegressorConfig c;
        c.hidden = jc.at("hidden").get<Index>();
        c.layers = jc.at("layers").get<int>();
        c.bidirectional = jc.at("bidirectional").get<bool>();
        c.learning_rate = jc.at("learning_rate").get<double>();
        c.l2_penalty = jc.at("l2_penalty").get<double>();
        c.max_epochs = jc.at("max_epochs").get<int>();
        c.patience = jc.at("patience").get<int>();
        c.seed = jc.at("seed").get<std::uint64_t>();
        c.batch_size = jc.at("batch_size").get<int>();
        c.head = jc.at("head").get<std::string>() == "regression" ? Head::regression : Head::classification;
        c.n_classes = jc.at("n_classes").get<int>();
        SequenceRegressor model(j.at("input_dim").get<Index>(), c);
        Vector params = vector_from(j.at("parameters"));
        if (params.size() != model.parameter_count()) throw DataError("checkpoint parameter count mismatch");
        model.parameters() = std::move(params);
        Adam adam;
        const auto& ja = j.at("adam");
        adam.beta1 = ja.at("beta1").get<double>();
        adam.beta2 = ja.at("beta2").get<double>();
        adam.eps = ja.at("eps").get<double>();
        adam.step = ja.at("step").get<long>();
        adam.m = vector_from(ja.at("m"));
        adam.v = vector_from(ja.at("v"));
        return {std::move(model), std::move(adam)};
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed checkpoint '" + path.string() + "': " + e.what());
    }
}

} // namespace muse::seq
