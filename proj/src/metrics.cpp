#include "muse/metrics.hpp"

#include <iomanip>
#include <sstream>

#include "muse/log.hpp"

namespace muse::metrics {

double ccc_concat(std::span<const Vector> preds, std::span<const Vector> golds)
{
    if (preds.size() != golds.size()) throw ParameterError("ccc_concat: sequence count mismatch");
    Index total = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].size() != golds[i].size())
            throw ParameterError("ccc_concat: length mismatch in sequence " + std::to_string(i));
        total += preds[i].size();
    }
    Vector p(total), g(total);
    Index at = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        p.segment(at, preds[i].size()) = preds[i];
        g.segment(at, golds[i].size()) = golds[i];
        at += preds[i].size();
    }
    return ccc(p, g);
}

double macro_f1(std::span<const int> pred, std::span<const int> gold, int n_classes)
{
    if (n_classes < 1) throw ParameterError("macro_f1: n_classes must be positive");
    if (pred.size() != gold.size()) throw ParameterError("macro_f1: length mismatch");
    std::vector<long> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i];
        const int g = gold[i];
        if (p < 0 || p >= n_classes || g < 0 || g >= n_classes)
            throw ParameterError("macro_f1: label out of range at position " + std::to_string(i));
        if (p == g) {
            ++tp[p];
        } else {
            ++fp[p];
            ++fn[g];
        }
    }
    double sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        const long denom = 2 * tp[c] + fp[c] + fn[c];
        if (denom == 0) {
            warn("macro_f1: class " + std::to_string(c) + " absent from predictions and gold, F1 = 0");
            continue;
        }
        sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    }
    return sum / n_classes;
}

double ScoreReport::combined() const
{
    if (per_target.empty()) throw ParameterError("ScoreReport: no targets");
    double s = 0.0;
    for (const auto& [name, v] : per_target) s += v;
    return s / static_cast<double>(per_target.size());
}

std::string ScoreReport::to_text() const
{
    std::ostringstream os;
    os << std::left << std::setw(12) << "target" << std::right << std::setw(10) << metric << '\n';
    os << std::fixed << std::setprecision(4);
    for (const auto& [name, v] : per_target) os << std::left << std::setw(12) << name << std::right << std::setw(10) << v << '\n';
    os << std::left << std::setw(12) << "combined" << std::right << std::setw(10) << combined() << '\n';
    return os.str();
}

std::string ScoreReport::to_key_value() const
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "metric = " << metric << '\n';
    for (const auto& [name, v] : per_target) os << name << " = " << v << '\n';
    os << "combined = " << combined() << '\n';
    return os.str();
}

} // namespace muse::metrics
