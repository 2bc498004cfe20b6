#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "muse/error.hpp"
#include "muse/signal.hpp"

namespace muse::metrics {

namespace detail {

template <typename A, typename B>
void check_pair(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* name)
{
    if (a.size() != b.size())
        throw ParameterError(std::string(name) + ": length mismatch (" + std::to_string(a.size()) + " vs "
                             + std::to_string(b.size()) + ")");
    if (a.size() < 2) throw ParameterError(std::string(name) + ": at least two samples required");
    if (signal::is_constant(a) || signal::is_constant(b))
        throw UndefinedError(std::string(name) + ": undefined for a constant sequence");
}

} // namespace detail

// Population moments of a pair of sequences.
template <typename Scalar>
struct PairMoments {
    Scalar mean_a, mean_b, var_a, var_b, cov;
};

template <typename A, typename B>
[[nodiscard]] auto pair_moments(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b)
    -> PairMoments<typename A::Scalar>
{
    using Scalar = typename A::Scalar;
    const auto n = static_cast<Scalar>(a.size());
    const Scalar ma = a.mean();
    const Scalar mb = b.mean();
    const auto da = (a.derived().array() - ma);
    const auto db = (b.derived().array() - mb);
    return {ma, mb, da.square().sum() / n, db.square().sum() / n, (da * db).sum() / n};
}

// Concordance correlation coefficient with population moments.
template <typename A, typename B>
[[nodiscard]] auto ccc(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& gold) -> typename A::Scalar
{
    detail::check_pair(pred, gold, "ccc");
    const auto m = pair_moments(pred, gold);
    const auto shift = m.mean_a - m.mean_b;
    return 2 * m.cov / (m.var_a + m.var_b + shift * shift);
}

template <typename A, typename B>
[[nodiscard]] auto pearson(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) -> typename A::Scalar
{
    detail::check_pair(a, b, "pearson");
    const auto m = pair_moments(a, b);
    return m.cov / std::sqrt(m.var_a * m.var_b);
}

// CCC with `eps` added to the denominator: total for constant inputs.
template <typename A, typename B>
[[nodiscard]] auto ccc_guarded(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& gold,
                               typename A::Scalar eps = 1e-8) -> typename A::Scalar
{
    if (pred.size() != gold.size() || pred.size() == 0) throw ParameterError("ccc: length mismatch");
    const auto m = pair_moments(pred, gold);
    const auto shift = m.mean_a - m.mean_b;
    return 2 * m.cov / (m.var_a + m.var_b + shift * shift + eps);
}

// Partition-level CCC over the concatenation of all sequences.
[[nodiscard]] double ccc_concat(std::span<const Vector> preds, std::span<const Vector> golds);

// Unweighted mean of per-class F1. Classes absent from both inputs score 0.
[[nodiscard]] double macro_f1(std::span<const int> pred, std::span<const int> gold, int n_classes = 5);

[[nodiscard]] inline double combined(double valence_score, double arousal_score)
{
    return 0.5 * valence_score + 0.5 * arousal_score;
}

struct ScoreReport {
    std::string metric = "ccc";
    std::map<std::string, double> per_target;

    // Arithmetic mean of the per-target scores.
    [[nodiscard]] double combined() const;
    // Aligned-column text table.
    [[nodiscard]] std::string to_text() const;
    // `key = value` lines.
    [[nodiscard]] std::string to_key_value() const;
};

} // namespace muse::metrics
