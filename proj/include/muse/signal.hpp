#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "muse/error.hpp"

namespace muse {

template <typename Scalar>
using Sequence = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Vector = Sequence<double>;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

} // namespace muse

namespace muse::signal {

enum class SignalKind { valence, arousal, physio };

std::string_view to_string(SignalKind kind);
SignalKind parse_kind(std::string_view name);

// One rater's continuous signal on a uniform time grid.
struct AnnotationTrace {
    std::string rater_id;
    double sample_rate_hz = 1.0;
    Vector values;
    SignalKind kind = SignalKind::arousal;
    // Set by standardize() when the input was constant.
    bool degenerate = false;

    [[nodiscard]] Index size() const { return values.size(); }
    [[nodiscard]] double duration_s() const { return static_cast<double>(values.size() - 1) / sample_rate_hz; }
};

// Co-indexed traces of one recording: same kind, rate and length.
struct RaterSet {
    std::string recording_id;
    std::vector<AnnotationTrace> traces;
};

void validate(const AnnotationTrace& trace);
void validate(const RaterSet& set, std::size_t min_traces = 2);

template <typename Scalar>
struct Standardized {
    Sequence<Scalar> values;
    bool degenerate = false;
};

// Constant up to rounding: the spread is below 1e4 ulp of the magnitude, so
// a resampled or smoothed constant still counts.
template <typename Derived>
[[nodiscard]] bool is_constant(const Eigen::MatrixBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0) return true;
    const Scalar hi = x.maxCoeff();
    const Scalar lo = x.minCoeff();
    const Scalar magnitude = std::max(std::abs(hi), std::abs(lo));
    return hi - lo <= Scalar(1e4) * std::numeric_limits<Scalar>::epsilon() * magnitude;
}

// Zero mean, unit population standard deviation. Constant input maps to zeros.
template <typename Derived>
[[nodiscard]] auto standardize(const Eigen::MatrixBase<Derived>& x) -> Standardized<typename Derived::Scalar>
{
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0) throw ParameterError("standardize: empty sequence");
    Standardized<Scalar> out;
    if (is_constant(x)) {
        out.values = Sequence<Scalar>::Zero(x.size());
        out.degenerate = true;
        return out;
    }
    const Scalar mean = x.mean();
    const Sequence<Scalar> centred = x.derived().array() - mean;
    const Scalar sd = std::sqrt(centred.squaredNorm() / static_cast<Scalar>(x.size()));
    out.values = centred / sd;
    return out;
}

[[nodiscard]] AnnotationTrace standardize(const AnnotationTrace& trace);

// Linear interpolation onto a uniform grid at target_hz starting at t = 0
// and spanning the source duration.
template <typename Derived>
[[nodiscard]] auto resample(const Eigen::MatrixBase<Derived>& x, double source_hz, double target_hz)
    -> Sequence<typename Derived::Scalar>
{
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0) throw ParameterError("resample: empty sequence");
    if (!(source_hz > 0) || !(target_hz > 0)) throw ParameterError("resample: rates must be positive");
    if (source_hz == target_hz) return x;

    const Index n = x.size();
    if (n == 1) {
        const auto count = std::max<Index>(1, static_cast<Index>(std::ceil(target_hz / source_hz - 1e-9)));
        return Sequence<Scalar>::Constant(count, x(0));
    }
    const double duration = static_cast<double>(n - 1) / source_hz;
    const auto count = static_cast<Index>(std::floor(duration * target_hz + 1e-9)) + 1;
    Sequence<Scalar> out(count);
    for (Index k = 0; k < count; ++k) {
        const double pos = static_cast<double>(k) * source_hz / target_hz;
        auto lo = static_cast<Index>(std::floor(pos + 1e-9));
        if (lo >= n - 1) {
            out(k) = x(n - 1);
            continue;
        }
        const double frac = std::max(0.0, pos - static_cast<double>(lo));
        out(k) = frac == 0.0 ? x(lo) : x(lo) + static_cast<Scalar>(frac) * (x(lo + 1) - x(lo));
    }
    return out;
}

[[nodiscard]] AnnotationTrace resample(const AnnotationTrace& trace, double target_hz);

// Smoothing weights of a least-squares polynomial fit over `left` samples
// before and `right` samples after the evaluation point.
template <typename Scalar = double>
[[nodiscard]] Sequence<Scalar> savitzky_golay_weights(Index left, Index right, Index order)
{
    const Index m = left + right + 1;
    const Index p = std::min(order, m - 1);
    const Scalar scale = static_cast<Scalar>(std::max<Index>({left, right, 1}));
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> design(m, p + 1);
    for (Index r = 0; r < m; ++r) {
        const Scalar t = static_cast<Scalar>(r - left) / scale;
        Scalar power = 1;
        for (Index c = 0; c <= p; ++c) {
            design(r, c) = power;
            power *= t;
        }
    }
    Sequence<Scalar> unit = Sequence<Scalar>::Zero(p + 1);
    unit(0) = 1;
    const Sequence<Scalar> z = (design.transpose() * design).ldlt().solve(unit);
    return design * z;
}

// Savitzky-Golay smoothing. The evaluation point sits at index window/2 of
// the window, so even windows extend one sample further into the past.
// Near the edges both sides shrink by the same amount.
template <typename Derived>
[[nodiscard]] auto savitzky_golay(const Eigen::MatrixBase<Derived>& x, Index window, Index order)
    -> Sequence<typename Derived::Scalar>
{
    using Scalar = typename Derived::Scalar;
    if (window < 2) throw ParameterError("savitzky_golay: window must be >= 2");
    if (order < 0) throw ParameterError("savitzky_golay: polyorder must be >= 0");
    if (order >= window) throw ParameterError("savitzky_golay: polyorder must be smaller than window");
    const Index n = x.size();
    if (window > n) throw ParameterError("savitzky_golay: window longer than signal");

    const Index left = window / 2;
    const Index right = window - 1 - left;
    const Sequence<Scalar> interior = savitzky_golay_weights<Scalar>(left, right, order);

    Sequence<Scalar> out(n);
    for (Index i = 0; i < n; ++i) {
        const Index deficit = std::max<Index>({0, left - i, right - (n - 1 - i)});
        if (deficit == 0) {
            out(i) = interior.dot(x.segment(i - left, window));
            continue;
        }
        const Index l = std::max<Index>(0, left - deficit);
        const Index r = std::max<Index>(0, right - deficit);
        const Sequence<Scalar> w = savitzky_golay_weights<Scalar>(l, r, order);
        out(i) = w.dot(x.segment(i - l, l + r + 1));
    }
    return out;
}

[[nodiscard]] AnnotationTrace savitzky_golay(const AnnotationTrace& trace, Index window, Index order);

} // namespace muse::signal
