#pragma once

// Plain reference implementations, written without the library, that the
// tests compare against.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline long double mean(const Vec& x)
{
    long double s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += x(i);
    return s / static_cast<long double>(x.size());
}

struct Moments {
    long double ma, mb, vaa, vbb, vab;
};

inline Moments moments(const Vec& a, const Vec& b)
{
    const long double ma = mean(a);
    const long double mb = mean(b);
    long double saa = 0, sbb = 0, sab = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const long double da = a(i) - ma;
        const long double db = b(i) - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    const auto n = static_cast<long double>(a.size());
    return {ma, mb, saa / n, sbb / n, sab / n};
}

inline double ccc(const Vec& a, const Vec& b)
{
    const auto m = moments(a, b);
    return static_cast<double>(2 * m.vab / (m.vaa + m.vbb + (m.ma - m.mb) * (m.ma - m.mb)));
}

inline double pearson(const Vec& a, const Vec& b)
{
    const auto m = moments(a, b);
    return static_cast<double>(m.vab / std::sqrt(m.vaa * m.vbb));
}

// Cheapest monotone path by visiting every path. band < 0: unconstrained.
inline double dtw_brute(const std::vector<double>& a, const std::vector<double>& b, int band = -1)
{
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    double best = std::numeric_limits<double>::infinity();
    std::function<void(int, int, double)> walk = [&](int i, int j, double acc) {
        if (band >= 0 && std::abs(i - j) > band) return;
        acc += std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)]);
        if (i == n - 1 && j == m - 1) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
        if (i + 1 < n) walk(i + 1, j, acc);
        if (j + 1 < m) walk(i, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

// Cyclic Jacobi rotations; eigenvalues descending with matching columns.
inline std::pair<Vec, Mat> jacobi_eigen(Mat a)
{
    const Eigen::Index n = a.rows();
    Mat v = Mat::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double kp = a(k, p), kq = a(k, q);
                    a(k, p) = c * kp - s * kq;
                    a(k, q) = s * kp + c * kq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double pk = a(p, k), qk = a(q, k);
                    a(p, k) = c * pk - s * qk;
                    a(q, k) = s * pk + c * qk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double kp = v(k, p), kq = v(k, q);
                    v(k, p) = c * kp - s * kq;
                    v(k, q) = s * kp + c * kq;
                }
            }
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
    Vec values(n);
    Mat vectors(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
        vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
    }
    return {values, vectors};
}

// Covariance with 1/N normalisation, by explicit sums.
inline Mat covariance(const Mat& rows)
{
    const Eigen::Index n = rows.rows(), d = rows.cols();
    Vec mu = Vec::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) mu += rows.row(i).transpose();
    mu /= static_cast<double>(n);
    Mat c = Mat::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index p = 0; p < d; ++p)
            for (Eigen::Index q = 0; q < d; ++q) c(p, q) += (rows(i, p) - mu(p)) * (rows(i, q) - mu(q));
    return c / static_cast<double>(n);
}

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b)
{
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    auto pairs = [](double x) { return x * (x - 1) / 2; };
    double index = 0, sa = 0, sb = 0;
    for (const auto& [k, v] : table) index += pairs(v);
    for (const auto& [k, v] : ra) sa += pairs(v);
    for (const auto& [k, v] : rb) sb += pairs(v);
    const double expected = sa * sb / pairs(static_cast<double>(a.size()));
    const double best = (sa + sb) / 2;
    if (best == expected) return 1.0;
    return (index - expected) / (best - expected);
}

inline double sigmoid(double x)
{
    return 1 / (1 + std::exp(-x));
}

// One LSTM direction, element by element. W: 4h x in, U: 4h x h, b: 4h,
// gate blocks ordered input, forget, cell, output. x: T x in; returns T x h.
inline Mat lstm_direction(const Mat& W, const Mat& U, const Vec& b, const Mat& x, bool reverse)
{
    const Eigen::Index T = x.rows(), in = x.cols(), h = U.cols();
    Mat out(T, h);
    std::vector<double> hs(static_cast<std::size_t>(h), 0.0), cs(static_cast<std::size_t>(h), 0.0);
    for (Eigen::Index s = 0; s < T; ++s) {
        const Eigen::Index t = reverse ? T - 1 - s : s;
        std::vector<double> z(static_cast<std::size_t>(4 * h));
        for (Eigen::Index k = 0; k < 4 * h; ++k) {
            double acc = b(k);
            for (Eigen::Index j = 0; j < in; ++j) acc += W(k, j) * x(t, j);
            for (Eigen::Index j = 0; j < h; ++j) acc += U(k, j) * hs[static_cast<std::size_t>(j)];
            z[static_cast<std::size_t>(k)] = acc;
        }
        for (Eigen::Index k = 0; k < h; ++k) {
            const auto u = static_cast<std::size_t>(k), hh = static_cast<std::size_t>(h);
            const double i = sigmoid(z[u]);
            const double f = sigmoid(z[hh + u]);
            const double g = std::tanh(z[2 * hh + u]);
            const double o = sigmoid(z[3 * hh + u]);
            cs[u] = f * cs[u] + i * g;
            hs[u] = o * std::tanh(cs[u]);
            out(t, k) = hs[u];
        }
    }
    return out;
}

// Central differences of f at x, one coordinate at a time.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double delta)
{
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double keep = x(i);
        x(i) = keep + delta;
        const double up = f(x);
        x(i) = keep - delta;
        const double down = f(x);
        x(i) = keep;
        g(i) = (up - down) / (2 * delta);
    }
    return g;
}

// Largest |a - b| / max(|a| + |b|, floor) over all coordinates.
inline double max_relative_error(const Vec& a, const Vec& b, double floor = 1e-7)
{
    double worst = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a(i) - b(i)) / std::max(std::abs(a(i)) + std::abs(b(i)), floor));
    return worst;
}

} // namespace oracle
