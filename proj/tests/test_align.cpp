#include <doctest.h>

#include <numbers>
#include <random>

#include "muse/align.hpp"
#include "muse/metrics.hpp"
#include "muse/synth.hpp"
#include "oracles.hpp"

using namespace muse;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector x(static_cast<Index>(v.size()));
    Index i = 0;
    for (double d : v) x(i++) = d;
    return x;
}

Vector to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

void check_path_shape(const align::WarpPath& p, Index n, Index m, const Vector& a, const Vector& b)
{
    REQUIRE_FALSE(p.pairs.empty());
    CHECK(p.pairs.front() == std::pair<Index, Index>{0, 0});
    CHECK(p.pairs.back() == std::pair<Index, Index>{n - 1, m - 1});
    double cost = 0;
    for (std::size_t k = 0; k < p.pairs.size(); ++k) {
        const auto [i, j] = p.pairs[k];
        cost += std::abs(a(i) - b(j));
        if (k == 0) continue;
        const auto di = i - p.pairs[k - 1].first;
        const auto dj = j - p.pairs[k - 1].second;
        CHECK(di >= 0);
        CHECK(dj >= 0);
        CHECK(di <= 1);
        CHECK(dj <= 1);
        CHECK(di + dj >= 1);
    }
    CHECK(cost == doctest::Approx(p.cost).epsilon(1e-12));
}

Vector smooth_signal(Index n, double phase)
{
    Vector x(n);
    for (Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) + phase;
        x(i) = std::sin(2 * std::numbers::pi * t / 40.0) + 0.5 * std::sin(2 * std::numbers::pi * t / 17.0);
    }
    return x;
}

} // namespace

TEST_CASE("dtw identical inputs")
{
    const Vector x = vec({1, 2, 3});
    const auto p = align::dtw(x, x);
    CHECK(p.cost == 0.0);
    REQUIRE(p.pairs.size() == 3);
    for (Index k = 0; k < 3; ++k) CHECK(p.pairs[static_cast<std::size_t>(k)] == std::pair<Index, Index>{k, k});
}

TEST_CASE("dtw small example")
{
    const auto p = align::dtw(vec({1, 3}), vec({1, 2, 3}));
    CHECK(p.cost == 1.0);
    check_path_shape(p, 2, 3, vec({1, 3}), vec({1, 2, 3}));
}

TEST_CASE("dtw errors")
{
    CHECK_THROWS_AS((void)align::dtw(vec({1, 2}), Vector()), ParameterError);
    CHECK_THROWS_AS((void)align::dtw(Vector(), vec({1})), ParameterError);
    CHECK_THROWS_AS((void)align::dtw(vec({1, 2, 3, 4, 5}), vec({1, 2}), Index{2}), ParameterError);
}

TEST_CASE("dtw matches exhaustive path search")
{
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> len(1, 6), val(-4, 4), band_pick(0, 3);
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<double> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
        for (auto& v : a) v = val(rng);
        for (auto& v : b) v = val(rng);
        const Vector va = to_vector(a), vb = to_vector(b);
        const auto free = align::dtw(va, vb);
        CHECK(free.cost == oracle::dtw_brute(a, b));
        check_path_shape(free, va.size(), vb.size(), va, vb);

        const int band = static_cast<int>(std::abs(va.size() - vb.size())) + band_pick(rng);
        const auto banded = align::dtw(va, vb, Index{band});
        CHECK(banded.cost == oracle::dtw_brute(a, b, band));
        for (const auto& [i, j] : banded.pairs) CHECK(std::abs(i - j) <= band);
    }
}

TEST_CASE("warp onto reference averages repeated indices")
{
    align::WarpPath p;
    p.pairs = {{0, 0}, {1, 0}, {2, 1}, {2, 2}};
    const Vector w = align::warp_onto_reference(vec({1, 3, 5}), p, 3);
    CHECK(w(0) == 2.0);
    CHECK(w(1) == 5.0);
    CHECK(w(2) == 5.0);
}

TEST_CASE("multi align of identical traces")
{
    const Vector x = smooth_signal(80, 0.0);
    const auto r = align::multi_align(std::vector<Vector>{x, x, x});
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    const Vector z = signal::standardize(x).values;
    for (const auto& w : r.warped_traces) CHECK((w - z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("multi align removes a lag")
{
    synth::SynthConfig cfg;
    cfg.duration_s = 100;
    cfg.min_period_s = 20;
    cfg.max_period_s = 120;
    const Vector base = synth::gen_latent(cfg);
    for (Index lag = 1; lag <= 8; ++lag) {
        // b(t) = a(t - lag), both cut from the same latent
        const Vector a = base.segment(8, 180);
        const Vector b = base.segment(8 - lag, 180);
        const double before = metrics::pearson(a, b);
        const auto r = align::multi_align(std::vector<Vector>{a, b}, {.band = Index{8}});
        CHECK(r.band == 8);
        const double after = metrics::pearson(r.warped_traces[0], r.warped_traces[1]);
        CHECK(after >= 0.99);
        CHECK(after >= before);
        for (const auto& w : r.warped_traces) CHECK(w.size() == 180);
    }
}

TEST_CASE("multi align first rater strategy")
{
    const Vector a = smooth_signal(100, 0.0);
    const Vector b = smooth_signal(100, -2.0);
    align::AlignConfig cfg;
    cfg.strategy = align::ReferenceStrategy::first_rater;
    const auto r = align::multi_align(std::vector<Vector>{a, b}, cfg);
    CHECK(r.iterations == 1);
    CHECK((r.warped_traces[0] - signal::standardize(a).values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("multi align errors")
{
    const Vector a = smooth_signal(50, 0.0);
    CHECK_THROWS_AS((void)align::multi_align(std::vector<Vector>{a}), ParameterError);
    CHECK_THROWS_AS((void)align::multi_align(std::vector<Vector>{a, smooth_signal(49, 0.0)}), ParameterError);
}

TEST_CASE("default band")
{
    CHECK(align::default_band(600) == 60);
    CHECK(align::default_band(5) == 1);
}

TEST_CASE("mean pairwise dtw cost")
{
    const std::vector<Vector> t{vec({0, 1}), vec({0, 1}), vec({0, 3})};
    // pairs: 0, 2, 2
    CHECK(align::mean_pairwise_dtw_cost(t, std::nullopt) == doctest::Approx(4.0 / 3.0));
}
