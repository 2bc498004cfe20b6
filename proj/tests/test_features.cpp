#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "muse/features.hpp"

using namespace muse;
using discretize::Target;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector x(static_cast<Index>(v.size()));
    Index i = 0;
    for (double d : v) x(i++) = d;
    return x;
}

// Feature definitions written out longhand.
std::map<std::string, double> reference_features(const std::vector<double>& x)
{
    const auto n = static_cast<double>(x.size());
    double mean = 0;
    for (double v : x) mean += v;
    mean /= n;
    std::vector<double> s = x;
    std::sort(s.begin(), s.end());
    auto q = [&](double p) {
        const double pos = p * (n - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, s.size() - 1);
        return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
    };
    std::map<std::string, double> f;
    double var = 0, energy = 0, soc = 0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
        energy += v * v;
    }
    for (std::size_t i = 1; i < x.size(); ++i) soc += std::abs(x[i] - x[i - 1]);
    int peaks = 0, below = 0;
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
        if (x[i] > x[i - 1] && x[i] > x[i + 1]) ++peaks;
    int run_b = 0, run_a = 0, best_b = 0, best_a = 0;
    for (double v : x) {
        if (v < mean) ++below;
        run_b = v < mean ? run_b + 1 : 0;
        run_a = v > mean ? run_a + 1 : 0;
        best_b = std::max(best_b, run_b);
        best_a = std::max(best_a, run_a);
    }
    int repeated = 0;
    for (double v : x)
        if (std::count(x.begin(), x.end(), v) > 1) ++repeated;
    f["median"] = q(0.5);
    f["std"] = std::sqrt(var / n);
    f["q10"] = q(0.1);
    f["q90"] = q(0.9);
    f["relEnergy"] = energy / n;
    f["relSoC"] = soc / (n - 1);
    f["relPeaks"] = peaks / n;
    f["relLSBMe"] = best_b / n;
    f["relLSAMe"] = best_a / n;
    f["relCBMe"] = below / n;
    f["mean"] = mean;
    f["q5"] = q(0.05);
    f["q25"] = q(0.25);
    f["q33"] = q(0.33);
    f["q66"] = q(0.66);
    f["q75"] = q(0.75);
    f["q95"] = q(0.95);
    f["PreDa"] = repeated / n;
    return f;
}

} // namespace

TEST_CASE("feature name sets")
{
    const auto& a = discretize::feature_names(Target::arousal);
    const auto& v = discretize::feature_names(Target::valence);
    CHECK(a.size() == 10);
    CHECK(v.size() == 18);
    for (const auto& name : a) CHECK(std::find(v.begin(), v.end(), name) != v.end());
    for (const char* extra : {"mean", "q5", "q25", "q33", "q66", "q75", "q95", "PreDa"})
        CHECK(std::find(v.begin(), v.end(), extra) != v.end());
}

TEST_CASE("alternating segment")
{
    const auto f = discretize::segment_features(vec({0, 1, 0, 1}), Target::arousal);
    CHECK(f["relSoC"] == 1.0);
    CHECK(f["relCBMe"] == 0.5);
    CHECK(f["relPeaks"] == 0.25);
}

TEST_CASE("single spike segment")
{
    const auto f = discretize::segment_features(vec({0, 0, 0, 10}), Target::valence);
    CHECK(f["mean"] == 2.5);
    CHECK(f["relCBMe"] == 0.75);
    CHECK(f["relLSBMe"] == 0.75);
    CHECK(f["relLSAMe"] == 0.25);
    CHECK(f["PreDa"] == 0.75);
    CHECK(f["median"] == 0.0);
}

TEST_CASE("constant segment")
{
    const auto f = discretize::segment_features(Vector::Constant(9, 0.3), Target::valence);
    CHECK(f["std"] == 0.0);
    CHECK(f["relSoC"] == 0.0);
    CHECK(f["relPeaks"] == 0.0);
    CHECK(f["relCBMe"] == 0.0);
    CHECK(f["PreDa"] == 1.0);
}

TEST_CASE("segment too short")
{
    CHECK_THROWS_AS((void)discretize::segment_features(vec({1}), Target::arousal), ParameterError);
}

TEST_CASE("features match the longhand definitions")
{
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> len(2, 60), level(-3, 3);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> x(static_cast<std::size_t>(len(rng)));
        for (auto& v : x) v = 0.5 * level(rng);
        const Vector vx = Eigen::Map<const Vector>(x.data(), static_cast<Index>(x.size()));
        const auto f = discretize::segment_features(vx, Target::valence);
        const auto r = reference_features(x);
        for (const auto& name : f.names) CHECK_MESSAGE(f[name] == doctest::Approx(r.at(name)).epsilon(1e-12), name);
    }
}

TEST_CASE("features under shift and scale")
{
    std::mt19937_64 rng(13);
    std::normal_distribution<double> d(0, 1);
    Vector x(40);
    for (Index i = 0; i < 40; ++i) x(i) = d(rng);
    const auto f = discretize::segment_features(x, Target::valence);
    const auto g = discretize::segment_features(3.0 * x, Target::valence);
    for (const char* scaled : {"median", "std", "q10", "q90", "mean", "q5", "q95", "relSoC"})
        CHECK(g[scaled] == doctest::Approx(3.0 * f[scaled]).epsilon(1e-12));
    for (const char* count : {"relPeaks", "relLSBMe", "relLSAMe", "relCBMe", "PreDa"}) CHECK(g[count] == f[count]);
    CHECK(g["relEnergy"] == doctest::Approx(9.0 * f["relEnergy"]).epsilon(1e-12));
}

TEST_CASE("quantile interpolation")
{
    const Vector x = vec({4, 1, 3, 2});
    CHECK(discretize::quantile(x, 0.0) == 1.0);
    CHECK(discretize::quantile(x, 1.0) == 4.0);
    CHECK(discretize::quantile(x, 0.5) == 2.5);
    CHECK(discretize::quantile(x, 0.25) == doctest::Approx(1.75));
    CHECK_THROWS_AS((void)discretize::quantile(x, 1.5), ParameterError);
}
