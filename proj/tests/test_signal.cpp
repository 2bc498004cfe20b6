#include <doctest.h>

#include <random>

#include "muse/signal.hpp"

using namespace muse;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector x(static_cast<Index>(v.size()));
    Index i = 0;
    for (double d : v) x(i++) = d;
    return x;
}

Vector random_vector(std::mt19937_64& rng, Index n)
{
    std::normal_distribution<double> d(0.0, 1.0);
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = d(rng);
    return x;
}

} // namespace

TEST_CASE("standardize small vector")
{
    const auto s = signal::standardize(vec({1, 2, 3}));
    const double z = 1.0 / std::sqrt(2.0 / 3.0);
    CHECK(s.values(0) == doctest::Approx(-z).epsilon(1e-14));
    CHECK(s.values(1) == doctest::Approx(0.0));
    CHECK(s.values(2) == doctest::Approx(z).epsilon(1e-14));
    CHECK_FALSE(s.degenerate);
}

TEST_CASE("standardize constant input sets the degenerate flag")
{
    const auto s = signal::standardize(vec({5, 5, 5}));
    CHECK(s.degenerate);
    CHECK(s.values.isZero(0.0));

    signal::AnnotationTrace t{"r", 2.0, vec({5, 5, 5}), signal::SignalKind::arousal};
    CHECK(signal::standardize(t).degenerate);
}

TEST_CASE("standardize is idempotent")
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector x = random_vector(rng, 50) * 3.0 + Vector::Constant(50, 1.5);
        const Vector once = signal::standardize(x).values;
        const Vector twice = signal::standardize(once).values;
        CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(once.mean()) < 1e-12);
        CHECK(std::sqrt(once.squaredNorm() / 50.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("standardize rejects empty input")
{
    CHECK_THROWS_AS((void)signal::standardize(Vector()), ParameterError);
}

TEST_CASE("resample down and up")
{
    const Vector down = signal::resample(vec({0, 1, 2, 3}), 4.0, 2.0);
    REQUIRE(down.size() == 2);
    CHECK(down(0) == 0.0);
    CHECK(down(1) == 2.0);

    const Vector up = signal::resample(vec({0, 10}), 1.0, 2.0);
    REQUIRE(up.size() == 3);
    CHECK(up(0) == 0.0);
    CHECK(up(1) == doctest::Approx(5.0));
    CHECK(up(2) == 10.0);
}

TEST_CASE("resample at own rate is the identity and keeps endpoints")
{
    std::mt19937_64 rng(5);
    const Vector x = random_vector(rng, 41);
    CHECK(signal::resample(x, 4.0, 4.0) == x);
    const Vector y = signal::resample(x, 4.0, 2.0);
    CHECK(y(0) == x(0));
    CHECK(y(y.size() - 1) == x(x.size() - 1));
    const Vector z = signal::resample(x, 4.0, 1000.0);
    CHECK(z(0) == x(0));
    CHECK(z(z.size() - 1) == doctest::Approx(x(x.size() - 1)).epsilon(1e-12));
}

TEST_CASE("resample length one extends the constant")
{
    const Vector y = signal::resample(vec({7}), 1.0, 4.0);
    CHECK(y.size() >= 1);
    CHECK((y.array() == 7.0).all());
}

TEST_CASE("resample trace keeps metadata")
{
    signal::AnnotationTrace t{"a", 1000.0, Vector::LinSpaced(1001, 0.0, 1.0), signal::SignalKind::physio};
    const auto r = signal::resample(t, 2.0);
    CHECK(r.sample_rate_hz == 2.0);
    CHECK(r.size() == 3);
    CHECK(r.rater_id == "a");
    CHECK(r.values(2) == doctest::Approx(1.0));
}

TEST_CASE("savitzky golay weights for window 5 order 2")
{
    const Vector w = signal::savitzky_golay_weights(2, 2, 2);
    const double expect[] = {-3, 12, 17, 12, -3};
    for (int i = 0; i < 5; ++i) CHECK(w(i) == doctest::Approx(expect[i] / 35.0).epsilon(1e-13));

    // applied at an interior sample
    std::mt19937_64 rng(9);
    const Vector x = random_vector(rng, 20);
    const Vector y = signal::savitzky_golay(x, 5, 2);
    for (Index i = 2; i < 18; ++i) {
        double direct = 0;
        for (int k = 0; k < 5; ++k) direct += expect[k] / 35.0 * x(i - 2 + k);
        CHECK(y(i) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("savitzky golay reproduces polynomials up to the order")
{
    const Index n = 60;
    Vector quad(n), cubic(n), cst = Vector::Constant(n, 4.2);
    for (Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * 0.1;
        quad(i) = t * t;
        cubic(i) = 0.3 * t * t * t - t * t + 2.0 * t - 1.0;
    }
    CHECK((signal::savitzky_golay(quad, 7, 2) - quad).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((signal::savitzky_golay(cubic, 26, 3) - cubic).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((signal::savitzky_golay(cst, 9, 0) - cst).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("savitzky golay parameter errors")
{
    const Vector x = Vector::LinSpaced(30, 0, 1);
    CHECK_THROWS_AS((void)signal::savitzky_golay(x, 5, 5), ParameterError);
    CHECK_THROWS_AS((void)signal::savitzky_golay(x, 5, 7), ParameterError);
    CHECK_THROWS_AS((void)signal::savitzky_golay(x, 1, 0), ParameterError);
    CHECK_THROWS_AS((void)signal::savitzky_golay(x, 31, 2), ParameterError);
}

TEST_CASE("trace validation")
{
    signal::AnnotationTrace ok{"a", 2.0, vec({1, 2}), signal::SignalKind::arousal};
    CHECK_NOTHROW(signal::validate(ok));
    auto bad = ok;
    bad.values(1) = std::nan("");
    CHECK_THROWS(signal::validate(bad));
    bad = ok;
    bad.sample_rate_hz = 0;
    CHECK_THROWS(signal::validate(bad));

    signal::RaterSet set{"r", {ok, ok}};
    CHECK_NOTHROW(signal::validate(set));
    set.traces[1].values = vec({1, 2, 3});
    CHECK_THROWS_AS(signal::validate(set), ParameterError);
    set.traces.pop_back();
    CHECK_THROWS_AS(signal::validate(set), ParameterError);
}

TEST_CASE("kind names round trip")
{
    for (auto k : {signal::SignalKind::valence, signal::SignalKind::arousal, signal::SignalKind::physio})
        CHECK(signal::parse_kind(signal::to_string(k)) == k);
    CHECK_THROWS_AS((void)signal::parse_kind("dominance"), ParameterError);
}
