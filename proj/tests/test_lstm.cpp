#include <doctest.h>

#include <random>

#include "muse/lstm.hpp"
#include "muse/metrics.hpp"
#include "oracles.hpp"

using namespace muse;
using namespace muse::seq;

namespace {

Matrix random_matrix(std::uint64_t seed, Index rows, Index cols)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

Matrix block(const SequenceRegressor& m, const std::string& name)
{
    for (const auto& b : m.blocks())
        if (b.name == name) return Eigen::Map<const Matrix>(m.parameters().data() + b.offset, b.rows, b.cols);
    FAIL("no block " << name);
    return {};
}

// Top-layer states recomputed element by element.
Matrix oracle_states(const SequenceRegressor& m, const Matrix& x)
{
    Matrix in = x;
    const Index h = m.config().hidden;
    for (int l = 0; l < m.config().layers; ++l) {
        Matrix out(x.rows(), m.state_dim());
        for (int d = 0; d < m.directions(); ++d) {
            const std::string tag = "layer" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
            out.middleCols(d * h, h) =
                oracle::lstm_direction(block(m, tag + ".W"), block(m, tag + ".U"), block(m, tag + ".b"), in, d == 1);
        }
        in = out;
    }
    return in;
}

RegressorConfig tiny(bool bidirectional, int layers, Head head)
{
    RegressorConfig c;
    c.hidden = 4;
    c.layers = layers;
    c.bidirectional = bidirectional;
    c.seed = 7;
    c.head = head;
    return c;
}

} // namespace

TEST_CASE("parameter count follows the closed form")
{
    for (bool bi : {false, true}) {
        for (int layers : {1, 2, 4}) {
            RegressorConfig c;
            c.hidden = 8;
            c.layers = layers;
            c.bidirectional = bi;
            const SequenceRegressor m(5, c);
            const Index dirs = bi ? 2 : 1;
            Index expect = dirs * lstm_parameter_count(5, 8);
            for (int l = 1; l < layers; ++l) expect += dirs * lstm_parameter_count(8 * dirs, 8);
            expect += 8 * dirs + 1;
            CHECK(m.parameter_count() == expect);
        }
    }
    RegressorConfig bi;
    bi.hidden = 32;
    bi.bidirectional = true;
    CHECK(SequenceRegressor(3, bi).state_dim() == 64);
}

TEST_CASE("forward matches the scalar recurrence")
{
    const Matrix x = random_matrix(1, 5, 3);
    for (bool bi : {false, true}) {
        for (int layers : {1, 2}) {
            const SequenceRegressor m(3, tiny(bi, layers, Head::regression));
            const Matrix states = oracle_states(m, x);
            CHECK((m.hidden_states(x) - states).cwiseAbs().maxCoeff() < 1e-10);
            const Vector head = block(m, "head.W").row(0).transpose();
            const double bias = block(m, "head.b")(0, 0);
            const Vector pred = m.predict(x);
            for (Index t = 0; t < 5; ++t) CHECK(std::abs(pred(t) - (states.row(t).dot(head) + bias)) < 1e-10);
        }
    }
    const SequenceRegressor c(3, tiny(true, 2, Head::classification));
    const Matrix states = oracle_states(c, x);
    const Vector logits = block(c, "head.W") * states.colwise().mean().transpose() + Vector(block(c, "head.b"));
    CHECK((c.logits(x) - logits).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("forget gate bias starts at one")
{
    const SequenceRegressor m(3, tiny(true, 2, Head::regression));
    for (const auto& b : m.blocks()) {
        if (b.name.size() < 2 || b.name.substr(b.name.size() - 2) != ".b" || b.name.rfind("layer", 0) != 0) continue;
        CHECK(m.parameters().segment(b.offset + 4, 4).isOnes(0.0));
    }
}

TEST_CASE("zero parameters give zero output")
{
    SequenceRegressor m(3, tiny(true, 2, Head::regression));
    m.parameters().setZero();
    CHECK(m.predict(random_matrix(2, 9, 3)).isZero(0.0));
    CHECK(m.hidden_states(random_matrix(3, 9, 3)).isZero(0.0));
}

TEST_CASE("forward is deterministic and seeded")
{
    const Matrix x = random_matrix(4, 12, 3);
    const SequenceRegressor a(3, tiny(false, 1, Head::regression));
    const SequenceRegressor b(3, tiny(false, 1, Head::regression));
    CHECK(a.predict(x) == a.predict(x));
    CHECK(a.parameters() == b.parameters());
    auto other = tiny(false, 1, Head::regression);
    other.seed = 8;
    CHECK(SequenceRegressor(3, other).parameters() != a.parameters());
}

TEST_CASE("dimension mismatch")
{
    const SequenceRegressor m(3, tiny(false, 1, Head::regression));
    CHECK_THROWS_AS((void)m.predict(random_matrix(1, 4, 2)), ParameterError);
}

TEST_CASE("ccc loss values")
{
    const Vector g = Vector::LinSpaced(10, -1, 1);
    CHECK(ccc_loss(g, g) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(ccc_loss(Vector(-g), g) == doctest::Approx(2.0).epsilon(1e-7));
    const double flat = ccc_loss(Vector::Constant(10, 0.3), g);
    CHECK(std::isfinite(flat));
    CHECK(flat <= 2.0);

    const Vector p = random_matrix(5, 10, 1).col(0);
    Vector grad;
    (void)ccc_loss(p, g, &grad);
    const Vector fd = oracle::numeric_gradient([&](const Vector& q) { return ccc_loss(q, g); }, p, 1e-6);
    CHECK(oracle::max_relative_error(grad, fd) < 1e-6);
}

TEST_CASE("cross entropy gradient")
{
    const Vector z = random_matrix(6, 5, 1).col(0);
    Vector grad;
    const double loss = cross_entropy(z, 2, &grad);
    const Vector p = z.array().exp() / z.array().exp().sum();
    CHECK(loss == doctest::Approx(-std::log(p(2))));
    const Vector fd = oracle::numeric_gradient([&](const Vector& q) { return cross_entropy(q, 2); }, z, 1e-6);
    CHECK(oracle::max_relative_error(grad, fd) < 1e-6);
    CHECK_THROWS_AS((void)cross_entropy(z, 5), ParameterError);
}

TEST_CASE("gradients match finite differences")
{
    const Matrix x = random_matrix(10, 6, 3);
    const Vector target = random_matrix(11, 6, 1).col(0);
    for (Head head : {Head::regression, Head::classification}) {
        for (bool bi : {false, true}) {
            SequenceRegressor m(3, tiny(bi, 2, head));
            Vector grad = Vector::Zero(m.parameter_count());
            if (head == Head::regression) (void)m.loss_and_gradient(x, target, &grad);
            else (void)m.loss_and_gradient(x, 3, &grad);
            const Vector p0 = m.parameters();
            auto f = [&](const Vector& p) {
                m.parameters() = p;
                return head == Head::regression ? m.loss_and_gradient(x, target, nullptr)
                                                : m.loss_and_gradient(x, 3, nullptr);
            };
            const Vector fd = oracle::numeric_gradient(f, p0, 1e-5);
            m.parameters() = p0;
            CHECK(oracle::max_relative_error(grad, fd) < 1e-4);
        }
    }
}

TEST_CASE("batched loss equals the sum of single losses")
{
    const SequenceRegressor m(3, tiny(true, 2, Head::regression));
    std::vector<Matrix> xs;
    std::vector<Vector> ys;
    for (std::uint64_t k = 0; k < 4; ++k) {
        xs.push_back(random_matrix(20 + k, 7, 3));
        ys.push_back(random_matrix(30 + k, 7, 1).col(0));
    }
    double single = 0;
    Vector g_single = Vector::Zero(m.parameter_count());
    for (std::size_t k = 0; k < 4; ++k) single += m.loss_and_gradient(xs[k], ys[k], &g_single);
    std::vector<const Matrix*> fp;
    std::vector<const Vector*> yp;
    for (std::size_t k = 0; k < 4; ++k) {
        fp.push_back(&xs[k]);
        yp.push_back(&ys[k]);
    }
    Vector g_batch = Vector::Zero(m.parameter_count());
    const double batch = m.loss_and_gradient(fp, yp, &g_batch);
    CHECK(batch == doctest::Approx(single).epsilon(1e-12));
    CHECK((g_batch - g_single).cwiseAbs().maxCoeff() < 1e-12);

    const SequenceRegressor c(3, tiny(false, 1, Head::classification));
    const std::vector<int> labels{0, 1, 4, 2};
    double cs = 0;
    for (std::size_t k = 0; k < 4; ++k) cs += c.loss_and_gradient(xs[k], labels[k], nullptr);
    CHECK(c.loss_and_gradient(fp, labels, nullptr) == doctest::Approx(cs).epsilon(1e-12));
}

TEST_CASE("head gradient vanishes at a perfect fit")
{
    SequenceRegressor m(3, tiny(false, 1, Head::regression));
    const Matrix x = random_matrix(12, 15, 3);
    const Vector gold = m.predict(x);
    Vector grad = Vector::Zero(m.parameter_count());
    const double loss = m.loss_and_gradient(x, gold, &grad);
    // only the denominator guard keeps the loss above zero
    const double var = (gold.array() - gold.mean()).square().mean();
    CHECK(loss == doctest::Approx(1e-8 / (2 * var + 1e-8)).epsilon(1e-6));
    for (const auto& b : m.blocks())
        if (b.name.rfind("head", 0) == 0) CHECK(grad.segment(b.offset, b.size()).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("search grid")
{
    RegressorConfig c;
    CHECK_NOTHROW(check_grid(c, Task::wilder));
    c.hidden = 48;
    CHECK_THROWS_AS(check_grid(c, Task::wilder), ParameterError);
    c.hidden = 128;
    c.learning_rate = 2e-4;
    CHECK_THROWS_AS(check_grid(c, Task::wilder), ParameterError);
    CHECK_NOTHROW(check_grid(c, Task::stress));
    c.learning_rate = 1e-2;
    CHECK_NOTHROW(check_grid(c, Task::sent));
    c.l2_penalty = 0.02;
    CHECK_THROWS_AS(check_grid(c, Task::sent), ParameterError);
    CHECK(parse_task("physio") == Task::physio);
    CHECK_THROWS_AS((void)parse_task("humor"), ParameterError);
}
