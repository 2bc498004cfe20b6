#include <doctest.h>

#include <functional>
#include <limits>
#include <random>

#include "muse/latefusion.hpp"
#include "muse/metrics.hpp"
#include "muse/synth.hpp"

using namespace muse;
using namespace muse::late;
using dataio::Split;

namespace {

// Recordings whose streams are noisy copies of a latent target.
FusionPlan noisy_plan(std::uint64_t seed, std::vector<double> noise, int n_train = 6, Index length = 240)
{
    FusionPlan plan;
    for (std::size_t k = 0; k < noise.size(); ++k) plan.stream_names.push_back("s" + std::to_string(k));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    for (int r = 0; r < n_train + 4; ++r) {
        synth::SynthConfig cfg;
        cfg.seed = seed * 100 + static_cast<std::uint64_t>(r);
        cfg.duration_s = static_cast<double>(length) / cfg.rate_hz;
        FusionRecording rec;
        rec.id = "rec" + std::to_string(r);
        rec.split = r < n_train ? Split::train : (r < n_train + 2 ? Split::devel : Split::test);
        rec.gold = synth::gen_latent(cfg);
        rec.streams.resize(length, static_cast<Index>(noise.size()));
        for (std::size_t k = 0; k < noise.size(); ++k)
            for (Index t = 0; t < length; ++t)
                rec.streams(t, static_cast<Index>(k)) = rec.gold(t) + noise[k] * g(rng);
        plan.recordings.push_back(std::move(rec));
    }
    return plan;
}

double split_ccc(const FusionPlan& plan, Split split, const std::function<Vector(const FusionRecording&)>& pred)
{
    std::vector<Vector> p, g;
    for (const auto& r : plan.recordings)
        if (r.split == split) {
            p.push_back(pred(r));
            g.push_back(r.gold);
        }
    return metrics::ccc_concat(p, g);
}

seq::RegressorConfig quick(seq::Task task)
{
    auto c = fusion_config(task, 101);
    c.max_epochs = 150;
    c.patience = 150;
    return c;
}

} // namespace

TEST_CASE("fixed fusion configurations")
{
    for (auto task : {seq::Task::wilder, seq::Task::stress, seq::Task::physio}) {
        const auto c = fusion_config(task);
        CHECK_FALSE(c.bidirectional);
        CHECK(c.hidden == 64);
        CHECK(c.layers == 1);
        CHECK(c.learning_rate == 1e-4);
        CHECK(c.head == seq::Head::regression);
    }
    const auto s = fusion_config(seq::Task::sent);
    CHECK(s.bidirectional);
    CHECK(s.hidden == 32);
    CHECK(s.layers == 2);
    CHECK(s.learning_rate == 5e-3);
    CHECK(s.head == seq::Head::classification);
}

TEST_CASE("fusion preconditions")
{
    auto plan = noisy_plan(1, {0.1});
    CHECK_THROWS_AS((void)fuse_predictions(plan, seq::Task::stress), ParameterError);

    plan = noisy_plan(1, {0.1, 0.2});
    plan.recordings[0].streams.conservativeResize(Eigen::NoChange, 1);
    CHECK_THROWS_AS((void)fuse_predictions(plan, seq::Task::stress), ParameterError);

    plan = noisy_plan(1, {0.1, 0.2});
    plan.recordings[1].gold.conservativeResize(10);
    CHECK_THROWS_AS((void)fuse_predictions(plan, seq::Task::stress), ParameterError);
}

TEST_CASE("fusion never reads test gold")
{
    auto plan = noisy_plan(2, {0.2, 0.5});
    auto cfg = fusion_config(seq::Task::stress);
    cfg.max_epochs = 3;
    const auto a = fuse_predictions(plan, seq::Task::stress, 101, dataio::WindowSpec{60, 20}, cfg);
    for (auto& r : plan.recordings)
        if (r.split == Split::test) r.gold = Vector::Constant(r.gold.size(), std::numeric_limits<double>::quiet_NaN());
    const auto b = fuse_predictions(plan, seq::Task::stress, 101, dataio::WindowSpec{60, 20}, cfg);
    for (const auto& r : plan.recordings) {
        REQUIRE(a.predictions.count(r.id) == 1);
        CHECK(a.predictions.at(r.id) == b.predictions.at(r.id));
    }
    CHECK(a.trained.model.parameters() == b.trained.model.parameters());
}

TEST_CASE("a stream equal to the gold signal is learnable")
{
    auto plan = noisy_plan(3, {0.0, 0.6});
    // the fixed fusion learning rate is small, so give it room
    auto cfg = quick(seq::Task::stress);
    cfg.max_epochs = 500;
    cfg.patience = 500;
    const auto r = fuse_predictions(plan, seq::Task::stress, 101, dataio::WindowSpec{60, 10}, cfg);
    const double stream = split_ccc(plan, Split::train, [](const FusionRecording& x) { return Vector(x.streams.col(0)); });
    const double fused = split_ccc(plan, Split::train, [&](const FusionRecording& x) { return r.predictions.at(x.id); });
    MESSAGE("stream " << stream << " fused " << fused);
    CHECK(fused >= stream - 0.01);
    REQUIRE(r.stream_devel_scores.size() == 2);
    CHECK(r.stream_devel_scores[0] == doctest::Approx(1.0));
}

TEST_CASE("duplicated streams match single stream fusion")
{
    const auto single_plan = noisy_plan(4, {0.3}, 12);
    auto dup = single_plan;
    dup.stream_names = {"a", "b"};
    for (auto& rec : dup.recordings) rec.streams = rec.streams.replicate(1, 2).eval();

    const auto cfg = fusion_config(seq::Task::stress);
    const dataio::WindowSpec win{60, 10};
    const auto fused = fuse_predictions(dup, seq::Task::stress, 101, win, cfg);

    // the same network trained on the one stream directly
    std::vector<seq::Sample> train_seqs, devel;
    for (const auto& r : single_plan.recordings) {
        if (r.split == Split::test) continue;
        (r.split == Split::train ? train_seqs : devel).push_back({r.id, r.streams, r.gold, -1});
    }
    const auto single = seq::train(seq::SequenceRegressor(1, cfg), {seq::make_windows(train_seqs, win), devel}, cfg);
    const double one = seq::evaluate(single.model, devel);
    MESSAGE("single " << one << " duplicated " << fused.devel_score);
    CHECK(std::abs(fused.devel_score - one) <= 0.01);
}

TEST_CASE("classification fusion predicts a class per recording")
{
    FusionPlan plan;
    plan.stream_names = {"a", "b"};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0, 0.2);
    for (int i = 0; i < 30; ++i) {
        FusionRecording r;
        r.id = "seg" + std::to_string(i);
        r.split = i < 20 ? Split::train : (i < 25 ? Split::devel : Split::test);
        r.label = i % 5;
        r.streams.resize(8, 2);
        for (Index t = 0; t < 8; ++t) {
            r.streams(t, 0) = r.label + g(rng);
            r.streams(t, 1) = r.label + g(rng);
        }
        plan.recordings.push_back(std::move(r));
    }
    auto cfg = fusion_config(seq::Task::sent);
    cfg.max_epochs = 5;
    const auto r = fuse_predictions(plan, seq::Task::sent, 101, std::nullopt, cfg);
    CHECK(r.classes.size() == 30);
    for (const auto& [id, c] : r.classes) {
        CHECK(c >= 0);
        CHECK(c < 5);
    }
}
