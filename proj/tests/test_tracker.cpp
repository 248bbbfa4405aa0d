#include <gtest/gtest.h>

#include <map>

#include <cmath>
#include <random>

#include "surgatt/benchmark.hpp"
#include "surgatt/gradcheck.hpp"
#include "surgatt/tracker.hpp"

using namespace surgatt;

namespace {

TrackData tiny_instance(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    TrackData d;
    d.dims = {8, 8};
    for (int t = 0; t < 2; ++t) {
        Frame f(8, 8);
        for (double& v : f.data) v = u(rng);
        d.pyramids.push_back(build_pyramid(f));
        const BBox gt{3 + 2 * u(rng), 3 + 2 * u(rng), 2 + 2 * u(rng), 2 + 2 * u(rng)};
        d.gt.push_back(gt);
        ProposalSet s;
        for (int k = 0; k < 3; ++k)
            s.entries.push_back({{gt.cx + 1.5 * (u(rng) - 0.5), gt.cy + 1.5 * (u(rng) - 0.5), gt.w * (0.7 + 0.6 * u(rng)),
                                  gt.h * (0.7 + 0.6 * u(rng))},
                                 1.0 - 0.3 * k});
        d.proposals.push_back(s);
    }
    return d;
}

ModelConfig tiny_model()
{
    ModelConfig m;
    m.n_heads = 1;
    m.d_k = 2;
    m.hidden = 3;
    m.features = {2, 4, 0.1};
    return m;
}

SceneConfig easy_scene(std::uint64_t seed, std::size_t frames)
{
    SceneConfig s;
    s.seed = seed;
    s.n_frames = frames;
    s.speed = 0.0;
    s.center_jitter = 0.0;
    s.size_jitter = 0.0;
    s.occlusion_prob = 0.0;
    s.recall_floor = 1.0;
    return s;
}

// Trained once and shared by the easy-instance tests.
const TrackerParams& easy_params()
{
    static const TrackerParams params = [] {
        std::vector<TrackData> data;
        for (std::uint64_t i = 0; i < 3; ++i) data.push_back(prepare(generate(easy_scene(100 + i, 60))));
        TrainConfig tc = BenchmarkConfig::benchmark_training();
        tc.epochs = 8;
        return train(data, TrackerParams::init(ModelConfig{}, 11), tc, ModelConfig{}, BenchmarkConfig::benchmark_loss(),
                     GapDistribution{})
            .params;
    }();
    return params;
}

std::vector<double> flatten(TrackerParams& p)
{
    std::vector<double> out;
    p.visit([&](const std::string&, std::span<double> v) { out.insert(out.end(), v.begin(), v.end()); });
    return out;
}

void assign(TrackerParams& p, std::span<const double> x)
{
    std::size_t o = 0;
    p.visit([&](const std::string&, std::span<double> v) {
        for (double& e : v) e = x[o++];
    });
}

}  // namespace

TEST(SampleGap, DegenerateDistribution)
{
    GapDistribution d{{1}, {1.0}};
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_gap(d, rng), 1u);
}

TEST(SampleGap, DefaultFrequencies)
{
    const GapDistribution d;
    std::mt19937_64 rng(2);
    std::map<std::size_t, int> counts;
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[sample_gap(d, rng)];
    for (std::size_t i = 0; i < d.gaps.size(); ++i) EXPECT_NEAR(counts[d.gaps[i]] / double(n), d.probs[i], 0.01);
}

TEST(SampleGap, ReferenceClipsToFirstFrame)
{
    EXPECT_EQ(reference_frame(2, 8), 0u);
    EXPECT_EQ(reference_frame(10, 8), 2u);
    EXPECT_EQ(reference_frame(8, 8), 0u);
    std::mt19937_64 rng(3);
    for (std::size_t t = 1; t < 40; ++t)
        for (int i = 0; i < 20; ++i) EXPECT_LT(reference_frame(t, sample_gap(GapDistribution{}, rng)), t);
}

TEST(GapDistribution, Validation)
{
    EXPECT_NO_THROW(GapDistribution{}.validate());
    EXPECT_THROW((GapDistribution{{1, 2}, {0.5, 0.6}}.validate()), ConfigError);
    EXPECT_THROW((GapDistribution{{1, 2}, {1.0}}.validate()), ConfigError);
    EXPECT_THROW((GapDistribution{{0}, {1.0}}.validate()), ConfigError);
}

TEST(TrainStep, DisjointProposalsAreSkipped)
{
    TrackData d = tiny_instance(1);
    d.proposals[1].entries = {{{100, 100, 2, 2}, 0.9}};
    const auto m = tiny_model();
    const TrackerParams p = TrackerParams::init(m, 1);
    const StepResult r = train_step(d, 1, 0, p, m, LossConfig{});
    EXPECT_TRUE(r.skipped);
    EXPECT_EQ(r.loss.total, 0.0);
}

TEST(TrainStep, MatchesFiniteDifferencesEndToEnd)
{
    const auto m = tiny_model();
    const LossConfig lc;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const TrackData d = tiny_instance(seed);
        TrackerParams p = TrackerParams::init(m, seed);
        TrackerParams g = p.zeros_like();
        const StepResult sr = train_step(d, 1, 0, p, m, lc, &g);
        ASSERT_FALSE(sr.skipped);
        const std::vector<double> x = flatten(p), analytic = flatten(g);
        TrackerParams work = p;
        const auto f = [&](std::span<const double> v) {
            assign(work, v);
            return train_step(d, 1, 0, work, m, lc).loss.total;
        };
        EXPECT_LT(grad_check(f, x, analytic).max_rel_error, 1e-3) << "seed " << seed;
    }
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged)
{
    const TrackData d = prepare(generate(easy_scene(4, 20)));
    TrainConfig tc;
    tc.lr = 0.0;
    tc.epochs = 2;
    TrackerParams p0 = TrackerParams::init(ModelConfig{}, 3);
    TrainResult r = train(std::span(&d, 1), p0, tc, ModelConfig{}, LossConfig{}, GapDistribution{});
    EXPECT_EQ(flatten(r.params), flatten(p0));
}

TEST(Train, LossCurveIsBitwiseReproducible)
{
    const TrackData d = prepare(generate(easy_scene(5, 30)));
    TrainConfig tc;
    tc.epochs = 2;
    const auto run = [&] {
        return train(std::span(&d, 1), TrackerParams::init(ModelConfig{}, 3), tc, ModelConfig{}, LossConfig{},
                     GapDistribution{});
    };
    TrainResult a = run(), b = run();
    ASSERT_EQ(a.curve.size(), b.curve.size());
    for (std::size_t e = 0; e < a.curve.size(); ++e) EXPECT_EQ(a.curve[e].mean.total, b.curve[e].mean.total);
    EXPECT_EQ(flatten(a.params), flatten(b.params));
}

TEST(Train, RerankLossDecreasesEveryEpoch)
{
    SceneConfig s;
    s.seed = 31;
    s.n_frames = 200;
    const TrackData d = prepare(generate(s));
    for (const TrainConfig& base : {TrainConfig{}, BenchmarkConfig::benchmark_training()}) {
        TrainConfig tc = base;
        tc.epochs = 5;
        const TrainResult r = train(std::span(&d, 1), TrackerParams::init(ModelConfig{}, 11), tc, ModelConfig{},
                                    BenchmarkConfig::benchmark_loss(), GapDistribution{});
        for (std::size_t e = 1; e < r.curve.size(); ++e)
            EXPECT_LT(r.curve[e].mean.rerank_total, r.curve[e - 1].mean.rerank_total) << "epoch " << e + 1;
    }
}

TEST(Train, TrainedLossBeatsUniformBaseline)
{
    const TrackData d = prepare(generate(easy_scene(999, 60)));
    double total = 0;
    std::size_t n = 0;
    std::mt19937_64 rng(7);
    for (std::size_t t = 1; t < d.size(); ++t) {
        const StepResult r = train_step(d, t, reference_frame(t, sample_gap(GapDistribution{}, rng)), easy_params(),
                                        ModelConfig{}, LossConfig{});
        if (r.skipped) continue;
        total += r.loss.total;
        ++n;
    }
    EXPECT_LT(total / double(n), std::log(double(SceneConfig{}.K)));
}

TEST(Track, StaticTargetStaysWithinTwoPixels)
{
    const TrackData d = prepare(generate(easy_scene(999, 60)));
    const auto rec = track(d, easy_params(), ModelConfig{}, InitMode::kGroundTruth);
    ASSERT_EQ(rec.size(), d.size());
    for (std::size_t t = 2; t < rec.size(); ++t) EXPECT_LE(center_error(rec[t].refined, d.gt[t]), 2.0) << "frame " << t;
}

TEST(Track, HoldsThroughDropoutAndReacquires)
{
    TrackData d = prepare(generate(easy_scene(999, 40)));
    d.proposals[20].entries.clear();
    d.proposals[21].entries.clear();
    const auto rec = track(d, easy_params(), ModelConfig{}, InitMode::kGroundTruth);
    ASSERT_LE(center_error(rec[19].refined, d.gt[19]), 2.0);
    EXPECT_TRUE(rec[20].held);
    EXPECT_TRUE(rec[21].held);
    EXPECT_EQ(rec[20].selected_k, -1);
    EXPECT_EQ(rec[21].refined, rec[19].refined);
    bool reacquired = false;
    for (std::size_t t = 22; t <= 24; ++t) reacquired = reacquired || center_error(rec[t].refined, d.gt[t]) <= 2.0;
    EXPECT_TRUE(reacquired);
}

TEST(Track, DeterministicAndCausal)
{
    const TrackData d = prepare(generate(easy_scene(997, 30)));
    const auto a = track(d, easy_params(), ModelConfig{});
    const auto b = track(d, easy_params(), ModelConfig{});
    TrackData prefix = d;
    prefix.pyramids.resize(15);
    prefix.proposals.resize(15);
    prefix.gt.resize(15);
    const auto c = track(prefix, easy_params(), ModelConfig{});
    for (std::size_t t = 0; t < a.size(); ++t) {
        EXPECT_EQ(a[t].refined, b[t].refined);
        EXPECT_EQ(a[t].selected_k, b[t].selected_k);
        if (t < 15) {
            EXPECT_EQ(a[t].refined, c[t].refined);
        }
    }
}

TEST(Track, ConfTopOneInitialization)
{
    const TrackData d = prepare(generate(easy_scene(996, 5)));
    const auto rec = track(d, easy_params(), ModelConfig{});
    EXPECT_EQ(rec[0].selected, d.proposals[0].entries[0].box);
    EXPECT_EQ(rec[0].selected_k, 0);
}

TEST(Track, HeatmapCallbackMatchesRenderInference)
{
    const TrackData d = prepare(generate(easy_scene(995, 6)));
    HeatmapConfig h;
    h.out_w = d.dims.width;
    h.out_h = d.dims.height;
    std::vector<Heatmap> seen;
    const auto rec = track(d, easy_params(), ModelConfig{}, InitMode::kConfTop1, &h,
                           [&](std::size_t, const Heatmap& m) { seen.push_back(m); });
    ASSERT_EQ(seen.size(), rec.size());
    Heatmap state(h.out_w, h.out_h);
    for (std::size_t t = 0; t < rec.size(); ++t) {
        auto [m, next] = render_inference(rec[t].refined, state, h);
        EXPECT_EQ(m, seen[t]);
        state = std::move(next);
    }
}

TEST(Optimizer, SgdMomentumStep)
{
    TrainConfig tc;
    tc.lr = 0.5;
    tc.momentum = 0.9;
    TrackerParams p = TrackerParams::init(tiny_model(), 1);
    TrackerParams g = p.zeros_like();
    g.rerank.bias[0] = 1.0;
    const double b0 = p.rerank.bias[0];
    Optimizer opt(tc);
    opt.step(p, g);
    EXPECT_DOUBLE_EQ(p.rerank.bias[0], b0 - 0.5);
    opt.step(p, g);
    EXPECT_DOUBLE_EQ(p.rerank.bias[0], b0 - 0.5 - 0.5 * 1.9);
}

TEST(Optimizer, ProjectionLearningRateScale)
{
    TrainConfig tc;
    tc.lr = 0.1;
    tc.proj_lr_scale = 0.0;
    TrackerParams p = TrackerParams::init(tiny_model(), 1);
    TrackerParams g = p.zeros_like();
    g.visit([](const std::string&, std::span<double> v) {
        for (double& x : v) x = 1.0;
    });
    const auto phi = p.proj.phi;
    const auto w1 = p.refine.w1;
    Optimizer(tc).step(p, g);
    EXPECT_EQ(p.proj.phi, phi);
    EXPECT_NE(p.refine.w1, w1);
}
