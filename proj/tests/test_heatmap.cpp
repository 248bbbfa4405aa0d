#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "surgatt/heatmap.hpp"
#include "surgatt/stats.hpp"

using namespace surgatt;

namespace {

HeatmapConfig small_config(int w = 64, int h = 48)
{
    HeatmapConfig c;
    c.out_w = w;
    c.out_h = h;
    return c;
}

double peak(const Heatmap& m)
{
    double v = 0;
    for (double x : m.values()) v = std::max(v, x);
    return v;
}

}  // namespace

TEST(BoxKernel, OneSigmaOffset)
{
    const HeatmapConfig cfg;
    const Heatmap k = box_kernel({480, 270, 100, 100}, cfg);
    EXPECT_EQ(k(480, 270), 1.0);
    EXPECT_NEAR(k(525, 270), std::exp(-0.5), 1e-12);
    EXPECT_NEAR(k(480, 225), std::exp(-0.5), 1e-12);
}

TEST(BoxKernel, SigmaFloorForTinyBoxes)
{
    const HeatmapConfig cfg = small_config();
    const Heatmap k = box_kernel({20, 20, 1, 1}, cfg);
    EXPECT_NEAR(k(21, 20), std::exp(-0.5), 1e-12);
    EXPECT_NEAR(k(23, 20), std::exp(-4.5), 1e-12);
    EXPECT_EQ(k(24, 20), 0.0);
}

TEST(BoxKernel, ZeroOutsideWindowAndMatchesDirectGaussian)
{
    const HeatmapConfig cfg = small_config(80, 60);
    const BBox b{37.3, 22.8, 9.0, 5.0};
    const Heatmap k = box_kernel(b, cfg);
    for (int y = 0; y < k.height(); ++y)
        for (int x = 0; x < k.width(); ++x) EXPECT_NEAR(k(x, y), oracle::kernel_at(b, cfg.scale, x, y), 1e-14);
}

TEST(BoxKernel, InflationWidensKernel)
{
    HeatmapConfig cfg = small_config();
    cfg.inflation = 1.0;
    const Heatmap k = box_kernel({30, 20, 10, 10}, cfg);
    EXPECT_NEAR(k(39, 20), std::exp(-0.5), 1e-12);
}

TEST(FrameDensity, EmptyListIsZero)
{
    const Heatmap d = frame_density({}, small_config());
    EXPECT_EQ(peak(d), 0.0);
}

TEST(FrameDensity, SingleBoxWithoutCompensationIsTheKernel)
{
    HeatmapConfig cfg = small_config();
    cfg.area_comp = AreaCompensation::kNone;
    const BBox b[] = {{30, 20, 12, 8}};
    EXPECT_EQ(frame_density(b, cfg), box_kernel(b[0], cfg));
}

TEST(FrameDensity, TwoIdenticalBoxesWithSqrtCompensation)
{
    const HeatmapConfig cfg = small_config();
    const BBox b{30, 20, 12, 8};
    const BBox boxes[] = {b, b};
    const Heatmap d = frame_density(boxes, cfg);
    for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x)
            EXPECT_NEAR(d(x, y), 2.0 / std::sqrt(96.0) * oracle::kernel_at(b, cfg.scale, x, y), 1e-14);
}

TEST(Accumulate, FromZeroReturnsDensity)
{
    std::mt19937_64 rng(1);
    const Heatmap g = oracle::random_map(8, 8, rng);
    EXPECT_EQ(accumulate(Heatmap(8, 8), g, 0.22), g);
}

TEST(Accumulate, ZeroDensityDecaysByOneMinusAlpha)
{
    std::mt19937_64 rng(2);
    const Heatmap m = oracle::random_map(8, 8, rng);
    const Heatmap out = accumulate(m, Heatmap(8, 8), 0.22);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) EXPECT_NEAR(out(x, y), 0.78 * m(x, y), 1e-15);
}

TEST(Accumulate, ShapeMismatchThrows)
{
    EXPECT_THROW(accumulate(Heatmap(4, 4), Heatmap(4, 5), 0.2), ResolutionMismatch);
}

TEST(Accumulate, MatchesUnrolledRecurrence)
{
    std::mt19937_64 rng(3);
    std::vector<Heatmap> g;
    for (int t = 0; t < 3; ++t) g.push_back(oracle::random_map(6, 5, rng));
    Heatmap m(6, 5);
    for (const auto& d : g) m = accumulate(m, d, 0.22);
    EXPECT_LT(oracle::max_abs_diff(m, oracle::unrolled_decay(g, 0.22)), 1e-14);
}

TEST(Smooth, KernelSizeOneIsIdentity)
{
    std::mt19937_64 rng(4);
    const Heatmap m = oracle::random_map(9, 7, rng);
    EXPECT_EQ(smooth(m, 1), m);
}

TEST(Smooth, RejectsEvenKernel)
{
    EXPECT_THROW(smooth(Heatmap(4, 4), 4), ConfigError);
}

TEST(Smooth, ConstantMapStaysConstant)
{
    const Heatmap out = smooth(Heatmap(12, 10, 0.37), 9);
    for (double v : out.values()) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Smooth, ImpulseResponseIsSymmetricAndSeparable)
{
    Heatmap m(21, 21);
    m(10, 10) = 1.0;
    const Heatmap out = smooth(m, 9);
    const auto taps = gaussian_taps(9);
    double mass = 0;
    for (int y = 0; y < 21; ++y)
        for (int x = 0; x < 21; ++x) {
            EXPECT_NEAR(out(x, y), out(20 - x, y), 1e-16);
            EXPECT_NEAR(out(x, y), out(x, 20 - y), 1e-16);
            EXPECT_NEAR(out(x, y), out(y, x), 1e-16);
            const int dx = x - 10, dy = y - 10;
            const double want = (std::abs(dx) <= 4 && std::abs(dy) <= 4) ? taps[dx + 4] * taps[dy + 4] : 0.0;
            EXPECT_NEAR(out(x, y), want, 1e-16);
            mass += out(x, y);
        }
    EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(Smooth, SigmaFollowsKernelSize)
{
    EXPECT_NEAR(smoothing_sigma(9), 0.3 * 3 + 0.8, 1e-15);
    EXPECT_NEAR(smoothing_sigma(3), 0.8, 1e-15);
}

TEST(RobustNormalize, ZeroMapStaysZero)
{
    const Heatmap out = robust_normalize(Heatmap(5, 5), 99.5);
    EXPECT_EQ(peak(out), 0.0);
}

TEST(RobustNormalize, ClipsAboveThePercentile)
{
    Heatmap m(1001, 1);
    for (int i = 0; i <= 1000; ++i) m(i, 0) = i;
    std::vector<double> values(m.values().begin(), m.values().end());
    const double q = oracle::quantile(values, 0.995);
    EXPECT_NEAR(q, 995.0, 1e-9);
    const Heatmap out = robust_normalize(m, 99.5);
    for (int i = 0; i <= 1000; ++i) {
        if (i >= 995) EXPECT_EQ(out(i, 0), 1.0);
        else EXPECT_NEAR(out(i, 0), i / q, 1e-15);
    }
}

TEST(RobustNormalize, SingleKernelPeakMapsToOne)
{
    const HeatmapConfig cfg = small_config();
    const Heatmap out = robust_normalize(box_kernel({30, 20, 10, 10}, cfg), 99.5);
    EXPECT_EQ(out(30, 20), 1.0);
}

TEST(Quantile, AgreesWithSortOracle)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + trial * 7);
        for (double& x : v) x = u(rng);
        for (double q : {0.0, 0.05, 0.5, 0.95, 0.995, 1.0}) EXPECT_EQ(quantile(v, q), oracle::quantile(v, q));
    }
}

TEST(GenerateSequence, ResolutionMismatchThrows)
{
    BoxSequence s{{100, 100}, {{}}};
    EXPECT_THROW(generate_sequence(s, small_config()), ResolutionMismatch);
}

TEST(GenerateSequence, SingleFramePeaksAtBoxCenter)
{
    const HeatmapConfig cfg = small_config();
    BoxSequence s{cfg.dims(), {{{31.0, 22.0, 10, 10}}}};
    const Heatmap h = generate_sequence(s, cfg)[0];
    EXPECT_EQ(h(31, 22), 1.0);
    // The percentile clip saturates a small disc around the center.
    for (int y = 0; y < h.height(); ++y)
        for (int x = 0; x < h.width(); ++x)
            if (h(x, y) == 1.0) EXPECT_LE(std::hypot(x - 31, y - 22), 3.0) << x << "," << y;
}

TEST(GenerateSequence, OutputsStayInUnitInterval)
{
    const HeatmapConfig cfg = small_config(40, 30);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 40; ++trial) {
        BoxSequence s{cfg.dims(), {}};
        for (int t = 0; t < 12; ++t) {
            std::vector<BBox> boxes;
            const int n = int(u(rng) * 4);
            for (int i = 0; i < n; ++i) boxes.push_back({u(rng) * 40, u(rng) * 30, 0.5 + 30 * u(rng), 0.5 + 30 * u(rng)});
            s.frames.push_back(boxes);
        }
        for (const auto& h : generate_sequence(s, cfg))
            for (double v : h.values()) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
    }
}

TEST(GenerateSequence, IsDeterministic)
{
    const HeatmapConfig cfg = small_config();
    BoxSequence s{cfg.dims(), {{{10, 10, 5, 5}}, {}, {{40, 30, 8, 12}, {20, 20, 4, 4}}}};
    EXPECT_EQ(generate_sequence(s, cfg), generate_sequence(s, cfg));
}

TEST(HeatmapRenderer, GapDecaysStatePeakExactly)
{
    HeatmapRenderer r(small_config());
    const BBox b[] = {{30, 20, 10, 10}};
    r.push(b);
    r.push(b);
    double prev = peak(r.state());
    for (int t = 0; t < 5; ++t) {
        r.push({});
        const double now = peak(r.state());
        EXPECT_NEAR(now, 0.78 * prev, 1e-15);
        EXPECT_LT(now, prev);
        prev = now;
    }
}

TEST(HeatmapRenderer, StaticBoxConvergesToFixedPoint)
{
    const HeatmapConfig cfg = small_config();
    HeatmapRenderer r(cfg);
    const BBox b[] = {{30, 20, 10, 10}};
    for (int t = 0; t < 50; ++t) r.push(b);
    const Heatmap fixed_point = [&] {
        Heatmap g = frame_density(b, cfg);
        for (double& v : g.values()) v /= cfg.alpha;
        return g;
    }();
    for (int y = 0; y < fixed_point.height(); ++y)
        for (int x = 0; x < fixed_point.width(); ++x)
            EXPECT_LE(std::abs(r.state()(x, y) - fixed_point(x, y)), 0.01 * fixed_point(x, y) + 1e-300);
}

TEST(RenderInference, FreshStateMatchesOneFrameSequence)
{
    const HeatmapConfig cfg = small_config();
    const BBox b{25, 18, 9, 13};
    auto [h, state] = render_inference(b, Heatmap(cfg.out_w, cfg.out_h), cfg);
    EXPECT_EQ(h, generate_sequence(BoxSequence{cfg.dims(), {{b}}}, cfg)[0]);
    EXPECT_EQ(state, frame_density(std::vector<BBox>{b}, cfg));
}

TEST(RenderInference, RepeatedBoxAccumulates)
{
    const HeatmapConfig cfg = small_config();
    const BBox b{25, 18, 9, 13};
    auto [h1, s1] = render_inference(b, Heatmap(cfg.out_w, cfg.out_h), cfg);
    auto [h2, s2] = render_inference(b, s1, cfg);
    EXPECT_GE(peak(s2), peak(s1));
    EXPECT_GE(h2(25, 18), h1(25, 18));
}

TEST(RenderInference, TeleportDecaysOldPeak)
{
    const HeatmapConfig cfg = small_config();
    auto [h1, s1] = render_inference({10, 10, 6, 6}, Heatmap(cfg.out_w, cfg.out_h), cfg);
    auto [h2, s2] = render_inference({50, 38, 6, 6}, s1, cfg);
    EXPECT_NEAR(s2(10, 10), 0.78 * s1(10, 10), 1e-15);
    EXPECT_GT(s2(50, 38), s1(50, 38));
}
