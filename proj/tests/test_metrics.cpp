#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "surgatt/metrics.hpp"

using namespace surgatt;

TEST(Mae, Examples)
{
    EXPECT_EQ(mae(Heatmap(4, 4, 0.3), Heatmap(4, 4, 0.3)), 0.0);
    EXPECT_EQ(mae(Heatmap(4, 4, 1.0), Heatmap(4, 4, 0.0)), 1.0);
}

TEST(Mse, Examples)
{
    EXPECT_EQ(mse(Heatmap(4, 4, 0.3), Heatmap(4, 4, 0.3)), 0.0);
    EXPECT_EQ(mse(Heatmap(4, 4, 0.5), Heatmap(4, 4, 0.0)), 0.25);
}

TEST(Metrics, ShapeMismatchThrows)
{
    EXPECT_THROW(mae(Heatmap(4, 4), Heatmap(4, 3)), SequenceMismatch);
    EXPECT_THROW(nss(Heatmap(4, 4), Heatmap(3, 4)), SequenceMismatch);
}

TEST(Metrics, MatchBruteForceOnRandomPairs)
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const Heatmap p = oracle::random_map(8, 8, rng), g = oracle::random_map(8, 8, rng);
        EXPECT_NEAR(mae(p, g), oracle::mae(p, g), 1e-10);
        EXPECT_NEAR(mse(p, g), oracle::mse(p, g), 1e-10);
        EXPECT_NEAR(cc(p, g), oracle::cc(p, g), 1e-10);
        EXPECT_NEAR(sim(p, g), oracle::sim(p, g), 1e-10);
        EXPECT_NEAR(nss(p, g), oracle::nss(p, g), 1e-10);
    }
}

TEST(Cc, SelfAndNegation)
{
    std::mt19937_64 rng(12);
    const Heatmap g = oracle::random_map(16, 16, rng);
    Heatmap neg = g;
    for (double& v : neg.values()) v = 1.0 - v;
    EXPECT_NEAR(cc(g, g), 1.0, 1e-6);
    EXPECT_NEAR(cc(neg, g), -1.0, 1e-6);
}

TEST(Cc, RandomSixteenBySixteen)
{
    std::mt19937_64 rng(13);
    const Heatmap p = oracle::random_map(16, 16, rng), g = oracle::random_map(16, 16, rng);
    EXPECT_NEAR(cc(p, g), oracle::cc(p, g), 1e-12);
}

TEST(Cc, ConstantMapIsNearZero)
{
    std::mt19937_64 rng(14);
    const Heatmap g = oracle::random_map(8, 8, rng);
    EXPECT_LT(std::abs(cc(Heatmap(8, 8, 0.4), g)), 1e-3);
}

TEST(Cc, InvariantUnderPositiveAffineMaps)
{
    std::mt19937_64 rng(15);
    const Heatmap p = oracle::random_map(8, 8, rng), g = oracle::random_map(8, 8, rng);
    for (auto [a, b] : {std::pair{2.0, 0.5}, std::pair{0.1, -3.0}, std::pair{7.0, 0.0}}) {
        Heatmap q = p;
        for (double& v : q.values()) v = a * v + b;
        EXPECT_NEAR(cc(q, g), cc(p, g), 1e-6);
    }
}

TEST(Sim, SelfAndDisjoint)
{
    std::mt19937_64 rng(16);
    const Heatmap g = oracle::random_map(8, 8, rng);
    EXPECT_NEAR(sim(g, g), 1.0, 1e-7);
    Heatmap a(4, 1), b(4, 1);
    a(0, 0) = a(1, 0) = 1.0;
    b(2, 0) = b(3, 0) = 1.0;
    EXPECT_EQ(sim(a, b), 0.0);
}

TEST(Sim, ZeroPredictionUsesUniform)
{
    std::mt19937_64 rng(17);
    const Heatmap g = oracle::random_map(8, 8, rng);
    const auto gn = oracle::l1(oracle::flat(g));
    double want = 0;
    for (double v : gn) want += std::min(1.0 / 64, v);
    EXPECT_NEAR(sim(Heatmap(8, 8), g), want, 1e-12);
}

TEST(Sim, InvariantUnderPositiveScaling)
{
    std::mt19937_64 rng(18);
    const Heatmap p = oracle::random_map(8, 8, rng), g = oracle::random_map(8, 8, rng);
    Heatmap q = p;
    for (double& v : q.values()) v *= 13.0;
    EXPECT_NEAR(sim(q, g), sim(p, g), 1e-7);
    EXPECT_NEAR(sim(p, q), sim(p, p), 1e-7);
}

TEST(Nss, ConstantPredictionIsZero)
{
    std::mt19937_64 rng(19);
    EXPECT_NEAR(nss(Heatmap(8, 8, 0.7), oracle::random_map(8, 8, rng)), 0.0, 1e-6);
}

TEST(Nss, SingleHotPixelOnTenByTen)
{
    // One hot pixel in p; g has a single pixel above its 95th percentile
    // (ties below it are strictly smaller), at the same location.
    Heatmap p(10, 10), g(10, 10);
    for (int i = 0; i < 100; ++i) g(i % 10, i / 10) = i / 1000.0;
    g(3, 4) = 1.0;
    p(3, 4) = 1.0;
    std::vector<double> gv(g.values().begin(), g.values().end());
    const double thr = oracle::quantile(gv, 0.95);
    int above = 0;
    for (double v : gv) above += v >= thr;
    ASSERT_GE(above, 1);
    const double mu = 0.01, sd = std::sqrt(0.01 * 0.99);
    // Every masked pixel other than (3,4) has p = 0.
    const double want = ((1.0 - mu) / (sd + 1e-8) + (above - 1) * (-mu) / (sd + 1e-8)) / above;
    EXPECT_NEAR(nss(p, g), want, 1e-12);
}

TEST(Nss, IsNotSymmetric)
{
    Heatmap p(10, 10), g(10, 10);
    for (int i = 0; i < 100; ++i) {
        p(i % 10, i / 10) = (i % 7) / 7.0;
        g(i % 10, i / 10) = i / 100.0;
    }
    EXPECT_GT(std::abs(nss(p, g) - nss(g, p)), 1e-3);
}

TEST(Metrics, SymmetricWhereExpected)
{
    std::mt19937_64 rng(20);
    for (int i = 0; i < 20; ++i) {
        const Heatmap p = oracle::random_map(8, 8, rng), g = oracle::random_map(8, 8, rng);
        EXPECT_NEAR(cc(p, g), cc(g, p), 1e-14);
        EXPECT_NEAR(sim(p, g), sim(g, p), 1e-14);
        EXPECT_EQ(mae(p, g), mae(g, p));
        EXPECT_EQ(mse(p, g), mse(g, p));
    }
}

TEST(EvaluateSequence, IdenticalSequences)
{
    std::mt19937_64 rng(21);
    std::vector<Heatmap> s;
    for (int i = 0; i < 3; ++i) s.push_back(oracle::random_map(8, 8, rng));
    const MetricReport r = evaluate_sequence(s, s);
    EXPECT_GT(r.nss, 0.0);
    EXPECT_NEAR(r.cc, 1.0, 1e-6);
    EXPECT_NEAR(r.sim, 1.0, 1e-6);
    EXPECT_EQ(r.mse, 0.0);
    EXPECT_EQ(r.mae, 0.0);
    EXPECT_EQ(r.n_frames, 3u);
}

TEST(EvaluateSequence, OneFrameEqualsFrameMetrics)
{
    std::mt19937_64 rng(22);
    const std::vector<Heatmap> p{oracle::random_map(8, 8, rng)}, g{oracle::random_map(8, 8, rng)};
    const MetricReport r = evaluate_sequence(p, g);
    EXPECT_EQ(r.nss, nss(p[0], g[0]));
    EXPECT_EQ(r.cc, cc(p[0], g[0]));
    EXPECT_EQ(r.sim, sim(p[0], g[0]));
    EXPECT_EQ(r.mse, mse(p[0], g[0]));
    EXPECT_EQ(r.mae, mae(p[0], g[0]));
}

TEST(EvaluateSequence, TwoFrameMeanAndThreadedAgree)
{
    std::mt19937_64 rng(23);
    std::vector<Heatmap> p, g;
    for (int i = 0; i < 2; ++i) {
        p.push_back(oracle::random_map(8, 8, rng));
        g.push_back(oracle::random_map(8, 8, rng));
    }
    const MetricReport r = evaluate_sequence(p, g);
    EXPECT_NEAR(r.cc, 0.5 * (oracle::cc(p[0], g[0]) + oracle::cc(p[1], g[1])), 1e-12);
    EXPECT_NEAR(r.mae, 0.5 * (oracle::mae(p[0], g[0]) + oracle::mae(p[1], g[1])), 1e-12);
    EXPECT_NEAR(r.nss, 0.5 * (oracle::nss(p[0], g[0]) + oracle::nss(p[1], g[1])), 1e-12);
    const MetricReport t = evaluate_sequence(p, g, 4);
    EXPECT_EQ(t.cc, r.cc);
    EXPECT_EQ(t.nss, r.nss);
}

TEST(EvaluateSequence, LengthMismatchThrows)
{
    const std::vector<Heatmap> p(2, Heatmap(4, 4)), g(3, Heatmap(4, 4));
    EXPECT_THROW(evaluate_sequence(p, g), SequenceMismatch);
}

TEST(EvaluateSequence, CsvRow)
{
    MetricReport r{1.5, 0.25, 0.5, 0.125, 0.0625, 7};
    EXPECT_EQ(metric_csv_header(), "sequence_id,nss,cc,sim,mse,mae,n_frames");
    EXPECT_EQ(to_csv_row("seq01", r), "seq01,1.500000,0.250000,0.500000,0.125000,0.062500,7");
}
