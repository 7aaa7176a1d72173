#include "levyfeller/montecarlo.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <numbers>

using namespace lf;

TEST(CounterRng, ReproducibleAndSeparated) {
    CounterRng a(1, 2, 3), b(1, 2, 3), c(1, 3, 3), d(1, 2, 4);
    for (int k = 0; k < 10; ++k) {
        const auto x = a();
        EXPECT_EQ(x, b());
        EXPECT_NE(x, c());
        EXPECT_NE(x, d());
    }
}

TEST(CounterRng, UniformMoments) {
    CounterRng r(42, 0);
    double s = 0.0, s2 = 0.0, lo = 1.0, hi = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double u = r.uniform();
        s += u;
        s2 += u * u;
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    EXPECT_GT(lo, 0.0);
    EXPECT_LT(hi, 1.0);
    EXPECT_NEAR(s / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_NEAR(s2 / n, 1.0 / 3.0, 0.005);
}

TEST(PairwiseSum, ExactOnIntegers) {
    std::vector<double> v(1001);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(k);
    EXPECT_EQ(pairwise_sum(v.data(), v.size()), 500500.0);
}

TEST(Sampler, CauchyMatchesCdf) {
    const IncrementSampler s(make_stable(1.0), 0.0, SmallJumpPolicy::GaussianSurrogate);
    ASSERT_TRUE(s.exact_stable());
    std::vector<double> xs;
    for (int p = 0; p < 100000; ++p) {
        CounterRng r(7, p);
        xs.push_back(s.sample(0.5, r));
    }
    const auto rep = chi_square_vs_cdf(xs, [](double x) { return 0.5 + std::atan(x / 0.5) / std::numbers::pi; },
                                       -5.0, 5.0, 40);
    EXPECT_TRUE(rep.pass) << rep.statistic << " vs " << rep.critical;
}

TEST(Sampler, CompoundPoissonVariance) {
    // Truncated Cauchy: second moment of nu is 2/pi per unit time.
    const LevyModel1D m = make_truncated_stable(1.0);
    const IncrementSampler s(m, 1.0 / 160.0, SmallJumpPolicy::GaussianSurrogate);
    EXPECT_NEAR(s.jump_rate(), 2.0 * tail_mass(m, 1.0 / 160.0), 1e-12);
    const double dt = 0.05;
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int p = 0; p < n; ++p) {
        CounterRng r(11, p);
        const double x = s.sample(dt, r);
        s1 += x;
        s2 += x * x;
    }
    const double var = 2.0 / std::numbers::pi * dt;
    EXPECT_NEAR(s1 / n, 0.0, 5.0 * std::sqrt(var / n));
    EXPECT_NEAR(s2 / n, var, 0.03 * var);
}

TEST(Sampler, DiscardDropsSmallJumpVariance) {
    const LevyModel1D m = make_truncated_stable(1.0);
    const IncrementSampler keep(m, 0.01, SmallJumpPolicy::GaussianSurrogate), drop(m, 0.01, SmallJumpPolicy::Discard);
    EXPECT_GT(keep.small_variance(), 0.0);
    EXPECT_NEAR(keep.small_variance(), 2.0 * small_second_moment(m, 0.01), 1e-15);
    // Without jumps below the cut a tiny step is usually exactly zero.
    int zeros = 0;
    for (int k = 0; k < 100; ++k) {
        CounterRng r(5, k);
        zeros += drop.sample(1e-4, r) == 0.0;
    }
    EXPECT_GT(zeros, 90);
}

TEST(Euler, ThreadCountDoesNotChangeResults) {
    SimConfig c;
    c.n_paths = 2000;
    c.n_steps = 8;
    const auto m = std::make_shared<const LevyModel1D>(make_truncated_stable(1.0));
    const EulerSimulator sim(make_rotation_field(2, 0.5), {m, m}, c, 1.0 / 40.0);
    const std::function<double(const Vec&)> f = [](const Vec& x) { return std::exp(-x.squaredNorm()); };
    omp_set_num_threads(1);
    const MCEstimate a = sim.estimate_Ptf(Vec::Zero(2), f, 0.25);
    omp_set_num_threads(4);
    const MCEstimate b = sim.estimate_Ptf(Vec::Zero(2), f, 0.25);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.stderr_, b.stderr_);
}

TEST(Euler, IdentityFieldIsDrivingProcess) {
    SimConfig c;
    c.n_paths = 100000;
    c.n_steps = 4;
    const auto m = std::make_shared<const LevyModel1D>(make_stable(1.0));
    const EulerSimulator sim(make_identity_field(2), {m, m}, c, 1.0 / 40.0);
    const auto ends = sim.endpoints(Vec::Zero(2), 1.0);
    std::vector<double> xs;
    for (const auto& e : ends) xs.push_back(e[1]);
    const auto rep =
        chi_square_vs_cdf(xs, [](double x) { return 0.5 + std::atan(x) / std::numbers::pi; }, -6.0, 6.0, 30);
    EXPECT_TRUE(rep.pass) << rep.statistic;
}

TEST(Compare, ZRule) {
    MCEstimate e;
    e.mean = 1.0;
    e.stderr_ = 0.01;
    const ZReport z = compare(1.02, e, 0.01);
    EXPECT_NEAR(z.z, 1.0, 1e-12);
    EXPECT_TRUE(z.pass);
    EXPECT_FALSE(compare(1.1, e, 0.01).pass);
}

TEST(ChiSquare, RejectsWrongLaw) {
    std::vector<double> xs;
    for (int p = 0; p < 50000; ++p) {
        CounterRng r(9, p);
        xs.push_back(std::tan(std::numbers::pi * (r.uniform() - 0.5)) + 0.2);
    }
    const auto rep = chi_square_vs_cdf(xs, [](double x) { return 0.5 + std::atan(x) / std::numbers::pi; }, -5.0, 5.0, 30);
    EXPECT_FALSE(rep.pass);
}

TEST(Errors, BadConfig) {
    SimConfig c;
    c.n_paths = 0;
    const auto m = std::make_shared<const LevyModel1D>(make_stable(1.0));
    EXPECT_THROW(EulerSimulator(make_identity_field(2), {m, m}, c, 0.025), std::invalid_argument);
}
