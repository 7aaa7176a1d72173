#include "levyfeller/semigroup.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lf;

namespace {

// Coarse lattice so the suite stays fast.
const LatticeSemigroup& small() {
    static const LatticeSemigroup sg = [] {
        const auto base = std::make_shared<const LevyModel1D>(make_truncated_stable(1.0));
        const auto p =
            std::make_shared<DensityProvider>(std::make_shared<const TruncatedModel1D>(truncate(base, 1.0 / 40.0)));
        const auto k = std::make_shared<const FrozenKernel>(make_rotation_field(2, 0.5),
                                                            std::vector<std::shared_ptr<DensityProvider>>{p, p});
        SemigroupOptions o;
        o.half_width = 2.0;
        o.spacing = 1.0 / 16.0;
        o.step = 1.0 / 32.0;
        return LatticeSemigroup(k, o);
    }();
    return sg;
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

const std::vector<Vec> probes{v2(0.0, 0.0), v2(0.3, -0.2), v2(-0.5, 0.4)};

}  // namespace

TEST(Operators, RowsAreStochastic) {
    EXPECT_LE(small().frozen_substep().max_row_sum_error(), 1e-12);
    EXPECT_LE(small().jump_operator().max_row_sum_error(), 1e-12);
    EXPECT_NEAR(small().lambda0(), 2.0 * small().kernel().tmodel(0).mass_defect(), 1e-9);
}

TEST(Operators, LongJumpOperatorOnConstants) {
    const Field one = [](const Vec&) { return 1.0; };
    EXPECT_NEAR(small().apply_N(one, v2(0.2, 0.1)), small().lambda0(), 1e-8 * small().lambda0());
    EXPECT_NEAR(small().apply_R(one, v2(0.2, 0.1)), 0.0, 1e-8 * small().lambda0());
}

TEST(Semigroup, ConservesConstants) {
    for (double v : small().T_apply(constant_function(2.5), 0.25, probes)) EXPECT_NEAR(v, 2.5, 1e-12);
}

TEST(Semigroup, TimeZeroIsIdentity) {
    const TestFunction f = gauss_bump(v2(0.1, 0.0), 0.3);
    const auto st = small().march(f, {0.0});
    for (const Vec& x : probes) EXPECT_EQ(small().value_at(st.front(), f, x), f.f(x));
}

TEST(Semigroup, PositivityAndContraction) {
    for (const TestFunction& f : {gauss_bump(v2(0.0, 0.0), 0.2), indicator_box(v2(0.1, 0.1), 0.3),
                                  coordinate_sine(2, 0, 3.0, 1.5)}) {
        double lo = INFINITY;
        const auto lat = sample(small().lattice(), f.f, f.far);
        for (double v : lat.v) lo = std::min(lo, v);
        for (double t : {0.0625, 0.25}) {
            const auto st = small().march(f, {t});
            for (const Vec& x : probes) {
                const double v = small().value_at(st.front(), f, x);
                EXPECT_GE(v, lo - 1e-3 * f.sup_norm) << f.name;
                EXPECT_LE(std::abs(v), (1.0 + 1e-3) * f.sup_norm) << f.name;
            }
        }
    }
}

TEST(Semigroup, StrongContinuityProxy) {
    const TestFunction f = gauss_bump(v2(0.0, 0.0), 0.3);
    const std::vector<double> times{0.03125, 0.0625, 0.125, 0.25};
    const auto st = small().march(f, times);
    double prev = INFINITY;
    for (int k = static_cast<int>(times.size()) - 1; k >= 0; --k) {
        double dev = 0.0;
        for (const Vec& x : probes) dev = std::max(dev, std::abs(small().value_at(st[k], f, x) - f.f(x)));
        EXPECT_LT(dev, prev);
        prev = dev;
    }
}

TEST(Semigroup, TransitionDensityHasUnitMass) {
    const LatticeFunction p = small().transition_density(0.125, v2(0.2, -0.1));
    double mass = 0.0;
    for (double v : p.v) mass += v;
    mass = mass * small().lattice().cell_volume() + p.far;
    EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(Semigroup, SeriesAgreesWithMarch) {
    // Fine steps keep lambda0 * step small, so the interlacing quadrature is accurate.
    const auto base = std::make_shared<const LevyModel1D>(make_truncated_stable(1.0));
    const auto p = std::make_shared<DensityProvider>(std::make_shared<const TruncatedModel1D>(truncate(base, 1.0 / 24.0)));
    const auto k = std::make_shared<const FrozenKernel>(make_rotation_field(2, 0.5),
                                                        std::vector<std::shared_ptr<DensityProvider>>{p, p});
    SemigroupOptions o;
    o.half_width = 2.0;
    o.spacing = 1.0 / 16.0;
    o.step = 1.0 / 128.0;
    o.series_cap = 30;
    const LatticeSemigroup sg(k, o);
    const TestFunction f = gauss_bump(v2(0.0, 0.1), 0.3);
    const SemigroupResult r = sg.psi_series(f, 0.125, probes, 30);
    const auto direct = sg.T_apply(f, 0.125, probes);
    ASSERT_TRUE(r.converged);
    EXPECT_LT(r.n_terms, 30);
    for (std::size_t j = 0; j < probes.size(); ++j) EXPECT_NEAR(r.values[j], direct[j], 1e-3);
}

TEST(Semigroup, DiscreteChapmanKolmogorov) {
    const TestFunction f = gauss_bump(v2(0.0, 0.0), 0.25);
    const auto mid = small().march(f, {0.125});
    const auto two = small().march(mid.front().values, {0.125});
    const auto direct = small().march(f, {0.25});
    for (std::size_t k = 0; k < direct.front().values.v.size(); k += 97)
        EXPECT_NEAR(two.front().values.v[k], direct.front().values.v[k], 1e-13);
}

TEST(Estimators, HolderOfConstantIsZero) {
    const HolderReport r = small().holder_estimate(constant_function(1.0), {0.0625, 0.125},
                                                   {{v2(0, 0), v2(0.1, 0)}}, 0.5);
    for (double v : r.ratio) EXPECT_LE(v, 1e-12);
    EXPECT_THROW(small().holder_estimate(constant_function(1.0), {0.0625}, {{v2(0, 0), v2(0, 0)}}, 0.5),
                 std::invalid_argument);
}

TEST(Estimators, NarrowBumpSupDecreases) {
    const SmoothingReport r = small().smoothing_estimate(unit_mass_bump(v2(0, 0), 0.08), {0.0625, 0.125, 0.25}, 0.45);
    EXPECT_TRUE(r.monotone);
    EXPECT_LT(r.slope, 0.0);
    EXPECT_NEAR(r.exponent, -0.9, 1e-12);
}

TEST(Errors, BadTimesAndNames) {
    EXPECT_THROW(small().steps_for(0.01), std::invalid_argument);
    EXPECT_THROW(make_test_function("no_such_function", 2, {}), std::invalid_argument);
    EXPECT_THROW(small().march(constant_function(1.0), {0.25, 0.125}), std::invalid_argument);
}

TEST(TestFunctions, Norms) {
    const TestFunction u = unit_mass_bump(v2(0, 0), 0.1);
    EXPECT_NEAR(u.l1_norm, 1.0, 1e-12);
    EXPECT_NEAR(u.f(v2(0, 0)), u.sup_norm, 1e-12);
    const TestFunction b = indicator_box(v2(0, 0), 0.5);
    EXPECT_EQ(b.f(v2(0.4, -0.4)), 1.0);
    EXPECT_EQ(b.f(v2(0.6, 0.0)), 0.0);
    EXPECT_EQ(constant_function(3.0).far, 3.0);
}
