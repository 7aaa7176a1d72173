#include "levyfeller/parametrix.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lf;

namespace {

std::shared_ptr<const FrozenKernel> kernel(const CoefficientField& f) {
    const auto base = std::make_shared<const LevyModel1D>(make_truncated_stable(1.0));
    const auto p = std::make_shared<DensityProvider>(std::make_shared<const TruncatedModel1D>(truncate(base, 1.0 / 40.0)));
    return std::make_shared<const FrozenKernel>(f, std::vector<std::shared_ptr<DensityProvider>>{p, p}, 1e-4, 1.0);
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(Sigma, Branches) {
    EXPECT_DOUBLE_EQ(sigma_exponent(AssumptionMode::Z1, 1.0, 1.0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(sigma_exponent(AssumptionMode::Z2, 1.0, 1.2), 0.8);
    EXPECT_THROW(sigma_exponent(AssumptionMode::Z2, 0.6, 1.0), std::invalid_argument);
}

TEST(Mode, Gates) {
    const LevyModel1D a = make_stable(1.0), b = make_stable(1.2), c = make_stable(0.6);
    EXPECT_NO_THROW(check_mode(AssumptionMode::Z1, {&a, &a}));
    EXPECT_THROW(check_mode(AssumptionMode::Z1, {&a, &b}), std::invalid_argument);
    EXPECT_THROW(check_mode(AssumptionMode::Z2, {&a, &a}), std::invalid_argument);
    EXPECT_NO_THROW(check_mode(AssumptionMode::Z2, {&a, &b}));
    EXPECT_THROW(check_mode(AssumptionMode::Z2, {&c, &a}), std::invalid_argument);
    EXPECT_THROW(check_mode(AssumptionMode::Z1, {&a}), std::invalid_argument);
}

TEST(Generator, OnKernelEqualsTimeDerivative) {
    const auto k = kernel(make_rotation_field(2, 0.5));
    const Parametrix par(k, AssumptionMode::Z1);
    const Vec x = v2(0.5, 0.3);
    const double t = 0.25;
    for (const Vec& v : {v2(0.0, 0.02), v2(0.05, -0.1), v2(0.15, 0.02)}) {
        const double gen = par.generator_on_kernel(t, x, x, v);
        const double dt = FrozenKernel::time_derivative(k->slices(t), k->inverse().at(x), v);
        EXPECT_NEAR(gen, dt, 1e-3 * std::abs(dt) + 1e-8);
    }
}

TEST(Q0, VanishesForConstantField) {
    Mat A0(2, 2);
    A0 << 1.0, 0.3, 0.2, 1.06;
    const Parametrix par(kernel(make_constant_field(A0)), AssumptionMode::Z1);
    const Vec x = v2(0.5, 0.3);
    for (double t : {0.02, 0.2})
        for (const Vec& y : {x, v2(0.52, 0.31), v2(0.3, 0.5)}) EXPECT_LE(std::abs(par.q0(t, x, y)), 1e-10);
}

TEST(Q0, MatchesDirectGeneratorDifference) {
    const auto k = kernel(make_rotation_field(2, 0.5));
    const Parametrix par(k, AssumptionMode::Z1);
    std::vector<const TruncatedModel1D*> tms{&k->tmodel(0), &k->tmodel(1)};
    const Vec x = v2(0.5, 0.3), y = v2(0.56, 0.33);
    for (double t : {0.01, 0.25}) {
        const auto s = k->slices(t);
        const Frozen fy = k->inverse().at(y);
        const Field f = [&](const Vec& v) { return FrozenKernel::density(s, fy, v); };
        GeneratorOptions go;
        go.rtol = 1e-7;
        const double sc = FrozenKernel::feature_scale(s, 0);
        const double direct = apply_frozen_generator(k->field(), x, f, x - y, tms, sc, go) -
                              apply_frozen_generator(k->field(), y, f, x - y, tms, sc, go);
        EXPECT_NEAR(par.q0(t, x, y), direct, 2e-3 * std::abs(direct) + 1e-9) << "t=" << t;
    }
}

TEST(Grid, GradedAxisIntegratesPolynomials) {
    ParametrixOptions o;
    const GradedAxis ax = make_graded_axis(0.1, 2.0, o);
    EXPECT_NEAR(ax.breaks.front(), -ax.breaks.back(), 1e-14);
    double s0 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < ax.x.size(); ++k) {
        s0 += ax.w[k];
        s2 += ax.w[k] * ax.x[k] * ax.x[k];
    }
    const double e = ax.extent();
    EXPECT_NEAR(s0, 2.0 * e, 1e-12 * e);
    EXPECT_NEAR(s2, 2.0 * e * e * e / 3.0, 1e-10 * e * e * e);
}

TEST(Grid, StencilInterpolatesLowDegreeExactly) {
    ParametrixOptions o;
    const GradedAxis ax = make_graded_axis(0.1, 2.0, o);
    std::vector<double> coef(ax.per_panel);
    for (double s : {-1.3, -0.01, 0.0, 0.37}) {
        const int first = ax.stencil(s, coef.data());
        ASSERT_GE(first, 0);
        double v = 0.0;
        for (int j = 0; j < ax.per_panel; ++j) v += coef[j] * (1.0 + 2.0 * ax.x[first + j] - ax.x[first + j] * ax.x[first + j]);
        EXPECT_NEAR(v, 1.0 + 2.0 * s - s * s, 1e-12);
    }
    EXPECT_EQ(ax.stencil(10.0, coef.data()), -1);
}

TEST(Row, ConstantFieldCorrectionIsZeroAndMassIsOne) {
    Mat A0(2, 2);
    A0 << 1.0, 0.3, 0.2, 1.06;
    ParametrixOptions o;
    o.growth = 4.0;
    o.level_ratio = 4.0;
    o.time_nodes = 2;
    o.tail = 1e-4;
    const Parametrix par(kernel(make_constant_field(A0)), AssumptionMode::Z1, o);
    const Vec x = v2(0.5, 0.3);
    const RowHistory corr = par.correction_row(x, 0.1);
    const URowReport rep = par.u_report(corr, x, {0.1});
    EXPECT_EQ(rep.max_abs_correction[0], 0.0);
    EXPECT_NEAR(rep.mass[0], 1.0, 1e-5);
    EXPECT_GE(rep.min_value[0], -1e-9);
}
