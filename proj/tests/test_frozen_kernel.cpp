#include "levyfeller/frozen_kernel.hpp"
#include "levyfeller/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lf;

namespace {

std::vector<std::shared_ptr<DensityProvider>> desk_providers() {
    const auto base = std::make_shared<const LevyModel1D>(make_truncated_stable(1.0));
    const auto p = std::make_shared<DensityProvider>(std::make_shared<const TruncatedModel1D>(truncate(base, 1.0 / 40.0)));
    return {p, p};
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(Field, RotationIsOrthogonalWithUnitDeterminant) {
    const CoefficientField f = make_rotation_field(2, 0.5);
    for (const Vec& x : {v2(0, 0), v2(0.5, -1.0), v2(3.0, 2.0)}) {
        const Mat A = f(x);
        EXPECT_NEAR((A * A.transpose() - Mat::Identity(2, 2)).norm(), 0.0, 1e-14);
        EXPECT_NEAR(A.determinant(), 1.0, 1e-14);
    }
    EXPECT_TRUE(validate_field(f, default_validation_lattice(2)).ok());
}

TEST(Field, BumpAndDiagonalAreNonDegenerate) {
    EXPECT_TRUE(validate_field(make_bump_field(2, 0.2, 7), default_validation_lattice(2)).ok());
    EXPECT_TRUE(validate_field(make_diagonal_field({1.0, 2.0}), default_validation_lattice(2)).ok());
}

TEST(Field, InverseIsInverse) {
    const FrozenKernel k(make_bump_field(2, 0.2, 7), desk_providers());
    for (const Vec& x : {v2(0.1, 0.2), v2(-1.0, 0.4)}) {
        const Frozen fr = k.inverse().at(x);
        EXPECT_NEAR((k.field()(x) * fr.B - Mat::Identity(2, 2)).norm(), 0.0, 1e-12);
    }
}

TEST(Kernel, IdentityFieldIsProduct) {
    const auto pr = desk_providers();
    const FrozenKernel k(make_identity_field(2), pr);
    const auto s = pr[0]->slice(0.1);
    for (const Vec& v : {v2(0, 0), v2(0.05, -0.02), v2(0.3, 0.1)})
        EXPECT_NEAR(k.density(0.1, v, Vec::Zero(2)), s->value(v[0]) * s->value(v[1]), 1e-12 * s->value(0) * s->value(0));
}

TEST(Kernel, ConstantFieldHasUnitMass) {
    Mat A0(2, 2);
    A0 << 1.0, 0.3, 0.2, 1.06;
    const FrozenKernel k(make_constant_field(A0), desk_providers());
    const double t = 0.2;
    // Substitute v = A0 u so the integrand becomes the product density.
    const Rule r = composite(std::vector<double>{-1.5, -0.5, -0.15, 0.0, 0.15, 0.5, 1.5}, 24);
    double mass = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < r.size(); ++j)
            mass += r.w[i] * r.w[j] * A0.determinant() * k.density(t, A0 * v2(r.x[i], r.x[j]), Vec::Zero(2));
    EXPECT_NEAR(mass, 1.0, 1e-6);
}

TEST(Kernel, TimeDerivativeMatchesFiniteDifference) {
    const FrozenKernel k(make_rotation_field(2, 0.5), desk_providers());
    const Vec y = v2(0.5, 0.3);
    const Frozen fy = k.inverse().at(y);
    const double t = 0.2, h = 1e-4;
    for (const Vec& v : {v2(0, 0), v2(0.04, -0.03)}) {
        const double fd = (k.density(t + h, v, y) - k.density(t - h, v, y)) / (2.0 * h);
        const double an = FrozenKernel::time_derivative(k.slices(t), fy, v);
        EXPECT_NEAR(an, fd, 1e-4 * std::abs(an) + 1e-6);
    }
}
