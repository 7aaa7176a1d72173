#include "levyfeller/levy_models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace lf;

TEST(Stable, ExponentIsPowerOfXi) {
    for (double a : {0.5, 1.0, 1.5}) {
        const LevyModel1D m = make_stable(a);
        for (double xi : {0.1, 1.0, 7.0, 300.0}) {
            EXPECT_NEAR(m.psi(xi), std::pow(xi, a), 1e-12 * std::pow(xi, a));
            EXPECT_NEAR(m.psi_quadrature(xi), std::pow(xi, a), 1e-7 * std::pow(xi, a)) << "alpha " << a;
        }
    }
}

TEST(Stable, CauchyConcentrationClosedForm) {
    // nu = x^-2 / pi gives h(r) = 4 / (pi r).
    const LevyModel1D m = make_stable(1.0);
    for (double r : {1e-3, 0.3, 1.0, 40.0}) EXPECT_NEAR(concentration_h(m, r), 4.0 / (std::numbers::pi * r), 1e-9 / r);
    EXPECT_NEAR(h_inverse(m, 1.0 / 0.3), 1.2 / std::numbers::pi, 1e-9);
}

TEST(Stable, ScalingIsExact) {
    for (double a : {0.8, 1.2, 1.6}) {
        const LevyModel1D m = make_stable(a);
        const auto ts = log_grid(1e-3, 1.0, 9);
        std::vector<double> hi;
        for (double t : ts) hi.push_back(h_inverse(m, 1.0 / t));
        EXPECT_NEAR(loglog_slope(ts, hi), 1.0 / a, 1e-6);
        const ScalingReport rep = verify_scaling(m);
        EXPECT_FALSE(rep.lower_violated);
        EXPECT_FALSE(rep.upper_violated);
    }
}

TEST(Relativistic, ClosedFormMatchesQuadrature) {
    for (auto [a, mass] : std::vector<std::pair<double, double>>{{1.0, 1.0}, {1.5, 0.5}, {0.6, 2.0}}) {
        const LevyModel1D m = make_relativistic(a, mass);
        for (double xi : {0.05, 1.0, 3.0, 50.0}) {
            const double closed = std::pow(std::pow(mass, 2.0 / a) + xi * xi, a / 2.0) - mass;
            EXPECT_NEAR(m.psi(xi), closed, 1e-12 * closed);
            EXPECT_NEAR(m.psi_quadrature(xi), closed, 1e-6 * closed) << a << " " << mass << " " << xi;
        }
    }
}

TEST(TruncatedStable, SupportAndQuadrature) {
    const LevyModel1D m = make_truncated_stable(1.0);
    EXPECT_EQ(m.nu(1.5), 0.0);
    EXPECT_GT(m.nu(0.5), 0.0);
    for (double xi : {0.5, 4.0, 100.0}) EXPECT_NEAR(m.psi(xi), m.psi_quadrature(xi), 1e-7 * m.psi(xi));
}

TEST(AllModels, DensityAssumptionsHold) {
    for (const LevyModel1D& m : {make_stable(0.7), make_stable(1.4), make_relativistic(1.0, 1.0),
                                 make_truncated_stable(1.0), make_truncated_stable(1.5)}) {
        const RegularityReport r = check_regularity(m);
        EXPECT_TRUE(r.ok()) << m.family;
    }
}

TEST(Tabulated, ReproducesNodesAndPowerLaw) {
    const LevyModel1D ref = make_stable(1.0);
    std::vector<double> x = log_grid(1e-4, 10.0, 200), nu;
    for (double v : x) nu.push_back(ref.nu(v));
    const LevyModel1D m = make_tabulated(x, nu, 1.0, 1.0, 1.0, 1.0, 1.0);
    for (std::size_t k = 0; k < x.size(); k += 37) EXPECT_NEAR(m.nu(x[k]), nu[k], 1e-12 * nu[k]);
    // Log-log interpolation is exact for a power law.
    EXPECT_NEAR(m.nu(0.0123), ref.nu(0.0123), 1e-9 * ref.nu(0.0123));
    EXPECT_EQ(m.nu(-0.5), m.nu(0.5));
}

TEST(Utilities, LoglogSlopeOfPowerLaw) {
    std::vector<double> x{0.1, 0.2, 0.5, 1.0, 3.0}, y;
    for (double v : x) y.push_back(7.0 * std::pow(v, -1.7));
    EXPECT_NEAR(loglog_slope(x, y), -1.7, 1e-12);
}

// Property: psi is even, vanishes at 0 and sits in the band (2/pi^2) h(r) <= psi(1/r) <= 2 h(r).
TEST(Property, EvenNonNegativeAndInBand) {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> lr(std::log(1e-3), std::log(1e3));
    const double lo = 2.0 / (std::numbers::pi * std::numbers::pi);
    for (const LevyModel1D& m : {make_stable(0.5), make_stable(1.9), make_relativistic(1.2, 0.3),
                                 make_truncated_stable(0.8)}) {
        EXPECT_EQ(m.psi(0.0), 0.0);
        for (int k = 0; k < 40; ++k) {
            const double r = std::exp(lr(rng));
            const double p = m.psi(1.0 / r), h = concentration_h(m, r);
            EXPECT_DOUBLE_EQ(m.psi(-1.0 / r), p);
            EXPECT_GE(p, lo * h);
            EXPECT_LE(p, 2.0 * h);
        }
    }
}

TEST(Errors, InvalidParametersThrow) {
    EXPECT_THROW(make_stable(2.0), std::invalid_argument);
    EXPECT_THROW(make_stable(0.0), std::invalid_argument);
    EXPECT_THROW(make_relativistic(1.0, -1.0), std::invalid_argument);
}
