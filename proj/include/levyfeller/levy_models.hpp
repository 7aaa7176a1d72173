#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace lf {

/// One symmetric 1-D Levy coordinate described by its jump density and,
/// optionally, a closed-form characteristic exponent.
struct LevyModel1D {
    std::function<double(double)> nu_pos;      ///< density on x > 0
    std::function<double(double)> psi_closed;  ///< may be empty
    double alpha = 1.0;
    double beta = 1.0;
    double c_lower = 1.0;
    double c_upper = 1.0;
    double eta4 = 1.0;
    double support = std::numeric_limits<double>::infinity();  ///< nu = 0 beyond
    std::string family = "custom";
    std::vector<double> params;  ///< family parameters, for reporting and simulation

    double nu(double x) const;
    double psi(double xi) const;
    double psi_quadrature(double xi) const;
};

struct ScalingConstants {
    double C1, C2, C3, C4;
};

struct ScalingReport {
    double c_lower_candidate;
    double c_upper_candidate;
    bool lower_violated;
    bool upper_violated;
};

struct RegularityReport {
    bool positive_finite = true;
    bool smooth = true;
    bool decreasing = true;
    bool ratio_monotone = true;
    bool small_moment_finite = true;
    bool infinite_mass = true;
    double worst_smooth_margin = 0.0;
    double worst_ratio_margin = 0.0;
    int grid_points = 257;
    bool ok() const {
        return positive_finite && smooth && decreasing && ratio_monotone && small_moment_finite &&
               infinite_mass;
    }
};

/// Normalizing constant making the stable exponent exactly |xi|^alpha.
double stable_constant(double alpha);

LevyModel1D make_stable(double alpha);
LevyModel1D make_relativistic(double alpha, double m);
LevyModel1D make_truncated_stable(double alpha);
/// Tabulated density (strictly increasing x > 0), log-log interpolated.
LevyModel1D make_tabulated(std::vector<double> x, std::vector<double> nu, double alpha, double beta,
                           double c_lower, double c_upper, double eta4);

double concentration_h(const LevyModel1D& m, double r);
double concentration_K(const LevyModel1D& m, double r);
/// Integral of nu over (r, inf), one side.
double tail_mass(const LevyModel1D& m, double r);
/// Integral of x^2 nu over (0, r), one side.
double small_second_moment(const LevyModel1D& m, double r);

ScalingConstants scaling_constants(const LevyModel1D& m, double tau);
double h_inverse(const LevyModel1D& m, double s, double tau = 1.0);

ScalingReport verify_scaling(const LevyModel1D& m, const std::vector<double>& lambda_grid,
                             const std::vector<double>& theta_grid);
ScalingReport verify_scaling(const LevyModel1D& m);

bool check_equivalence_h_psi(const LevyModel1D& m, const std::vector<double>& r_grid);

RegularityReport check_regularity(const LevyModel1D& m);

/// Log-spaced grid with n points on [a, b].
std::vector<double> log_grid(double a, double b, int n);

/// Moment integral over (0,1) of x^eta * min(1/h^{-1}(1/t), t h(x)/x).
double moment_integral(const LevyModel1D& m, double t, double eta);
/// Least-squares log-log slope of moment_integral over the given times.
double moment_exponent(const LevyModel1D& m, const std::vector<double>& times, double eta);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lf

namespace lf {

/// Tabulated h on a log grid, for fast envelope evaluation.
class ConcentrationTable {
public:
    explicit ConcentrationTable(const LevyModel1D& m, double rmin = 1e-7, double rmax = 1e4, int n = 1200);
    double h(double r) const;
    double h_inv(double s) const;

private:
    std::vector<double> lr_, lh_;
};

}  // namespace lf
