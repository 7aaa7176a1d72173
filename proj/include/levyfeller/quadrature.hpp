#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace lf {

/// 1 - cos(x) without cancellation near zero.
inline double one_minus_cos(double x) {
    const double h = std::sin(0.5 * x);
    return 2.0 * h * h;
}

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

/// Gauss-Legendre rule on [a, b].
Rule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Gauss rule for a discrete positive measure (points, masses) via the
/// Stieltjes recurrence followed by Golub-Welsch. Returns at most n nodes.
Rule gauss_for_measure(std::span<const double> pts, std::span<const double> mass, int n);

/// Composite Gauss-Legendre on consecutive breakpoints.
Rule composite(std::span<const double> breaks, int per_panel);

/// Geometric breakpoints from a to b (a > 0) with the given ratio cap.
std::vector<double> geometric_breaks(double a, double b, double ratio);

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

/// Adaptive Gauss-Kronrod (15 point) on a finite interval.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double rel_tol = 1e-11, double abs_tol = 1e-15, int max_depth = 15);

/// Integral over [a, inf) using the map x = a + s/(1-s).
QuadResult integrate_to_inf(const std::function<double(double)>& f, double a,
                            double rel_tol = 1e-11, double abs_tol = 1e-15);

}  // namespace lf
