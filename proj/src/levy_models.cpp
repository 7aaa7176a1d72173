#include "levyfeller/levy_models.hpp"

#include "levyfeller/quadrature.hpp"

#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lf {

namespace {

constexpr double kPi = std::numbers::pi;

double power_sub_exponent(double alpha) { return std::min(20.0, 1.0 / std::max(2.0 - alpha, 0.05)); }

void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in (0,2)");
}

}  // namespace

double LevyModel1D::nu(double x) const {
    const double a = std::abs(x);
    if (a == 0.0 || a >= support) return 0.0;
    return nu_pos(a);
}

double LevyModel1D::psi(double xi) const {
    if (xi == 0.0) return 0.0;
    if (psi_closed) return psi_closed(std::abs(xi));
    return psi_quadrature(xi);
}

double LevyModel1D::psi_quadrature(double xi) const {
    const double z = std::abs(xi);
    if (z == 0.0) return 0.0;
    const double x0 = std::min(1.0 / z, support);
    const double k = power_sub_exponent(alpha);
    auto inner = [&](double s) {
        if (s <= 0.0) return 0.0;
        const double x = x0 * std::pow(s, k);
        const double zx = z * x;
        return one_minus_cos(zx) * nu(x) * x0 * k * std::pow(s, k - 1.0);
    };
    double total = integrate(inner, 0.0, 1.0, 1e-12).value;
    if (x0 < support) {
        if (std::isfinite(support)) {
            const double period = 2.0 * kPi / z;
            const int panels = std::max(1, static_cast<int>(std::ceil((support - x0) / period)));
            for (int p = 0; p < panels; ++p) {
                const double a = x0 + p * period;
                const double b = std::min(support, a + period);
                total += integrate([&](double x) { return one_minus_cos(z * x) * nu(x); }, a, b,
                                   1e-12)
                             .value;
            }
        } else {
            // (1 - cos) split into tail mass and a Fourier integral of the shifted density.
            const double mass = tail_mass(*this, x0);
            boost::math::quadrature::ooura_fourier_cos<double> fc;
            boost::math::quadrature::ooura_fourier_sin<double> fs;
            auto shifted = [&](double y) { return nu(y + x0); };
            const double c = fc.integrate(shifted, z).first;
            const double s = fs.integrate(shifted, z).first;
            total += mass - (std::cos(z * x0) * c - std::sin(z * x0) * s);
        }
    }
    return 2.0 * total;
}

double stable_constant(double alpha) {
    require_alpha(alpha);
    return std::tgamma(1.0 + alpha) * std::sin(kPi * alpha / 2.0) / kPi;
}

LevyModel1D make_stable(double alpha) {
    require_alpha(alpha);
    LevyModel1D m;
    const double A = stable_constant(alpha);
    m.nu_pos = [A, alpha](double x) { return A * std::pow(x, -1.0 - alpha); };
    m.psi_closed = [alpha](double xi) { return std::pow(xi, alpha); };
    m.alpha = m.beta = alpha;
    m.c_lower = m.c_upper = 1.0;
    m.eta4 = 1.0;
    m.family = "stable";
    m.params = {alpha};
    return m;
}

LevyModel1D make_relativistic(double alpha, double mass) {
    require_alpha(alpha);
    if (!(mass > 0.0)) throw std::invalid_argument("relativistic mass must be positive");
    LevyModel1D m;
    const double M = std::pow(mass, 2.0 / alpha);
    const double v = 0.5 * (1.0 + alpha);
    const double pref = (alpha / 2.0) / std::tgamma(1.0 - alpha / 2.0) / std::sqrt(4.0 * kPi) * 2.0;
    m.nu_pos = [=](double x) {
        const double z = x * std::sqrt(M);
        if (z > 700.0) return 0.0;
        return pref * std::pow(x * x / (4.0 * M), -v / 2.0) * boost::math::cyl_bessel_k(v, z);
    };
    m.psi_closed = [=](double xi) { return std::pow(M + xi * xi, alpha / 2.0) - mass; };
    m.alpha = m.beta = alpha;
    m.eta4 = 1.0;
    m.family = "relativistic";
    m.params = {alpha, mass};
    const ScalingReport rep = verify_scaling(m);
    m.c_lower = rep.c_lower_candidate;
    m.c_upper = rep.c_upper_candidate;
    return m;
}

LevyModel1D make_truncated_stable(double alpha) {
    require_alpha(alpha);
    LevyModel1D m;
    const double A = stable_constant(alpha);
    m.nu_pos = [A, alpha](double x) { return A * std::pow(x, -1.0 - alpha); };
    m.alpha = m.beta = alpha;
    m.eta4 = 1.0;
    m.support = 1.0;
    m.psi_closed = [A, alpha](double xi) {
        if (xi < 1.0) {
            const double k = power_sub_exponent(alpha);
            auto f = [&](double s) {
                if (s <= 0.0) return 0.0;
                const double x = std::pow(s, k);
                const double zx = xi * x;
                const double omc = one_minus_cos(zx);
                return omc * A * std::pow(x, -1.0 - alpha) * k * std::pow(s, k - 1.0);
            };
            return 2.0 * integrate(f, 0.0, 1.0, 1e-13).value;
        }
        // Stable exponent minus the removed tail beyond 1.
        thread_local boost::math::quadrature::ooura_fourier_cos<double> fc;
        const double c = fc.integrate([alpha](double y) { return std::pow(1.0 + y, -1.0 - alpha); }, xi).first;
        thread_local boost::math::quadrature::ooura_fourier_sin<double> fs;
        const double s = fs.integrate([alpha](double y) { return std::pow(1.0 + y, -1.0 - alpha); }, xi).first;
        const double cos_tail = std::cos(xi) * c - std::sin(xi) * s;
        return std::pow(xi, alpha) - 2.0 * A / alpha + 2.0 * A * cos_tail;
    };
    m.family = "truncated_stable";
    m.params = {alpha};
    const ScalingReport rep = verify_scaling(m);
    m.c_lower = rep.c_lower_candidate;
    m.c_upper = rep.c_upper_candidate;
    return m;
}

LevyModel1D make_tabulated(std::vector<double> x, std::vector<double> nu, double alpha, double beta,
                           double c_lower, double c_upper, double eta4) {
    if (x.size() < 2 || x.size() != nu.size()) throw std::invalid_argument("tabulated nu: bad sizes");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(nu[i] > 0.0)) throw std::invalid_argument("tabulated nu: need x>0, nu>0");
        if (i > 0 && !(x[i] > x[i - 1])) throw std::invalid_argument("tabulated nu: x not increasing");
    }
    std::vector<double> lx(x.size()), ln(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx[i] = std::log(x[i]);
        ln[i] = std::log(nu[i]);
    }
    LevyModel1D m;
    const double lead = ln.front() + (1.0 + alpha) * lx.front();
    m.nu_pos = [lx, ln, lead, alpha](double xv) {
        const double l = std::log(xv);
        if (l <= lx.front()) return std::exp(lead - (1.0 + alpha) * l);
        auto it = std::upper_bound(lx.begin(), lx.end(), l);
        if (it == lx.end()) return std::exp(ln.back());
        const std::size_t j = static_cast<std::size_t>(it - lx.begin());
        const double s = (l - lx[j - 1]) / (lx[j] - lx[j - 1]);
        return std::exp(ln[j - 1] + s * (ln[j] - ln[j - 1]));
    };
    m.alpha = alpha;
    m.beta = beta;
    m.c_lower = c_lower;
    m.c_upper = c_upper;
    m.eta4 = eta4;
    m.support = x.back();
    m.family = "custom";
    return m;
}

double small_second_moment(const LevyModel1D& m, double r) {
    const double top = std::min(r, m.support);
    const double k = power_sub_exponent(m.alpha);
    auto f = [&](double s) {
        if (s <= 0.0) return 0.0;
        const double x = top * std::pow(s, k);
        return x * x * m.nu(x) * top * k * std::pow(s, k - 1.0);
    };
    return integrate(f, 0.0, 1.0, 1e-13).value;
}

double tail_mass(const LevyModel1D& m, double r) {
    if (r >= m.support) return 0.0;
    const double k = 1.0 / m.alpha;
    const double smin = std::isfinite(m.support) ? std::pow(r / m.support, m.alpha) : 0.0;
    auto f = [&](double s) {
        if (s <= 0.0) return 0.0;
        const double x = r * std::pow(s, -k);
        const double v = m.nu(x) * r * k * std::pow(s, -k - 1.0);
        return std::isfinite(v) ? v : 0.0;
    };
    return integrate(f, smin, 1.0, 1e-13).value;
}

double concentration_h(const LevyModel1D& m, double r) {
    if (!(r > 0.0)) throw std::domain_error("concentration_h: r must be positive");
    return 2.0 * (small_second_moment(m, r) / (r * r) + tail_mass(m, r));
}

double concentration_K(const LevyModel1D& m, double r) {
    if (!(r > 0.0)) throw std::domain_error("concentration_K: r must be positive");
    return 2.0 * small_second_moment(m, r) / (r * r);
}

namespace {

double h_inverse_bracketed(const LevyModel1D& m, double s, double lo, double hi) {
    // Grow until h(lo) >= s >= h(hi).
    int guard = 0;
    while (concentration_h(m, lo) < s) {
        lo *= 0.5;
        if (++guard > 400) throw std::range_error("h_inverse: value above achieved range");
    }
    guard = 0;
    while (concentration_h(m, hi) > s) {
        hi *= 2.0;
        if (++guard > 400) throw std::range_error("h_inverse: value below achieved range");
    }
    double a = std::log(lo), b = std::log(hi);
    while (b - a > 1e-13) {
        const double c = 0.5 * (a + b);
        if (concentration_h(m, std::exp(c)) > s)
            a = c;
        else
            b = c;
    }
    return std::exp(0.5 * (a + b));
}

double h_inverse_raw(const LevyModel1D& m, double s) {
    const double guess = std::pow(concentration_h(m, 1.0) / s, 1.0 / m.alpha);
    return h_inverse_bracketed(m, s, guess * 0.5, guess * 2.0);
}

}  // namespace

ScalingConstants scaling_constants(const LevyModel1D& m, double tau) {
    ScalingConstants c{};
    const double h1 = concentration_h(m, 1.0);
    c.C1 = m.c_lower / (kPi * kPi);
    c.C2 = kPi * kPi * m.c_upper;
    c.C3 = std::pow(c.C1, 1.0 / m.alpha) * std::pow(std::min(h1, 1.0 / tau), 1.0 / m.alpha);
    c.C4 = std::pow(c.C2, 1.0 / m.beta) * std::max(h_inverse_raw(m, 1.0 / tau), 1.0) *
           std::pow(h1, 1.0 / m.beta);
    return c;
}

double h_inverse(const LevyModel1D& m, double s, double tau) {
    if (!(s > 0.0)) throw std::range_error("h_inverse: argument must be positive");
    if (s >= 1.0 / tau) {
        const ScalingConstants c = scaling_constants(m, tau);
        const double t = 1.0 / s;
        return h_inverse_bracketed(m, s, c.C3 * std::pow(t, 1.0 / m.alpha),
                                   c.C4 * std::pow(t, 1.0 / m.beta));
    }
    return h_inverse_raw(m, s);
}

std::vector<double> log_grid(double a, double b, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i)
        g[i] = n == 1 ? a : std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (n - 1));
    return g;
}

ScalingReport verify_scaling(const LevyModel1D& m, const std::vector<double>& lambda_grid,
                             const std::vector<double>& theta_grid) {
    ScalingReport r{std::numeric_limits<double>::infinity(), 0.0, false, false};
    for (double th : theta_grid) {
        if (!(th > 0.0)) continue;
        const double p = m.psi(th);
        for (double la : lambda_grid) {
            const double q = m.psi(la * th);
            r.c_lower_candidate = std::min(r.c_lower_candidate, q / (std::pow(la, m.alpha) * p));
            if (th >= 1.0)
                r.c_upper_candidate = std::max(r.c_upper_candidate, q / (std::pow(la, m.beta) * p));
        }
    }
    r.lower_violated = r.c_lower_candidate < m.c_lower * (1.0 - 1e-6);
    r.upper_violated = r.c_upper_candidate > m.c_upper * (1.0 + 1e-6);
    return r;
}

ScalingReport verify_scaling(const LevyModel1D& m) {
    return verify_scaling(m, log_grid(1.0, 1e3, 25), log_grid(1e-3, 1e3, 49));
}

bool check_equivalence_h_psi(const LevyModel1D& m, const std::vector<double>& r_grid) {
    for (double r : r_grid) {
        const double h = concentration_h(m, r);
        const double p = m.psi(1.0 / r);
        const double slack = 1e-9 * h;
        if (p < 2.0 / (kPi * kPi) * h - slack || p > 2.0 * h + slack) return false;
    }
    return true;
}

RegularityReport check_regularity(const LevyModel1D& m) {
    RegularityReport rep;
    const int n = rep.grid_points;
    std::vector<double> xs(n), d(n), ratio(n);
    for (int i = 0; i < n; ++i) xs[i] = m.eta4 * (i + 1.0) / (n + 1.0);
    for (int i = 0; i < n; ++i) {
        const double x = xs[i];
        const double v = m.nu(x);
        if (!(v > 0.0) || !std::isfinite(v)) rep.positive_finite = false;
        const double hstep = 1e-4 * x;
        const double d1 = (m.nu(x + hstep) - m.nu(x - hstep)) / (2.0 * hstep);
        const double d2 = (m.nu(x + 2 * hstep) - m.nu(x - 2 * hstep)) / (4.0 * hstep);
        const double margin = std::abs(d1 - d2) / std::max(std::abs(d1), 1e-300);
        rep.worst_smooth_margin = std::max(rep.worst_smooth_margin, margin);
        if (margin > 1e-3) rep.smooth = false;
        if (!(d1 < 0.0)) rep.decreasing = false;
        d[i] = d1;
        ratio[i] = -d1 / x;
    }
    for (int i = 1; i < n; ++i) {
        const double incr = (ratio[i] - ratio[i - 1]) / std::abs(ratio[i - 1]);
        rep.worst_ratio_margin = std::max(rep.worst_ratio_margin, incr);
        if (incr > 1e-8) rep.ratio_monotone = false;
    }
    const double mom = small_second_moment(m, 1.0) + tail_mass(m, 1.0);
    rep.small_moment_finite = std::isfinite(mom);
    const double i1 = tail_mass(m, 1e-2) - tail_mass(m, 1.0);
    const double i2 = tail_mass(m, 1e-4) - tail_mass(m, 1.0);
    const double i3 = tail_mass(m, 1e-6) - tail_mass(m, 1.0);
    rep.infinite_mass = i2 > 1.5 * i1 && i3 > 1.5 * i2;
    return rep;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double moment_integral(const LevyModel1D& m, double t, double eta) {
    const double cap = 1.0 / h_inverse(m, 1.0 / t);
    auto f = [&](double x) {
        if (x <= 0.0) return 0.0;
        return std::pow(x, eta) * std::min(cap, t * concentration_h(m, x) / x);
    };
    // Breakpoint near the switch radius where the two branches meet.
    const double knee = std::min(1.0, h_inverse(m, 1.0 / t));
    return integrate(f, 0.0, knee, 1e-8).value + integrate(f, knee, 1.0, 1e-8).value;
}

double moment_exponent(const LevyModel1D& m, const std::vector<double>& times, double eta) {
    std::vector<double> vals;
    for (double t : times) vals.push_back(moment_integral(m, t, eta));
    return loglog_slope(times, vals);
}

}  // namespace lf

namespace lf {

ConcentrationTable::ConcentrationTable(const LevyModel1D& m, double rmin, double rmax, int n) {
    for (double r : log_grid(rmin, rmax, n)) {
        lr_.push_back(std::log(r));
        lh_.push_back(std::log(concentration_h(m, r)));
    }
}

double ConcentrationTable::h(double r) const {
    const double l = std::log(r);
    std::size_t j;
    if (l <= lr_.front())
        j = 1;
    else if (l >= lr_.back())
        j = lr_.size() - 1;
    else
        j = static_cast<std::size_t>(std::upper_bound(lr_.begin(), lr_.end(), l) - lr_.begin());
    const double s = (l - lr_[j - 1]) / (lr_[j] - lr_[j - 1]);
    return std::exp(lh_[j - 1] + s * (lh_[j] - lh_[j - 1]));
}

double ConcentrationTable::h_inv(double s) const {
    const double l = std::log(s);
    // lh_ is decreasing.
    std::size_t j;
    if (l >= lh_.front())
        j = 1;
    else if (l <= lh_.back())
        j = lh_.size() - 1;
    else
        j = static_cast<std::size_t>(
            std::upper_bound(lh_.begin(), lh_.end(), l, [](double a, double b) { return a > b; }) - lh_.begin());
    const double u = (l - lh_[j - 1]) / (lh_[j] - lh_[j - 1]);
    return std::exp(lr_[j - 1] + u * (lr_[j] - lr_[j - 1]));
}

}  // namespace lf
