#include "levyfeller/truncation.hpp"

#include "levyfeller/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lf {

namespace {

double quintic(double s) { return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); }
double dquintic(double s) { return -30.0 * s * s * (1.0 - s) * (1.0 - s); }

double dnu(const LevyModel1D& m, double x) {
    const double h = 1e-6 * x;
    return (m.nu(x + h) - m.nu(x - h)) / (2.0 * h);
}

// Profile integral: int_s^1 (1+u)(1-u)^k du.
double profile_integral(double s, double k) {
    const double v = 1.0 - s;
    return 2.0 * std::pow(v, k + 1.0) / (k + 1.0) - std::pow(v, k + 2.0) / (k + 2.0);
}

}  // namespace

TruncatedModel1D::TruncatedModel1D(std::shared_ptr<const LevyModel1D> base, double delta, TaperKind kind,
                                   double power)
    : base_(std::move(base)), delta_(delta), kind_(kind), power_(power) {
    if (!(delta_ > 0.0)) throw std::invalid_argument("truncation radius must be positive");
    if (base_->eta4 < 2.0 * delta_) throw std::invalid_argument("regularity radius below 2 delta");
    if (kind_ == TaperKind::RatioProfile) {
        const double nd = base_->nu(delta_);
        const double slope = -dnu(*base_, delta_);
        profile_c_ = slope / delta_;
        const double target = nd / (delta_ * slope);
        if (!(target > 0.0 && target < 1.5))
            throw std::runtime_error("ratio profile taper: nu/(x|nu'|) at delta outside (0,1.5)");
        double lo = 0.0, hi = 1.0;
        while (profile_integral(0.0, hi) > target) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (profile_integral(0.0, mid) > target ? lo : hi) = mid;
        }
        profile_k_ = 0.5 * (lo + hi);
    }
    const double d = delta_;
    const double taper_gap =
        integrate([&](double x) { return base_->nu(x) - mu(x); }, d, 2.0 * d, 1e-13).value;
    mass_defect_ = 2.0 * (taper_gap + tail_mass(*base_, 2.0 * d));
    const double taper_m2 = integrate([&](double x) { return x * x * mu(x); }, d, 2.0 * d, 1e-13).value;
    second_moment_ = 2.0 * (small_second_moment(*base_, d) + taper_m2);
}

double TruncatedModel1D::taper_value(double x) const {
    const double s = (x - delta_) / delta_;
    switch (kind_) {
        case TaperKind::Hard:
            return 0.0;
        case TaperKind::Quintic:
            return base_->nu(x) * quintic(std::pow(s, power_));
        case TaperKind::RatioProfile:
            return profile_c_ * delta_ * delta_ * profile_integral(s, profile_k_);
    }
    return 0.0;
}

double TruncatedModel1D::mu(double x) const {
    const double a = std::abs(x);
    if (a == 0.0 || a >= 2.0 * delta_) return 0.0;
    if (a <= delta_) return base_->nu(a);
    return taper_value(a);
}

double TruncatedModel1D::dmu(double x) const {
    const double a = std::abs(x);
    const double sign = x < 0 ? -1.0 : 1.0;
    if (a == 0.0 || a >= 2.0 * delta_) return 0.0;
    if (a <= delta_) return sign * dnu(*base_, a);
    const double s = (a - delta_) / delta_;
    double v = 0.0;
    switch (kind_) {
        case TaperKind::Hard:
            v = 0.0;
            break;
        case TaperKind::Quintic: {
            const double sp = std::pow(s, power_);
            const double dsp = power_ * std::pow(s, power_ - 1.0) / delta_;
            v = dnu(*base_, a) * quintic(sp) + base_->nu(a) * dquintic(sp) * dsp;
            break;
        }
        case TaperKind::RatioProfile:
            v = -a * profile_c_ * std::pow(1.0 - s, profile_k_);
            break;
    }
    return sign * v;
}

double TruncatedModel1D::psi_delta(double xi) const {
    const double z = std::abs(xi);
    if (z == 0.0) return 0.0;
    const double d = delta_;
    const double a = std::min(1.0 / z, d);
    static const Rule inner_rule = gauss_legendre(24, 0.0, 1.0);
    static const Rule panel_rule = gauss_legendre(8, -1.0, 1.0);
    const double k = std::min(20.0, 1.0 / std::max(2.0 - base_->alpha, 0.05));
    double total = 0.0;
    for (std::size_t i = 0; i < inner_rule.size(); ++i) {
        const double s = inner_rule.x[i];
        const double x = a * std::pow(s, k);
        const double zx = z * x;
        const double omc = one_minus_cos(zx);
        total += inner_rule.w[i] * omc * mu(x) * a * k * std::pow(s, k - 1.0);
    }
    const double half_period = 3.141592653589793 / z;
    double x = a;
    while (x < 2.0 * d) {
        double nx = std::min({2.0 * x, x + half_period, x + 0.25 * d});
        if (x < d && nx > d) nx = d;
        nx = std::min(nx, 2.0 * d);
        const double hw = 0.5 * (nx - x), mid = 0.5 * (nx + x);
        for (std::size_t i = 0; i < panel_rule.size(); ++i) {
            const double y = mid + hw * panel_rule.x[i];
            total += hw * panel_rule.w[i] * one_minus_cos(z * y) * mu(y);
        }
        x = nx;
    }
    return 2.0 * total;
}

double TruncatedModel1D::gap_mass_above(double r) const {
    const double lo = std::max(r, delta_);
    double v = tail_mass(*base_, std::max(lo, 2.0 * delta_));
    if (lo < 2.0 * delta_)
        v += integrate([&](double x) { return gap(x); }, lo, 2.0 * delta_, 1e-12).value;
    return 2.0 * v;
}

double choose_delta(double epsilon, const DeltaInputs& in) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in (0,1]");
    return std::min({in.delta0, epsilon * in.alpha / (8.0 * in.d + 8.0 * in.beta + 16.0),
                     epsilon / (in.d * in.eta1 * in.eta1)});
}

TaperReport validate_taper(const TruncatedModel1D& tm) {
    TaperReport rep;
    const double d = tm.delta();
    std::vector<double> xs = log_grid(d / 10.0, 4.0 * d, rep.grid_points);
    xs.push_back(d);
    xs.push_back(2.0 * d);
    std::sort(xs.begin(), xs.end());
    auto flag = [&](const char* what, double x) {
        if (rep.first_violation.empty()) {
            rep.first_violation = what;
            rep.first_violation_x = x;
        }
    };
    double scale = 0.0;
    for (double x : xs) scale = std::max(scale, std::abs(tm.dmu(x)));
    double prev_ratio = std::numeric_limits<double>::infinity();
    for (double x : xs) {
        const double eta = 1e-7 * x;
        const double left = (tm.mu(x) - tm.mu(x - eta)) / eta;
        const double right = (tm.mu(x + eta) - tm.mu(x)) / eta;
        const double jump = std::abs(right - left) / (std::abs(left) + std::abs(right) + 1e-6 * scale);
        rep.worst_jump = std::max(rep.worst_jump, jump);
        if (jump > 1e-3) {
            rep.c1 = false;
            flag("derivative jump", x);
        }
        const double m1 = tm.dmu(x);
        rep.worst_slope = std::max(rep.worst_slope, m1);
        if (m1 > 1e-12 * scale) {
            rep.nonincreasing = false;
            flag("positive derivative", x);
        }
        if (tm.mu(x) > tm.base().nu(x) * (1.0 + 1e-12)) {
            rep.bounded_by_nu = false;
            flag("exceeds nu", x);
        }
        const double ratio = -m1 / x;
        if (std::isfinite(prev_ratio) && prev_ratio > 0.0) {
            const double rise = (ratio - prev_ratio) / prev_ratio;
            rep.worst_ratio_rise = std::max(rep.worst_ratio_rise, rise);
            if (rise > 1e-6) {
                rep.ratio_monotone = false;
                flag("-mu'/x increases", x);
            }
        }
        prev_ratio = ratio;
    }
    return rep;
}

TruncatedModel1D truncate(std::shared_ptr<const LevyModel1D> model, double delta, double delta0) {
    if (!(delta > 0.0 && delta <= delta0 * (1.0 + 1e-15)))
        throw std::invalid_argument("truncation radius outside (0, delta0]");
    for (int k = 1; k <= 8; ++k) {
        TruncatedModel1D tm(model, delta, TaperKind::Quintic, static_cast<double>(k));
        if (validate_taper(tm).ok()) return tm;
    }
    TruncatedModel1D tm(model, delta, TaperKind::RatioProfile);
    const TaperReport rep = validate_taper(tm);
    if (!rep.ok())
        throw std::runtime_error("taper validation failed: " + rep.first_violation + " at x=" +
                                 std::to_string(rep.first_violation_x));
    return tm;
}

double lambda_zero(const std::vector<TruncatedModel1D>& tms) {
    double s = 0.0;
    for (const auto& tm : tms) s += tm.mass_defect();
    return s;
}

std::string taper_name(const TruncatedModel1D& tm) {
    switch (tm.kind()) {
        case TaperKind::Hard:
            return "hard";
        case TaperKind::Quintic:
            return "quintic^" + std::to_string(static_cast<int>(tm.power()));
        case TaperKind::RatioProfile:
            return "ratio_profile";
    }
    return "?";
}

}  // namespace lf
