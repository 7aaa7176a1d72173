#include "levyfeller/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <stdexcept>

namespace lf {

namespace {

Rule golub_welsch(const std::vector<double>& a, const std::vector<double>& b, double mu0) {
    const int n = static_cast<int>(a.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        J(k, k) = a[k];
        if (k + 1 < n) {
            J(k, k + 1) = b[k];
            J(k + 1, k) = b[k];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int k = 0; k < n; ++k) {
        r.x[k] = es.eigenvalues()(k);
        const double v = es.eigenvectors()(0, k);
        r.w[k] = mu0 * v * v;
    }
    return r;
}

}  // namespace

Rule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
    std::vector<double> diag(n, 0.0), off(n > 1 ? n - 1 : 0);
    for (int k = 1; k < n; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    Rule r = golub_welsch(diag, off, 2.0);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int k = 0; k < n; ++k) {
        r.x[k] = mid + half * r.x[k];
        r.w[k] *= half;
    }
    return r;
}

Rule gauss_for_measure(std::span<const double> pts, std::span<const double> mass, int n) {
    const std::size_t m = pts.size();
    double mu0 = 0.0;
    for (double v : mass) mu0 += v;
    if (mu0 <= 0.0) throw std::invalid_argument("gauss_for_measure: empty measure");
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = mass[i] / mu0;

    // Stieltjes procedure with normalized polynomials.
    std::vector<double> pprev(m, 0.0), pcur(m, 1.0), pnext(m);
    std::vector<double> alpha, beta;
    double bprev = 0.0;
    for (int k = 0; k < n; ++k) {
        double ak = 0.0;
        for (std::size_t i = 0; i < m; ++i) ak += w[i] * pts[i] * pcur[i] * pcur[i];
        alpha.push_back(ak);
        for (std::size_t i = 0; i < m; ++i)
            pnext[i] = (pts[i] - ak) * pcur[i] - bprev * pprev[i];
        double nrm = 0.0;
        for (std::size_t i = 0; i < m; ++i) nrm += w[i] * pnext[i] * pnext[i];
        nrm = std::sqrt(nrm);
        if (k + 1 == n) break;
        if (!(nrm > 1e-13)) break;
        beta.push_back(nrm);
        for (std::size_t i = 0; i < m; ++i) {
            pprev[i] = pcur[i];
            pcur[i] = pnext[i] / nrm;
        }
        bprev = nrm;
    }
    beta.resize(alpha.size() > 0 ? alpha.size() - 1 : 0);
    return golub_welsch(alpha, beta, mu0);
}

Rule composite(std::span<const double> breaks, int per_panel) {
    Rule base = gauss_legendre(per_panel);
    Rule r;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double a = breaks[p], b = breaks[p + 1];
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t k = 0; k < base.size(); ++k) {
            r.x.push_back(mid + half * base.x[k]);
            r.w.push_back(half * base.w[k]);
        }
    }
    return r;
}

std::vector<double> geometric_breaks(double a, double b, double ratio) {
    std::vector<double> out{a};
    double x = a;
    while (x * ratio < b) {
        x *= ratio;
        out.push_back(x);
    }
    if (out.back() < b) out.push_back(b);
    return out;
}

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double rel_tol, double abs_tol, int max_depth) {
    QuadResult res;
    if (a == b) return res;
    double l1 = 0.0;
    res.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, static_cast<unsigned>(max_depth), rel_tol, &res.error, &l1);
    res.converged = res.error <= std::max(abs_tol, rel_tol * std::max(std::abs(res.value), l1)) * 10.0;
    return res;
}

QuadResult integrate_to_inf(const std::function<double(double)>& f, double a,
                            double rel_tol, double abs_tol) {
    auto g = [&](double s) {
        if (s >= 1.0) return 0.0;
        const double om = 1.0 - s;
        const double v = f(a + s / om);
        return std::isfinite(v) ? v / (om * om) : 0.0;
    };
    return integrate(g, 0.0, 1.0, rel_tol, abs_tol);
}

}  // namespace lf
