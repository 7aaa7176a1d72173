#include "levyfeller/density1d.hpp"

#include "levyfeller/quadrature.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

namespace lf {

namespace {

constexpr double kPi = std::numbers::pi;

std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

struct C2R {
    int n;
    fftw_complex* in;
    double* out;
    fftw_plan plan;
    explicit C2R(int n_) : n(n_) {
        in = fftw_alloc_complex(n / 2 + 1);
        out = fftw_alloc_real(n);
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE);
    }
    ~C2R() {
        {
            std::lock_guard<std::mutex> lock(fftw_plan_mutex());
            fftw_destroy_plan(plan);
        }
        fftw_free(in);
        fftw_free(out);
    }
    C2R(const C2R&) = delete;
    C2R& operator=(const C2R&) = delete;
};

double round_up_pow2(double x) { return std::exp2(std::ceil(std::log2(x))); }

}  // namespace

double DensitySlice::hermite(const std::vector<double>& f, const std::vector<double>& df, double x) const {
    const double u = (x + L) / dx;
    if (!(u >= 0.0) || u >= n - 1) return 0.0;
    const int k = static_cast<int>(u);
    const double s = u - k;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * f[k] + h10 * dx * df[k] + h01 * f[k + 1] + h11 * dx * df[k + 1];
}

double DensitySlice::second(double x) const {
    const double u = (x + L) / dx;
    if (!(u >= 0.0) || u >= n - 1) return 0.0;
    const int k = static_cast<int>(u);
    const double s = u - k;
    return (1.0 - s) * g2[k] + s * g2[k + 1];
}

DensityProvider::DensityProvider(std::shared_ptr<const TruncatedModel1D> tm, GridPolicy policy)
    : tm_(std::move(tm)), policy_(policy) {}

double DensityProvider::auto_half_width(double t) const {
    if (policy_.L > 0.0) return policy_.L;
    const double scale = h_inverse(tm_->base(), 1.0 / t);
    return round_up_pow2(std::max(8.0 * scale, 40.0 * tm_->delta()));
}

const std::vector<double>& DensityProvider::spectrum_upto(double L, int mmax) const {
    std::vector<double>* sp;
    std::size_t have;
    {
        std::lock_guard<std::mutex> lock(mu_);
        sp = &spectra_[L];
        have = sp->size();
        if (have > static_cast<std::size_t>(mmax)) return *sp;
    }
    std::vector<double> extra(static_cast<std::size_t>(mmax) + 1 - have);
    const double dxi = kPi / L;
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < static_cast<long>(extra.size()); ++i)
        extra[i] = tm_->psi_delta(static_cast<double>(have + i) * dxi);
    std::lock_guard<std::mutex> lock(mu_);
    if (sp->size() == have) sp->insert(sp->end(), extra.begin(), extra.end());
    return *sp;
}

double DensityProvider::spectrum(double L, int m) const { return spectrum_upto(L, m)[m]; }

int DensityProvider::auto_points(double t, double L) const {
    int n = policy_.n_min;
    while (policy_.jump_cells > 0.0 && 2.0 * L / n > tm_->delta() / policy_.jump_cells && n < policy_.n_max) n *= 2;
    while (true) {
        const double tail = std::exp(-t * spectrum(L, n / 2));
        if (tail < policy_.spectral_tail) return n;
        n *= 2;
        if (n > policy_.n_max)
            throw ResolutionError("density grid: spectral tail criterion needs more than " +
                                  std::to_string(policy_.n_max) + " points at t=" + std::to_string(t));
    }
}

DensitySlice DensityProvider::build(double t, double L, int n) const {
    if (!(t > 0.0)) throw std::invalid_argument("density: t must be positive");
    const std::vector<double>& psi = spectrum_upto(L, n / 2);
    DensitySlice s;
    s.t = t;
    s.L = L;
    s.n = n;
    s.dx = 2.0 * L / n;
    const double dxi = kPi / L;
    const double norm = dxi / (2.0 * kPi);
    C2R fft(n);
    auto run = [&](auto coef, std::vector<double>& dst) {
        for (int m = 0; m <= n / 2; ++m) {
            const double xi = m * dxi;
            const double phi = std::exp(-t * psi[m]) * norm * ((m & 1) ? -1.0 : 1.0);
            const std::complex<double> c = coef(xi, psi[m]) * phi;
            fft.in[m][0] = c.real();
            fft.in[m][1] = c.imag();
        }
        fft.in[n / 2][1] = 0.0;
        fftw_execute(fft.plan);
        dst.assign(fft.out, fft.out + n);
    };
    using cd = std::complex<double>;
    run([](double, double) { return cd(1.0, 0.0); }, s.g);
    run([n, dxi](double xi, double) { return xi >= 0.5 * n * dxi ? cd(0.0, 0.0) : cd(0.0, xi); }, s.g1);
    run([](double xi, double) { return cd(-xi * xi, 0.0); }, s.g2);
    run([](double, double p) { return cd(-p, 0.0); }, s.gt);
    run([n, dxi](double xi, double p) { return xi >= 0.5 * n * dxi ? cd(0.0, 0.0) : cd(0.0, -p * xi); }, s.gt1);

    double mass = 0.0, sym = 0.0, neg = 0.0, peak = 0.0;
    for (int k = 0; k < n; ++k) {
        mass += s.g[k] * s.dx;
        neg = std::min(neg, s.g[k]);
        peak = std::max(peak, s.g[k]);
        if (k > 0) sym = std::max(sym, std::abs(s.g[k] - s.g[n - k]));
    }
    s.mass_error = std::abs(mass - 1.0);
    s.symmetry_error = sym;
    s.most_negative = neg;
    if (neg < -1e-12) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "density: negative ringing %.3e (peak %.3e) at t=%g", neg, peak, t);
        throw ResolutionError(msg);
    }
    for (double& v : s.g) v = std::max(v, 0.0);
    // Exponential tail fit over the range where g lies in (1e-10, 1e-3) * peak.
    std::vector<double> xs, ys;
    for (int k = n / 2; k < n; ++k) {
        if (s.g[k] < 1e-3 * peak && s.g[k] > 1e-10 * peak) {
            xs.push_back(s.x_at(k));
            ys.push_back(std::log(s.g[k]));
        }
    }
    if (xs.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= xs.size();
        my /= xs.size();
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        s.tail_rate = sxx > 0 ? -sxy / sxx : 0.0;
    }
    return s;
}

std::shared_ptr<const DensitySlice> DensityProvider::slice(double t) const {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = slices_.find(t);
        if (it != slices_.end()) return it->second;
    }
    double L = auto_half_width(t);
    std::shared_ptr<DensitySlice> s;
    while (true) {
        s = std::make_shared<DensitySlice>(build(t, L, auto_points(t, L)));
        // Wrap-around guard: the outer tenth of the grid must be negligible.
        double peak = 0.0, edge = 0.0;
        for (int k = 0; k < s->n; ++k) {
            peak = std::max(peak, s->g[k]);
            if (k < s->n / 20) edge = std::max(edge, s->g[k]);
        }
        if (edge <= 1e-12 * peak || L >= 1024.0) break;
        L *= 2.0;
    }
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = slices_.emplace(t, s);
    return it->second;
}

void DensityProvider::clear() const {
    std::lock_guard<std::mutex> lock(mu_);
    slices_.clear();
}

DensityTable compute_density(const DensityProvider& provider, const std::vector<double>& times, double L, int n) {
    if (times.empty()) throw std::invalid_argument("compute_density: no times");
    DensityTable tab;
    tab.tmodel = provider.model_ptr();
    tab.times = times;
    std::sort(tab.times.begin(), tab.times.end());
    tab.L = L > 0.0 ? L : provider.auto_half_width(tab.times.back());
    tab.n = n > 0 ? n : provider.auto_points(tab.times.front(), tab.L);
    tab.slices.resize(tab.times.size());
    for (std::size_t i = 0; i < tab.times.size(); ++i) tab.slices[i] = provider.build(tab.times[i], tab.L, tab.n);
    return tab;
}

EnvelopeParams make_envelope(const ConcentrationTable& ct, double epsilon, double tau, int dim, double alpha,
                             double beta) {
    EnvelopeParams e;
    e.epsilon = epsilon;
    e.tau = tau;
    e.dim = dim;
    e.alpha = alpha;
    e.beta = beta;
    const double expo = (dim + beta - 1.0) / alpha;
    e.c_eps = std::min(1.0 / ct.h_inv(1.0 / tau), tau * ct.h(epsilon) / epsilon) * std::exp(epsilon) /
              std::pow(tau, expo);
    return e;
}

double envelope_gstar(const ConcentrationTable& ct, double t, double x) {
    const double cap = 1.0 / ct.h_inv(1.0 / t);
    const double a = std::abs(x);
    if (a == 0.0) return cap;
    return std::min(cap, t * ct.h(a) / a);
}

double envelope_gtilde(const EnvelopeParams& env, const ConcentrationTable& ct, double t, double x) {
    const double a = std::abs(x);
    if (a < env.epsilon) return envelope_gstar(ct, t, a);
    return env.c_eps * std::pow(t, (env.dim + env.beta - 1.0) / env.alpha) * std::exp(-a);
}

EnvelopeReport check_envelope(const DensityTable& table, const EnvelopeParams& env, const ConcentrationTable& ct) {
    EnvelopeReport rep;
    for (const auto& s : table.slices) {
        const double hi = ct.h_inv(1.0 / s.t);
        double r0 = 0, r1 = 0, r2 = 0;
        for (int k = 0; k < s.n; ++k) {
            const double x = s.x_at(k);
            const double gt = envelope_gtilde(env, ct, s.t, x);
            if (!(gt > 1e-300)) continue;
            r0 = std::max(r0, s.g[k] / gt);
            r1 = std::max(r1, std::abs(s.g1[k]) * hi / gt);
            r2 = std::max(r2, std::abs(s.g2[k]) * hi * hi / gt);
        }
        rep.ratio_value.push_back(r0);
        rep.ratio_d1.push_back(r1);
        rep.ratio_d2.push_back(r2);
        rep.finite = rep.finite && std::isfinite(r0) && std::isfinite(r1) && std::isfinite(r2);
    }
    for (const auto* v : {&rep.ratio_value, &rep.ratio_d1, &rep.ratio_d2}) {
        const auto [mn, mx] = std::minmax_element(v->begin(), v->end());
        if (*mx > 3.0 * *mn) rep.stable = false;
    }
    return rep;
}

double chapman_kolmogorov_error(const DensityProvider& provider, double t, double s, double* sup_norm) {
    const double L = provider.auto_half_width(t + s);
    const int n = provider.auto_points(std::min(t, s), L);
    const DensitySlice a = provider.build(t, L, n), b = provider.build(s, L, n), c = provider.build(t + s, L, n);
    double* in = fftw_alloc_real(n);
    fftw_complex* fa = fftw_alloc_complex(n / 2 + 1);
    fftw_complex* fb = fftw_alloc_complex(n / 2 + 1);
    fftw_plan pa, pb, pinv;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        pa = fftw_plan_dft_r2c_1d(n, in, fa, FFTW_ESTIMATE);
        pb = fftw_plan_dft_r2c_1d(n, in, fb, FFTW_ESTIMATE);
        pinv = fftw_plan_dft_c2r_1d(n, fa, in, FFTW_ESTIMATE);
    }
    std::copy(a.g.begin(), a.g.end(), in);
    fftw_execute(pa);
    std::copy(b.g.begin(), b.g.end(), in);
    fftw_execute(pb);
    for (int m = 0; m <= n / 2; ++m) {
        const std::complex<double> z =
            std::complex<double>(fa[m][0], fa[m][1]) * std::complex<double>(fb[m][0], fb[m][1]);
        fa[m][0] = z.real();
        fa[m][1] = z.imag();
    }
    fftw_execute(pinv);
    double err = 0.0, sup = 0.0;
    for (int k = 0; k < n; ++k) {
        const double conv = in[(k + n / 2) % n] * a.dx / n;
        err = std::max(err, std::abs(conv - c.g[k]));
        sup = std::max(sup, c.g[k]);
    }
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(pa);
        fftw_destroy_plan(pb);
        fftw_destroy_plan(pinv);
    }
    fftw_free(in);
    fftw_free(fa);
    fftw_free(fb);
    if (sup_norm) *sup_norm = sup;
    return err;
}

double density_at_zero_quadrature(const TruncatedModel1D& tm, double t) {
    double total = 0.0;
    double a = 0.0, b = 1.0;
    while (true) {
        const QuadResult r =
            integrate([&](double xi) { return std::exp(-t * tm.psi_delta(xi)); }, a, b, 1e-12, 0.0, 12);
        total += r.value;
        if (std::exp(-t * tm.psi_delta(b)) < 1e-20) break;
        a = b;
        b *= 2.0;
    }
    return total / kPi;
}

double untruncated_cdf(const LevyModel1D& m, double t, double x) {
    if (x == 0.0) return 0.5;
    auto f = [&](double xi) {
        if (xi == 0.0) return x;
        return std::sin(xi * x) / xi * std::exp(-t * m.psi(xi));
    };
    double total = 0.0;
    double a = 0.0, b = std::min(1.0, 1.0 / std::abs(x));
    while (true) {
        total += integrate(f, a, b, 1e-12, 1e-14, 14).value;
        if (std::exp(-t * m.psi(b)) < 1e-18) break;
        a = b;
        b *= 2.0;
    }
    return 0.5 + total / kPi;
}

}  // namespace lf
