#include "levyfeller/montecarlo.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lf {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t step)
    : key_(mix64(mix64(mix64(seed) ^ path) ^ (step * 0xd1b54a32d192ed03ULL))) {}

CounterRng::result_type CounterRng::operator()() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++ctr_); }

double CounterRng::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

IncrementSampler::IncrementSampler(const LevyModel1D& m, double rho, SmallJumpPolicy policy)
    : alpha_(m.alpha), rho_(rho), policy_(policy) {
    if (m.family == "stable") {
        stable_ = true;
        return;
    }
    if (!(rho > 0.0)) throw std::invalid_argument("compound-Poisson cut must be positive");
    if (m.family == "custom" && !m.nu_pos) throw std::invalid_argument("unsupported model family for simulation");
    var_ = 2.0 * small_second_moment(m, rho);
    const double t0 = tail_mass(m, rho);
    rate_ = 2.0 * t0;
    if (t0 <= 0.0) return;
    const double top = std::isfinite(m.support) ? m.support : rho * 1e6;
    const int n = 2048;
    for (int k = 0; k < n; ++k) {
        const double r = rho * std::pow(top / rho, static_cast<double>(k) / (n - 1));
        const double tail = k == n - 1 && std::isfinite(m.support) ? 0.0 : tail_mass(m, r);
        log_r_.push_back(std::log(r));
        log_tail_.push_back(tail > 0.0 ? std::log(tail / t0) : -INFINITY);
    }
}

double IncrementSampler::jump_size(CounterRng& rng) const {
    // Solve tail(r) = u * tail(rho) on the table, then attach a random sign.
    const double lu = std::log(rng.uniform());
    const double sign = (rng() >> 63) ? 1.0 : -1.0;
    auto it = std::lower_bound(log_tail_.begin(), log_tail_.end(), lu, [](double a, double b) { return a > b; });
    const std::size_t k = static_cast<std::size_t>(it - log_tail_.begin());
    double lr;
    if (k == 0) {
        lr = log_r_.front();
    } else if (k >= log_tail_.size()) {
        // Power-law continuation beyond the table.
        lr = log_r_.back() + (log_tail_.back() - lu) / alpha_;
    } else if (!std::isfinite(log_tail_[k])) {
        // Last cell before a finite support: invert the tail as linear in r.
        const double a = log_tail_[k - 1];
        const double r0 = std::exp(log_r_[k - 1]), r1 = std::exp(log_r_[k]);
        const double frac = 1.0 - std::exp(lu - a);
        lr = std::log(r0 + frac * (r1 - r0));
    } else {
        const double a = log_tail_[k - 1], b = log_tail_[k];
        const double s = (lu - a) / (b - a);
        lr = log_r_[k - 1] + s * (log_r_[k] - log_r_[k - 1]);
    }
    return sign * std::exp(lr);
}

double IncrementSampler::sample(double dt, CounterRng& rng) const {
    if (stable_) {
        // Chambers-Mallows-Stuck, symmetric case, E exp(i xi X) = exp(-|xi|^alpha).
        const double V = std::numbers::pi * (rng.uniform() - 0.5);
        boost::random::exponential_distribution<double> ex(1.0);
        const double W = ex(rng);
        double X;
        if (std::abs(alpha_ - 1.0) < 1e-12)
            X = std::tan(V);
        else
            X = std::sin(alpha_ * V) / std::pow(std::cos(V), 1.0 / alpha_) *
                std::pow(std::cos((1.0 - alpha_) * V) / W, (1.0 - alpha_) / alpha_);
        return std::pow(dt, 1.0 / alpha_) * X;
    }
    double z = 0.0;
    if (policy_ == SmallJumpPolicy::GaussianSurrogate && var_ > 0.0) {
        boost::random::normal_distribution<double> nd(0.0, std::sqrt(var_ * dt));
        z += nd(rng);
    }
    if (rate_ > 0.0) {
        boost::random::poisson_distribution<int, double> pd(rate_ * dt);
        const int n = pd(rng);
        for (int j = 0; j < n; ++j) z += jump_size(rng);
    }
    return z;
}

EulerSimulator::EulerSimulator(CoefficientField field, std::vector<std::shared_ptr<const LevyModel1D>> models,
                               SimConfig cfg, double delta)
    : field_(std::move(field)), models_(std::move(models)), cfg_(cfg) {
    if (cfg_.n_paths < 1 || cfg_.n_steps < 1) throw std::invalid_argument("n_paths and n_steps must be >= 1");
    if (static_cast<int>(models_.size()) != field_.dim) throw std::invalid_argument("one model per coordinate");
    rho_ = cfg_.rho > 0.0 ? cfg_.rho : 0.25 * delta;
    for (const auto& m : models_) {
        if (rho_ >= m->eta4) throw std::invalid_argument("compound-Poisson cut must lie below eta4");
        samplers_.emplace_back(*m, rho_, cfg_.policy);
    }
}

Vec EulerSimulator::euler_path(const Vec& x0, double t, std::uint64_t path) const {
    const int d = field_.dim;
    const double dt = t / cfg_.n_steps;
    Vec x = x0, dz(d);
    for (int k = 0; k < cfg_.n_steps; ++k) {
        CounterRng rng(cfg_.seed, path, static_cast<std::uint64_t>(k));
        for (int i = 0; i < d; ++i) dz[i] = samplers_[i].sample(dt, rng);
        x += field_.constant ? Mat(field_.A(x0)) * dz : Mat(field_.A(x)) * dz;
    }
    return x;
}

std::vector<Vec> EulerSimulator::endpoints(const Vec& x0, double t) const {
    const std::int64_t n = static_cast<std::int64_t>(cfg_.n_paths);
    std::vector<Vec> out(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < n; ++p) out[p] = euler_path(x0, t, static_cast<std::uint64_t>(p));
    return out;
}

double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += v[k];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

MCEstimate EulerSimulator::estimate_Ptf(const Vec& x0, const std::function<double(const Vec&)>& f, double t) const {
    const auto start = std::chrono::steady_clock::now();
    const std::int64_t n = static_cast<std::int64_t>(cfg_.n_paths);
    std::vector<double> val(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < n; ++p) val[p] = f(euler_path(x0, t, static_cast<std::uint64_t>(p)));
    MCEstimate est;
    est.n_paths = cfg_.n_paths;
    est.mean = pairwise_sum(val.data(), val.size()) / n;
    for (double& v : val) v = (v - est.mean) * (v - est.mean);
    const double var = n > 1 ? pairwise_sum(val.data(), val.size()) / (n - 1) : 0.0;
    est.stderr_ = std::sqrt(var / n);
    est.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return est;
}

ZReport compare(double parametrix_value, const MCEstimate& mc, double model_tol) {
    ZReport r;
    r.diff = parametrix_value - mc.mean;
    const double scale = mc.stderr_ + model_tol;
    if (scale == 0.0) {
        r.z = r.diff == 0.0 ? 0.0 : INFINITY;
    } else {
        r.z = r.diff / scale;
    }
    r.pass = std::abs(r.z) <= 3.0;
    return r;
}

ChiSquareReport chi_square_vs_cdf(const std::vector<double>& samples, const std::function<double(double)>& cdf,
                                  double lo, double hi, int bins) {
    if (bins < 2 || !(hi > lo)) throw std::invalid_argument("chi-square: need at least two bins on a proper range");
    std::vector<double> edges;
    edges.push_back(-INFINITY);
    for (int b = 0; b <= bins; ++b) edges.push_back(lo + (hi - lo) * b / bins);
    edges.push_back(INFINITY);
    const std::size_t nb = edges.size() - 1;
    std::vector<double> count(nb, 0.0);
    for (double s : samples) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), s);
        const std::size_t k = std::min<std::size_t>(nb - 1, static_cast<std::size_t>(it - edges.begin()) - 1);
        count[k] += 1.0;
    }
    ChiSquareReport rep;
    const double n = static_cast<double>(samples.size());
    int used = 0;
    for (std::size_t k = 0; k < nb; ++k) {
        const double a = std::isfinite(edges[k]) ? cdf(edges[k]) : 0.0;
        const double b = std::isfinite(edges[k + 1]) ? cdf(edges[k + 1]) : 1.0;
        const double expect = n * (b - a);
        if (expect < 5.0) continue;
        rep.statistic += (count[k] - expect) * (count[k] - expect) / expect;
        ++used;
    }
    rep.dof = std::max(1, used - 1);
    boost::math::chi_squared dist(rep.dof);
    rep.critical = boost::math::quantile(dist, 0.99);
    rep.p_value = boost::math::cdf(boost::math::complement(dist, rep.statistic));
    rep.pass = rep.statistic <= rep.critical;
    return rep;
}

}  // namespace lf
