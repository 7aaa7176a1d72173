#include "levyfeller/parametrix.hpp"

#include "levyfeller/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lf {

double sigma_exponent(AssumptionMode mode, double alpha, double beta) {
    if (!(alpha > 0.0 && beta >= alpha && beta < 2.0)) throw std::invalid_argument("need 0 < alpha <= beta < 2");
    if (mode == AssumptionMode::Z1) return 1.0 - alpha / (3.0 * beta);
    if (!(alpha > 2.0 * beta / 3.0)) throw std::invalid_argument("mode Z2 requires alpha > (2/3) beta");
    return 2.0 * beta / (3.0 * alpha);
}

void check_mode(AssumptionMode mode, const std::vector<const LevyModel1D*>& models) {
    if (models.size() < 2) throw std::invalid_argument("at least two coordinates required");
    bool identical = true;
    double alpha = models[0]->alpha, beta = models[0]->beta;
    for (const auto* m : models) {
        identical = identical && m->family == models[0]->family && m->params == models[0]->params;
        alpha = std::min(alpha, m->alpha);
        beta = std::max(beta, m->beta);
    }
    if (mode == AssumptionMode::Z1 && !identical) throw std::invalid_argument("mode Z1 requires identical coordinate laws");
    if (mode == AssumptionMode::Z2) {
        if (identical) throw std::invalid_argument("mode Z2 requires coordinate laws that are not all identical");
        if (!(alpha > 2.0 * beta / 3.0)) throw std::invalid_argument("mode Z2 requires alpha > (2/3) beta");
    }
}

JumpRule make_jump_rule(const TruncatedModel1D& tm, double scale, double inner_fraction, int nodes) {
    static thread_local std::vector<Rule> cache(33);
    if (nodes < 2 || nodes > 32) throw std::invalid_argument("jump rule: nodes must lie in [2, 32]");
    if (cache[nodes].size() == 0) cache[nodes] = gauss_legendre(nodes, 0.0, 1.0);
    const Rule& gl = cache[nodes];
    const double d = tm.delta();
    const double b1 = std::min(d, 0.5 * scale);
    JumpRule r;
    r.zeta = inner_fraction * b1;
    r.inner_moment = small_second_moment(tm.base(), r.zeta);
    // First panel: w = b1 v^k flattens the w^{1 - alpha} behaviour of the integrand.
    const double k = 1.0 / (2.0 - tm.base().alpha);
    const double v0 = std::pow(r.zeta / b1, 1.0 / k);
    for (std::size_t i = 0; i < gl.size(); ++i) {
        const double v = v0 + (1.0 - v0) * gl.x[i];
        const double w = b1 * std::pow(v, k);
        const double jac = (1.0 - v0) * b1 * k * std::pow(v, k - 1.0);
        r.w.push_back(w);
        r.weight.push_back(gl.w[i] * jac * tm.mu(w));
    }
    auto uniform = [&](double a, double b, double max_width) {
        if (!(b > a)) return;
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / max_width - 1e-9)));
        const double h = (b - a) / n;
        for (int p = 0; p < n; ++p)
            for (std::size_t i = 0; i < gl.size(); ++i) {
                const double w = a + h * (p + gl.x[i]);
                r.w.push_back(w);
                r.weight.push_back(gl.w[i] * h * tm.mu(w));
            }
    };
    uniform(b1, d, 0.5 * scale);
    uniform(d, 2.0 * d, std::min(0.5 * d, 0.5 * scale));
    return r;
}

double apply_frozen_generator(const CoefficientField& field, const Vec& z, const Field& f, const Vec& x,
                              const std::vector<const TruncatedModel1D*>& tms, double scale,
                              const GeneratorOptions& opt) {
    const Mat Az = field(z);
    const double fx = f(x);
    double total = 0.0;
    for (int i = 0; i < field.dim; ++i) {
        const Vec a = Az.col(i);
        auto second_diff = [&](double w) { return f(x + a * w) + f(x - a * w) - 2.0 * fx; };
        auto eval = [&](double sc) {
            const JumpRule r = make_jump_rule(*tms[i], sc, opt.inner_fraction);
            double s = r.inner_moment * second_diff(r.zeta) / (r.zeta * r.zeta);
            for (std::size_t q = 0; q < r.w.size(); ++q) s += r.weight[q] * second_diff(r.w[q]);
            return s;
        };
        double sc = scale, prev = eval(sc);
        bool ok = false;
        for (int it = 0; it < 6; ++it) {
            sc *= 0.5;
            const double cur = eval(sc);
            const bool close = std::abs(cur - prev) <= opt.rtol * std::abs(cur) + 1e-14 * std::abs(fx) + 1e-300;
            prev = cur;
            if (close) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            std::ostringstream os;
            os << "frozen generator: jump quadrature on (0, " << 2.0 * tms[i]->delta() << "] for coordinate " << i
               << " not converged, estimate " << prev;
            throw DivergenceError(os.str());
        }
        total += prev;
    }
    return total;
}

int GradedAxis::stencil(double s, double* coef) const {
    if (s < breaks.front() || s > breaks.back()) return -1;
    auto it = std::upper_bound(breaks.begin(), breaks.end(), s);
    int panel = static_cast<int>(it - breaks.begin()) - 1;
    panel = std::clamp(panel, 0, static_cast<int>(breaks.size()) - 2);
    const int first = panel * per_panel;
    for (int m = 0; m < per_panel; ++m) {
        double c = 1.0;
        for (int l = 0; l < per_panel; ++l)
            if (l != m) c *= (s - x[first + l]) / (x[first + m] - x[first + l]);
        coef[m] = c;
    }
    return first;
}

GradedAxis make_graded_axis(double scale, double extent, const ParametrixOptions& opt) {
    GradedAxis ax;
    ax.per_panel = opt.panel_nodes;
    std::vector<double> pos;
    double b = opt.core * scale;
    pos.push_back(b);
    while (b < extent) {
        b *= opt.growth;
        pos.push_back(std::min(b, std::max(extent, pos.back())));
        if (pos.back() >= extent) break;
    }
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) ax.breaks.push_back(-*it);
    ax.breaks.push_back(0.0);
    for (double p : pos) ax.breaks.push_back(p);
    const Rule gl = gauss_legendre(opt.panel_nodes, 0.0, 1.0);
    for (std::size_t p = 0; p + 1 < ax.breaks.size(); ++p) {
        const double a = ax.breaks[p], h = ax.breaks[p + 1] - a;
        for (std::size_t i = 0; i < gl.size(); ++i) {
            ax.x.push_back(a + h * gl.x[i]);
            ax.w.push_back(h * gl.w[i]);
        }
    }
    return ax;
}

std::size_t RowGrid::size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.x.size();
    return n;
}

Vec RowGrid::point(std::size_t k) const {
    const int d = static_cast<int>(axes.size());
    Vec xi(d);
    for (int j = d - 1; j >= 0; --j) {
        const std::size_t n = axes[j].x.size();
        xi[j] = axes[j].x[k % n];
        k /= n;
    }
    return centre + A * xi;
}

double RowGrid::weight(std::size_t k) const {
    const int d = static_cast<int>(axes.size());
    double w = detA;
    for (int j = d - 1; j >= 0; --j) {
        const std::size_t n = axes[j].x.size();
        w *= axes[j].w[k % n];
        k /= n;
    }
    return w;
}

double RowGrid::interpolate(const std::vector<double>& values, const Vec& y) const {
    const int d = static_cast<int>(axes.size());
    const Vec xi = B * (y - centre);
    std::array<int, kMaxDim> first{};
    std::array<std::array<double, 8>, kMaxDim> coef{};
    for (int j = 0; j < d; ++j) {
        first[j] = axes[j].stencil(xi[j], coef[j].data());
        if (first[j] < 0) return 0.0;
    }
    const int m = axes[0].per_panel;
    double total = 0.0;
    if (d == 2) {
        const std::size_t n1 = axes[1].x.size();
        for (int a = 0; a < m; ++a) {
            const double* row = values.data() + (first[0] + a) * n1 + first[1];
            double s = 0.0;
            for (int b = 0; b < m; ++b) s += coef[1][b] * row[b];
            total += coef[0][a] * s;
        }
        return total;
    }
    int count = 1;
    for (int j = 0; j < d; ++j) count *= m;
    for (int c = 0; c < count; ++c) {
        int rem = c;
        std::size_t idx = 0;
        double w = 1.0;
        std::array<int, kMaxDim> off{};
        for (int j = d - 1; j >= 0; --j) {
            off[j] = rem % m;
            rem /= m;
        }
        for (int j = 0; j < d; ++j) {
            idx = idx * axes[j].x.size() + static_cast<std::size_t>(first[j] + off[j]);
            w *= coef[j][off[j]];
        }
        total += w * values[idx];
    }
    return total;
}

double RowHistory::eval(double tau, const Vec& y) const {
    if (times.empty()) return 0.0;
    if (tau <= times.front()) {
        const double v = grids.front().interpolate(values.front(), y);
        return v * std::pow(tau / times.front(), small_time_exponent);
    }
    std::size_t k;
    if (tau >= times.back()) {
        if (times.size() == 1) return grids.back().interpolate(values.back(), y);
        k = times.size() - 2;
    } else {
        k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), tau) - times.begin()) - 1;
    }
    const double r0 = std::pow(times[k], time_power), r1 = std::pow(times[k + 1], time_power);
    const double th = (std::pow(tau, time_power) - r0) / (r1 - r0);
    const double a = grids[k].interpolate(values[k], y);
    const double b = grids[k + 1].interpolate(values[k + 1], y);
    return (1.0 - th) * a + th * b;
}

double RowHistory::l1(std::size_t level) const {
    double s = 0.0;
    for (std::size_t k = 0; k < values[level].size(); ++k) s += grids[level].weight(k) * std::abs(values[level][k]);
    return s;
}

double RowHistory::integral(std::size_t level) const {
    double s = 0.0;
    for (std::size_t k = 0; k < values[level].size(); ++k) s += grids[level].weight(k) * values[level][k];
    return s;
}

/// mu(w) on (0, 2 delta] through the smooth profile mu(w) w^{1 + alpha}, tabulated on a
/// uniform grid; the first few cells fall back to direct evaluation.
class MuTable {
public:
    MuTable(const TruncatedModel1D& tm, int n = 1 << 16)
        : tm_(&tm), power_(1.0 + tm.base().alpha), h_(2.0 * tm.delta() / n), r_(n + 1) {
        for (int k = 1; k <= n; ++k) {
            const double w = k * h_;
            r_[k] = tm.mu(w) * std::pow(w, power_);
        }
    }
    double operator()(double w) const {
        const double u = w / h_;
        if (u < 64.0) return tm_->mu(w);
        const std::size_t k = static_cast<std::size_t>(u);
        if (k + 1 >= r_.size()) return w >= 2.0 * tm_->delta() ? 0.0 : tm_->mu(w);
        const double f = u - k;
        return ((1.0 - f) * r_[k] + f * r_[k + 1]) / std::pow(w, power_);
    }

private:
    const TruncatedModel1D* tm_;
    double power_, h_;
    std::vector<double> r_;
};

/// Per-time tables: density slices and the fixed part of the jump-size rules.
struct TimeData {
    struct Coord {
        double delta = 0.0, zeta = 0.0, inner_moment = 0.0;
        std::vector<double> w, weight;  ///< substituted first panel [zeta, b1]
        std::vector<double> breaks;     ///< geometric panels from b1 to 2 delta
        std::vector<std::vector<double>> pw, pweight;
        const TruncatedModel1D* tm = nullptr;
        const MuTable* mu = nullptr;
    };
    Slices s;
    std::array<double, kMaxDim> scale{}, support{};
    std::array<Coord, kMaxDim> c;
};

namespace {

const Rule& unit_gauss(int n) {
    static const std::vector<Rule> rules = [] {
        std::vector<Rule> r(33);
        for (int k = 1; k <= 32; ++k) r[k] = gauss_legendre(k, 0.0, 1.0);
        return r;
    }();
    return rules.at(n);
}

double support_radius(const DensitySlice& s, double tail) {
    const double peak = s.g[s.n / 2];
    for (int k = s.n - 1; k > s.n / 2; --k)
        if (s.g[k] >= tail * peak) return s.x_at(k) + s.dx;
    return s.dx;
}

struct ProductEval {
    int d;
    std::array<double, kMaxDim> u{}, g{}, g1{}, g2{};
    ProductEval(const Slices& s, const Vec& uu) : d(static_cast<int>(uu.size())) {
        for (int j = 0; j < d; ++j) {
            u[j] = uu[j];
            g[j] = s[j].value(u[j]);
            g1[j] = s[j].deriv(u[j]);
            g2[j] = s[j].second(u[j]);
        }
    }
    double product() const {
        double p = 1.0;
        for (int j = 0; j < d; ++j) p *= g[j];
        return p;
    }
    /// (c . grad)^2 of prod_j g_j at u.
    double directional2(const double* c) const {
        double total = 0.0;
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                double term = c[j] * c[k];
                if (term == 0.0) continue;
                for (int m = 0; m < d; ++m) {
                    if (j == k && m == j)
                        term *= g2[m];
                    else if (m == j || m == k)
                        term *= g1[m];
                    else
                        term *= g[m];
                }
                total += term;
            }
        return total;
    }
};

struct Spike {
    double at, width;
};

/// Outer jump-size integral on [zeta, 2 delta] of f against mu, with panels
/// refined around the points where a factor of the integrand peaks.
template <class F>
double jump_integral(const TimeData::Coord& co, const Spike* spikes, int ns, int nodes, F&& f) {
    double acc = 0.0;
    for (std::size_t q = 0; q < co.w.size(); ++q) acc += co.weight[q] * f(co.w[q]);
    const Rule& gl = unit_gauss(nodes);
    std::vector<double> sub;
    for (std::size_t p = 0; p + 1 < co.breaks.size(); ++p) {
        const double a = co.breaks[p], b = co.breaks[p + 1], len = b - a;
        sub.clear();
        for (int k = 0; k < ns; ++k) {
            const Spike& sp = spikes[k];
            if (sp.width * 4.0 >= len || sp.at + 8.0 * sp.width <= a || sp.at - 8.0 * sp.width >= b) continue;
            if (sp.at > a && sp.at < b) sub.push_back(sp.at);
            for (double h = 0.5 * sp.width; h < len; h *= 2.0) {
                if (sp.at - h > a && sp.at - h < b) sub.push_back(sp.at - h);
                if (sp.at + h > a && sp.at + h < b) sub.push_back(sp.at + h);
            }
        }
        if (sub.empty()) {
            const auto& w = co.pw[p];
            const auto& wt = co.pweight[p];
            for (std::size_t q = 0; q < w.size(); ++q) acc += wt[q] * f(w[q]);
            continue;
        }
        sub.push_back(a);
        sub.push_back(b);
        std::sort(sub.begin(), sub.end());
        for (std::size_t k = 0; k + 1 < sub.size(); ++k) {
            const double lo = sub[k], h = sub[k + 1] - lo;
            if (h <= 1e-12 * len) continue;
            for (std::size_t i = 0; i < gl.size(); ++i) {
                const double w = lo + h * gl.x[i];
                acc += gl.w[i] * h * (*co.mu)(w) * f(w);
            }
        }
    }
    return acc;
}

/// Peaks of w -> prod_j g_j(u_j +- c_j w): factor j peaks at |u_j / c_j|. Peaks where
/// the remaining factors are negligible need no refinement.
void add_spikes(const TimeData& td, const ProductEval& pe, const double* c, Spike* out, int& ns) {
    for (int j = 0; j < pe.d; ++j) {
        if (std::abs(c[j]) <= 1e-12) continue;
        const double w = std::abs(pe.u[j] / c[j]);
        double best = 0.0;
        for (int sgn = -1; sgn <= 1; sgn += 2) {
            double r = 1.0;
            for (int k = 0; k < pe.d; ++k)
                if (k != j) r *= td.s[k].value(pe.u[k] + sgn * c[k] * w) / td.s[k].value(0.0);
            best = std::max(best, r);
        }
        if (best > 1e-7) out[ns++] = {w, td.scale[j] / std::abs(c[j])};
    }
}

double max_column_norm(const CoefficientField& f) {
    if (f.constant) return f(Vec::Zero(f.dim)).colwise().norm().maxCoeff();
    const LatticeSpec lat = default_validation_lattice(f.dim);
    double best = 0.0;
    Vec x(f.dim);
    long total = 1;
    for (int j = 0; j < f.dim; ++j) total *= lat.points_per_axis;
    for (long k = 0; k < total; ++k) {
        long r = k;
        for (int j = 0; j < f.dim; ++j) {
            x[j] = -lat.half_width + 2.0 * lat.half_width * (r % lat.points_per_axis) / (lat.points_per_axis - 1);
            r /= lat.points_per_axis;
        }
        best = std::max(best, f(x).colwise().norm().maxCoeff());
    }
    return best;
}

}  // namespace

Parametrix::Parametrix(std::shared_ptr<const FrozenKernel> kernel, AssumptionMode mode, ParametrixOptions opt)
    : kernel_(std::move(kernel)), mode_(mode), opt_(opt) {
    if (opt_.panel_nodes < 2 || opt_.panel_nodes > 8) throw std::invalid_argument("panel_nodes must lie in [2, 8]");
    if (opt_.jump_nodes < 2 || opt_.jump_nodes > 32) throw std::invalid_argument("jump_nodes must lie in [2, 32]");
    std::vector<const LevyModel1D*> models;
    double alpha = 2.0, beta = 0.0, delta = 0.0;
    for (int i = 0; i < kernel_->dim(); ++i) {
        models.push_back(&kernel_->tmodel(i).base());
        alpha = std::min(alpha, models.back()->alpha);
        beta = std::max(beta, models.back()->beta);
        delta = std::max(delta, kernel_->tmodel(i).delta());
    }
    check_mode(mode_, models);
    for (int i = 0; i < kernel_->dim(); ++i) mu_tables_.push_back(std::make_shared<const MuTable>(kernel_->tmodel(i)));
    sigma_ = sigma_exponent(mode_, alpha, beta);
    reach_ = 2.1 * delta * max_column_norm(kernel_->field());
}

std::shared_ptr<const TimeData> Parametrix::time_data(double t) const {
    {
        std::lock_guard<std::mutex> lock(cache_mu_);
        auto it = cache_.find(t);
        if (it != cache_.end()) return it->second;
    }
    auto td = std::make_shared<TimeData>();
    td->s = kernel_->slices(t);
    const int d = kernel_->dim();
    double scale_min = std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
        td->scale[j] = FrozenKernel::feature_scale(td->s, j);
        td->support[j] = support_radius(td->s[j], 1e-16);
        scale_min = std::min(scale_min, td->scale[j]);
    }
    const Rule& gl = unit_gauss(opt_.jump_nodes);
    for (int i = 0; i < d; ++i) {
        auto& co = td->c[i];
        co.tm = &kernel_->tmodel(i);
        co.mu = mu_tables_[i].get();
        co.delta = co.tm->delta();
        const double b1 = std::min(co.delta, 0.5 * scale_min);
        co.zeta = opt_.inner_fraction * b1;
        co.inner_moment = small_second_moment(co.tm->base(), co.zeta);
        // w = b1 v^k flattens the w^{1 - alpha} behaviour of the integrand near 0.
        const double k = 1.0 / (2.0 - co.tm->base().alpha);
        const double v0 = std::pow(co.zeta / b1, 1.0 / k);
        for (std::size_t q = 0; q < gl.size(); ++q) {
            const double v = v0 + (1.0 - v0) * gl.x[q];
            const double w = b1 * std::pow(v, k);
            co.w.push_back(w);
            co.weight.push_back(gl.w[q] * (1.0 - v0) * b1 * k * std::pow(v, k - 1.0) * co.tm->mu(w));
        }
        co.breaks.push_back(b1);
        while (co.breaks.back() < co.delta * (1.0 - 1e-12))
            co.breaks.push_back(std::min(co.delta, co.breaks.back() * opt_.jump_ratio));
        const int taper_panels = 2;
        for (int p = 1; p <= taper_panels; ++p) co.breaks.push_back(co.delta * (1.0 + static_cast<double>(p) / taper_panels));
        for (std::size_t p = 0; p + 1 < co.breaks.size(); ++p) {
            const double a = co.breaks[p], h = co.breaks[p + 1] - a;
            std::vector<double> w, wt;
            for (std::size_t q = 0; q < gl.size(); ++q) {
                w.push_back(a + h * gl.x[q]);
                wt.push_back(gl.w[q] * h * co.tm->mu(w.back()));
            }
            co.pw.push_back(std::move(w));
            co.pweight.push_back(std::move(wt));
        }
    }
    std::lock_guard<std::mutex> lock(cache_mu_);
    return cache_.emplace(t, std::move(td)).first->second;
}

double Parametrix::q0_fast(const TimeData& td, const Frozen& fx, const Frozen& fy, const Vec& x, const Vec& y) const {
    const int d = kernel_->dim();
    const Vec uv = fy.B * (x - y);
    const Mat C = fy.B * fx.A;
    // A single jump along column i moves u inside a thin neighbourhood of that direction.
    bool reachable = false;
    for (int i = 0; i < d && !reachable; ++i) {
        bool ok = true;
        for (int j = 0; j < d && ok; ++j)
            ok = std::abs(uv[j]) < td.support[j] + 2.0 * td.c[i].delta * std::max(std::abs(C(j, i)), j == i ? 1.0 : 0.0);
        reachable = ok;
    }
    if (!reachable) return 0.0;
    const ProductEval pe(td.s, uv);
    const Slices& s = td.s;
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
        std::array<double, kMaxDim> ci{}, ei{};
        std::array<Spike, 2 * kMaxDim> spikes{};
        int ns = 0;
        for (int j = 0; j < d; ++j) {
            ci[j] = C(j, i);
            ei[j] = j == i ? 1.0 : 0.0;
        }
        add_spikes(td, pe, ci.data(), spikes.data(), ns);
        add_spikes(td, pe, ei.data(), spikes.data(), ns);
        auto integrand = [&](double w) {
            double e = 0.0;
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                // prod a_j - prod c_j = sum_k (prod_{j<k} c_j)(a_k - c_k)(prod_{j>k} a_j)
                std::array<double, kMaxDim> a{}, c{};
                for (int j = 0; j < d; ++j) {
                    a[j] = s[j].value(pe.u[j] + sgn * ci[j] * w);
                    c[j] = j == i ? s[j].value(pe.u[j] + sgn * w) : pe.g[j];
                }
                double left = 1.0;
                for (int k = 0; k < d; ++k) {
                    double term = left * (a[k] - c[k]);
                    for (int j = k + 1; j < d; ++j) term *= a[j];
                    e += term;
                    left *= c[k];
                }
            }
            return e;
        };
        const auto& co = td.c[i];
        total += co.inner_moment * (pe.directional2(ci.data()) - pe.directional2(ei.data()));
        total += jump_integral(co, spikes.data(), ns, opt_.jump_nodes, integrand);
    }
    return fy.detB * total;
}

double Parametrix::q0(double t, const Vec& x, const Vec& y) const {
    const auto td = time_data(t);
    const auto& inv = kernel_->inverse();
    return q0_fast(*td, inv.at(x), inv.at(y), x, y);
}

double Parametrix::generator_on_kernel(double t, const Vec& z, const Vec& y, const Vec& v) const {
    const int d = kernel_->dim();
    const auto td = time_data(t);
    const Slices& s = td->s;
    const Frozen fy = kernel_->inverse().at(y);
    const Mat C = fy.B * kernel_->field()(z);
    const ProductEval pe(s, fy.B * v);
    const double p0 = pe.product();
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
        std::array<double, kMaxDim> ci{};
        std::array<Spike, kMaxDim> spikes{};
        int ns = 0;
        for (int j = 0; j < d; ++j) ci[j] = C(j, i);
        add_spikes(*td, pe, ci.data(), spikes.data(), ns);
        auto integrand = [&](double w) {
            double e = -2.0 * p0;
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                double p = 1.0;
                for (int j = 0; j < d; ++j) p *= s[j].value(pe.u[j] + sgn * ci[j] * w);
                e += p;
            }
            return e;
        };
        const auto& co = td->c[i];
        total += co.inner_moment * pe.directional2(ci.data());
        total += jump_integral(co, spikes.data(), ns, opt_.jump_nodes, integrand);
    }
    return fy.detB * total;
}

RowGrid Parametrix::make_grid(double t, const Vec& centre, const Frozen& f, double reach) const {
    const auto td = time_data(t);
    RowGrid g;
    g.centre = centre;
    g.A = f.A;
    g.B = f.B;
    g.detA = 1.0 / f.detB;
    for (int j = 0; j < kernel_->dim(); ++j) {
        const double sc = td->scale[j];
        const double ext = support_radius(td->s[j], opt_.tail) + reach * f.B.row(j).cwiseAbs().sum();
        g.axes.push_back(make_graded_axis(sc, std::max(ext, 2.0 * opt_.core * sc), opt_));
    }
    return g;
}

std::vector<double> Parametrix::level_times(double t_max, const std::vector<double>& extra) const {
    std::vector<double> ts;
    for (double t = 2.0 * opt_.t_floor; t < t_max * (1.0 - 1e-9); t *= opt_.level_ratio) ts.push_back(t);
    ts.push_back(t_max);
    for (double e : extra)
        if (e > 2.0 * opt_.t_floor && e < t_max) ts.push_back(e);
    std::sort(ts.begin(), ts.end());
    std::vector<double> out;
    for (double t : ts)
        if (out.empty() || t > out.back() * (1.0 + 1e-3)) out.push_back(t);
    return out;
}

/// One time node of int_0^tau ds int dw left(tau - s, w) q0(s, w, y). Nodes with
/// s <= tau/2 integrate on a grid around y, the others on a grid around x.
struct Parametrix::Node {
    double s_left = 0.0;
    double s_right = 0.0;
    double weight = 0.0;
    bool around_y = true;
    std::shared_ptr<const TimeData> left, right;
    RowGrid grid;
    std::vector<Vec> w;
    std::vector<Frozen> fw;
    std::vector<double> lv;
};

std::vector<Parametrix::Node> Parametrix::time_nodes(double tau) const {
    const double half = 0.5 * tau;
    const double m = 1.0 / (1.0 - sigma_);
    const double lower = std::min(opt_.t_floor, half);
    std::vector<std::pair<double, double>> rule{{lower, lower}};
    if (half > lower) {
        const Rule& gl = unit_gauss(opt_.time_nodes);
        for (std::size_t i = 0; i < gl.size(); ++i) {
            const double v = gl.x[i];
            rule.emplace_back(lower + (half - lower) * std::pow(v, m),
                              gl.w[i] * (half - lower) * m * std::pow(v, m - 1.0));
        }
    }
    std::vector<Node> nodes;
    for (int side = 0; side < 2; ++side)
        for (const auto& [s, wt] : rule) {
            Node n;
            n.around_y = side == 0;
            n.s_right = n.around_y ? s : tau - s;
            n.s_left = tau - n.s_right;
            n.weight = wt;
            n.left = time_data(n.s_left);
            n.right = time_data(n.s_right);
            nodes.push_back(std::move(n));
        }
    return nodes;
}

std::vector<double> Parametrix::convolve(double tau, const Vec& x, const Frozen& fx, const RowGrid& grid,
                                         const Left& left) const {
    const auto& inv = kernel_->inverse();
    std::vector<Node> nodes = time_nodes(tau);
    for (auto& n : nodes) {
        if (n.around_y) {
            n.grid = make_grid(n.s_right, x, fx, reach_);
            continue;
        }
        n.grid = make_grid(n.s_left, x, fx, reach_);
        const std::size_t m = n.grid.size();
        n.w.resize(m);
        n.fw.resize(m);
        n.lv.resize(m);
#pragma omp parallel for schedule(dynamic, 16) if (opt_.parallel)
        for (std::size_t k = 0; k < m; ++k) {
            n.w[k] = n.grid.point(k);
            n.fw[k] = inv.at(n.w[k]);
            n.lv[k] = n.grid.weight(k) * left(n, n.w[k], n.fw[k]);
        }
    }
    // Left-factor values below this fraction of the largest one are dropped.
    constexpr double kNegligible = 1e-10;
    for (auto& n : nodes) {
        if (n.around_y) continue;
        double mx = 0.0;
        for (double v : n.lv) mx = std::max(mx, std::abs(v));
        for (double& v : n.lv)
            if (std::abs(v) <= kNegligible * mx) v = 0.0;
    }
    std::vector<double> out(grid.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 1) if (opt_.parallel)
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Vec y = grid.point(k);
        const Frozen fy = inv.at(y);
        std::vector<Vec> ws;
        std::vector<Frozen> fws;
        std::vector<double> lw;
        double total = 0.0;
        for (const auto& n : nodes) {
            double sum = 0.0;
            if (n.around_y) {
                RowGrid g = n.grid;
                g.centre = y;
                g.A = fy.A;
                g.B = fy.B;
                g.detA = 1.0 / fy.detB;
                const std::size_t m = g.size();
                ws.resize(m);
                fws.resize(m);
                lw.resize(m);
                double mx = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    ws[j] = g.point(j);
                    fws[j] = inv.at(ws[j]);
                    lw[j] = g.weight(j) * left(n, ws[j], fws[j]);
                    mx = std::max(mx, std::abs(lw[j]));
                }
                for (std::size_t j = 0; j < m; ++j) {
                    if (std::abs(lw[j]) <= kNegligible * mx) continue;
                    sum += lw[j] * q0_fast(*n.right, fws[j], fy, ws[j], y);
                }
            } else {
                for (std::size_t m = 0; m < n.w.size(); ++m) {
                    if (n.lv[m] == 0.0) continue;
                    sum += n.lv[m] * q0_fast(*n.right, n.fw[m], fy, n.w[m], y);
                }
            }
            total += n.weight * sum;
        }
        out[k] = total;
    }
    return out;
}

RowHistory Parametrix::correction_row(const Vec& x, double t_max, const std::vector<double>& extra) const {
    const Frozen fx = kernel_->inverse().at(x);
    RowHistory hist;
    hist.small_time_exponent = 1.0 - sigma_;
    hist.time_power = 1.0 - sigma_;
    const Left left = [&](const Node& n, const Vec& w, const Frozen& fw) {
        return FrozenKernel::density(n.left->s, fw, x - w) + hist.eval(n.s_left, w);
    };
    for (double tau : level_times(t_max, extra)) {
        RowGrid grid = make_grid(tau, x, fx, reach_);
        std::vector<double> v = convolve(tau, x, fx, grid, left);
        hist.times.push_back(tau);
        hist.grids.push_back(std::move(grid));
        hist.values.push_back(std::move(v));
    }
    return hist;
}

std::vector<RowHistory> Parametrix::picard_rows(const Vec& x, double t_max, int n_max,
                                                const std::vector<double>& extra) const {
    const auto& inv = kernel_->inverse();
    const Frozen fx = inv.at(x);
    const auto levels = level_times(t_max, extra);
    std::vector<RowHistory> rows(n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
        rows[n].small_time_exponent = (n + 1) * (1.0 - sigma_) - 1.0;
        rows[n].time_power = 1.0 - sigma_;
    }
    for (double tau : levels) {
        RowGrid grid = make_grid(tau, x, fx, reach_);
        const auto td = time_data(tau);
        std::vector<double> v(grid.size());
#pragma omp parallel for schedule(dynamic, 16) if (opt_.parallel)
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const Vec y = grid.point(k);
            v[k] = q0_fast(*td, fx, inv.at(y), x, y);
        }
        rows[0].times.push_back(tau);
        rows[0].grids.push_back(grid);
        rows[0].values.push_back(std::move(v));
    }
    for (int n = 1; n <= n_max; ++n) {
        const RowHistory& prev = rows[n - 1];
        const Left left = [&](const Node& nd, const Vec& w, const Frozen& fw) {
            if (n == 1) return q0_fast(*nd.left, fx, fw, x, w);
            return prev.eval(nd.s_left, w);
        };
        for (double tau : levels) {
            RowGrid grid = make_grid(tau, x, fx, reach_);
            std::vector<double> v = convolve(tau, x, fx, grid, left);
            rows[n].times.push_back(tau);
            rows[n].grids.push_back(std::move(grid));
            rows[n].values.push_back(std::move(v));
        }
    }
    return rows;
}

namespace {

std::size_t level_index(const RowHistory& h, double t) {
    for (std::size_t k = 0; k < h.times.size(); ++k)
        if (std::abs(h.times[k] - t) <= 1e-9 * t) return k;
    std::ostringstream os;
    os << "row history has no level at t=" << t;
    throw std::out_of_range(os.str());
}

}  // namespace

PicardReport Parametrix::picard_report(const std::vector<RowHistory>& rows, double t, double rtol) const {
    PicardReport r;
    r.t = t;
    double sum = 0.0;
    for (const auto& row : rows) {
        const double l1 = row.l1(level_index(row, t));
        if (!r.l1.empty()) r.ratios.push_back(r.l1.back() > 0.0 ? l1 / r.l1.back() : 0.0);
        r.l1.push_back(l1);
        if (!r.converged && !r.l1.empty() && r.l1.size() > 1 && l1 <= rtol * sum) {
            r.converged = true;
            r.n_terms = static_cast<int>(r.l1.size()) - 1;
        }
        sum += l1;
    }
    if (!r.converged) r.n_terms = static_cast<int>(rows.size());
    return r;
}

double Parametrix::u(const RowHistory& corr, double t, const Vec& x, const Vec& y) const {
    return kernel_->density(t, x - y, y) + corr.eval(t, y);
}

double Parametrix::frozen_mass(double t, const Vec& x) const {
    ParametrixOptions fine = opt_;
    fine.panel_nodes = 8;
    fine.growth = 1.5;
    fine.tail = 1e-14;
    const auto td = time_data(t);
    const auto& inv = kernel_->inverse();
    const Frozen fx = inv.at(x);
    // The y-frozen matrix differs from A(x) by at most the Lipschitz drift over the support.
    double reach = 0.0;
    for (int j = 0; j < kernel_->dim(); ++j) reach = std::max(reach, td->support[j]);
    RowGrid g;
    g.centre = x;
    g.A = fx.A;
    g.B = fx.B;
    g.detA = 1.0 / fx.detB;
    for (int j = 0; j < kernel_->dim(); ++j) {
        const double ext = support_radius(td->s[j], fine.tail) * 1.25 + 0.1 * reach;
        g.axes.push_back(make_graded_axis(td->scale[j], ext, fine));
    }
    double total = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec y = g.point(k);
        total += g.weight(k) * FrozenKernel::density(td->s, inv.at(y), x - y);
    }
    return total;
}

double Parametrix::q0_l1(double t, const Vec& x) const {
    const auto& inv = kernel_->inverse();
    const Frozen fx = inv.at(x);
    const RowGrid g = make_grid(t, x, fx, reach_);
    const auto td = time_data(t);
    double total = 0.0;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : total) if (opt_.parallel)
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec y = g.point(k);
        total += g.weight(k) * std::abs(q0_fast(*td, fx, inv.at(y), x, y));
    }
    return total;
}

URowReport Parametrix::u_report(const RowHistory& corr, const Vec& x, const std::vector<double>& times) const {
    URowReport r;
    const auto& inv = kernel_->inverse();
    for (double t : times) {
        const std::size_t k = level_index(corr, t);
        const auto td = time_data(t);
        const RowGrid& g = corr.grids[k];
        double mn = std::numeric_limits<double>::infinity(), mc = 0.0;
        for (std::size_t m = 0; m < g.size(); ++m) {
            const Vec y = g.point(m);
            const double c = corr.values[k][m];
            mn = std::min(mn, FrozenKernel::density(td->s, inv.at(y), x - y) + c);
            mc = std::max(mc, std::abs(c));
        }
        const double fm = frozen_mass(t, x);
        r.times.push_back(t);
        r.frozen_mass.push_back(fm);
        r.mass.push_back(fm + corr.integral(k));
        r.min_value.push_back(mn);
        r.max_abs_correction.push_back(mc);
    }
    return r;
}

}  // namespace lf
