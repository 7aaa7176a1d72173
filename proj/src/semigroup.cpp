#include "levyfeller/semigroup.hpp"

#include "levyfeller/quadrature.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace lf {

namespace {

double window(const Vec& x, double radius) {
    const double r = x.norm();
    return 0.25 * (1.0 - std::tanh((r - radius) / 0.25)) * (1.0 - std::tanh((-r - radius) / 0.25));
}

}  // namespace

TestFunction constant_function(double c) {
    TestFunction t;
    t.name = "constant";
    t.f = [c](const Vec&) { return c; };
    t.sup_norm = std::abs(c);
    t.far = c;
    t.scale = 1.0;
    t.smoothness = Smoothness::C02;
    return t;
}

TestFunction gauss_bump(const Vec& centre, double width, double height) {
    TestFunction t;
    t.name = "gauss_bump";
    const double s2 = 2.0 * width * width;
    t.f = [centre, s2, height](const Vec& x) { return height * std::exp(-(x - centre).squaredNorm() / s2); };
    t.sup_norm = std::abs(height);
    t.l1_norm = std::abs(height) * std::pow(std::numbers::pi * s2, 0.5 * centre.size());
    t.scale = width;
    t.smoothness = Smoothness::C02;
    return t;
}

TestFunction unit_mass_bump(const Vec& centre, double width) {
    const double h = 1.0 / std::pow(2.0 * std::numbers::pi * width * width, 0.5 * centre.size());
    TestFunction t = gauss_bump(centre, width, h);
    t.name = "unit_mass_bump";
    t.l1_norm = 1.0;
    return t;
}

TestFunction tanh_step(int dim, double width, double radius) {
    TestFunction t;
    t.name = "tanh_step";
    t.f = [width, radius](const Vec& x) { return 0.5 * (1.0 + std::tanh(x[0] / width)) * window(x, radius); };
    t.sup_norm = 1.0;
    t.scale = width;
    t.smoothness = Smoothness::C02;
    (void)dim;
    return t;
}

TestFunction indicator_box(const Vec& centre, double half) {
    TestFunction t;
    t.name = "indicator_box";
    t.f = [centre, half](const Vec& x) { return ((x - centre).cwiseAbs().maxCoeff() <= half) ? 1.0 : 0.0; };
    t.sup_norm = 1.0;
    t.l1_norm = std::pow(2.0 * half, centre.size());
    t.scale = half;
    t.smoothness = Smoothness::Indicator;
    return t;
}

TestFunction coordinate_sine(int dim, int coordinate, double k, double radius) {
    if (coordinate < 0 || coordinate >= dim) throw std::invalid_argument("coordinate_sine: coordinate out of range");
    TestFunction t;
    t.name = "coordinate_sine";
    t.f = [coordinate, k, radius](const Vec& x) { return std::sin(k * x[coordinate]) * window(x, radius); };
    t.sup_norm = 1.0;
    t.scale = 1.0 / std::abs(k);
    t.smoothness = Smoothness::C02;
    return t;
}

TestFunction make_test_function(const std::string& name, int dim, const std::map<std::string, double>& p) {
    auto get = [&](const char* key, double def) {
        auto it = p.find(key);
        return it == p.end() ? def : it->second;
    };
    Vec c = Vec::Zero(dim);
    for (int i = 0; i < dim; ++i) c[i] = get(("c" + std::to_string(i + 1)).c_str(), 0.0);
    if (name == "gauss_bump") return gauss_bump(c, get("width", 0.25), get("height", 1.0));
    if (name == "unit_mass_bump") return unit_mass_bump(c, get("width", 0.1));
    if (name == "tanh_step") return tanh_step(dim, get("width", 0.1), get("window", 2.5));
    if (name == "indicator_box") return indicator_box(c, get("half", 0.25));
    if (name == "coordinate_sine")
        return coordinate_sine(dim, static_cast<int>(get("coordinate", 0)), get("k", 2.0), get("window", 2.5));
    if (name == "constant") return constant_function(get("value", 1.0));
    throw std::invalid_argument("unknown test function '" + name + "'");
}

LatticeSemigroup::LatticeSemigroup(std::shared_ptr<const FrozenKernel> kernel, SemigroupOptions opt)
    : kernel_(std::move(kernel)), opt_(opt) {
    if (!(opt_.step > 0.0)) throw std::invalid_argument("semigroup step must be positive");
    if (opt_.frozen_nodes < 2 || opt_.jump_nodes < 2) throw std::invalid_argument("semigroup node counts must be >= 2");
    const int d = kernel_->dim();
    lat_ = Lattice::make(d, opt_.half_width, opt_.spacing);

    // Short-step densities reduced to Gauss rules for their measures.
    const double h2 = 0.5 * opt_.step;
    const Slices s = kernel_->slices(h2);
    for (int i = 0; i < d; ++i) {
        const DensitySlice& g = s[i];
        double gmax = 0.0;
        for (double v : g.g) gmax = std::max(gmax, v);
        std::vector<double> pts, mass;
        for (int k = 0; k < g.n; ++k)
            if (g.g[k] > 1e-16 * gmax) {
                pts.push_back(g.x_at(k));
                mass.push_back(g.g[k] * g.dx);
            }
        Rule r = gauss_for_measure(pts, mass, opt_.frozen_nodes);
        double sum = 0.0;
        for (double w : r.w) sum += w;
        for (double& w : r.w) w /= sum;
        frozen_rules_.push_back(std::move(r));
    }

    // Long-jump rules: nodes on (delta, W] weighted by nu - mu.
    const auto& fld = kernel_->field();
    const double min_col = fld.eta2 / std::pow(std::sqrt(double(d)) * fld.eta1, d - 1);
    const double exit_radius = 2.0 * std::sqrt(double(d)) * opt_.half_width / min_col;
    for (int i = 0; i < d; ++i) {
        const TruncatedModel1D& tm = kernel_->tmodel(i);
        const double rate = tm.mass_defect();
        coord_rate_.push_back(rate);
        lambda0_ += rate;
        const double delta = tm.delta();
        const double W = std::min(tm.base().support, exit_radius);
        Rule rule;
        if (rate > 0.0 && W > delta) {
            std::vector<double> br{delta, std::min(2.0 * delta, W)};
            while (br.back() < W) {
                const double width = std::min(br.back(), opt_.jump_panel);
                br.push_back(std::min(W, br.back() + width));
            }
            for (std::size_t p = 0; p + 1 < br.size(); ++p) {
                const int n = p == 0 ? 2 * opt_.jump_nodes : opt_.jump_nodes;
                const Rule gl = gauss_legendre(n, br[p], br[p + 1]);
                for (std::size_t q = 0; q < gl.size(); ++q) {
                    rule.x.push_back(gl.x[q]);
                    rule.w.push_back(gl.w[q] * tm.gap(gl.x[q]));
                }
            }
        }
        const double beyond = W < tm.base().support ? tm.gap_mass_above(W) : 0.0;
        double sum = 0.0;
        for (double w : rule.w) sum += w;
        // Both signs share the rule; scale so the total is the exact coordinate rate.
        const double target = 0.5 * (rate - beyond);
        if (sum > 0.0)
            for (double& w : rule.w) w *= target / sum;
        jump_rules_.push_back(std::move(rule));
        jump_far_.push_back(beyond);
    }

    const double lh = lambda0_ * opt_.step;
    double term = std::exp(-lh), acc = 0.0;
    for (int n = 0; n < 200; ++n) {
        if (1.0 - acc - term <= opt_.poisson_tol) {
            poisson_.push_back(1.0 - acc);
            break;
        }
        poisson_.push_back(term);
        acc += term;
        term *= lh / (n + 1);
    }
    build_frozen();
    build_jump();
}

void LatticeSemigroup::frozen_row_into(const Vec& x, RowBuilder& rb, Stencil& st) const {
    const int d = lat_.dim;
    const Mat A = kernel_->field()(x);
    int total = 1;
    std::vector<int> sizes(d);
    for (int i = 0; i < d; ++i) {
        sizes[i] = static_cast<int>(frozen_rules_[i].size());
        total *= sizes[i];
    }
    Vec y(d);
    for (int m = 0; m < total; ++m) {
        int r = m;
        double w = 1.0;
        y = x;
        for (int i = d - 1; i >= 0; --i) {
            const int q = r % sizes[i];
            r /= sizes[i];
            w *= frozen_rules_[i].w[q];
            y += A.col(i) * frozen_rules_[i].x[q];
        }
        interpolation_stencil(lat_, y, st);
        rb.add(st, w);
    }
}

namespace {

template <class RowFn>
SparseOperator build_rows(std::size_t n, RowFn&& row) {
    const int nt = omp_get_max_threads();
    const std::size_t chunk = 256;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<SparseOperator> parts(n_chunks);
#pragma omp parallel num_threads(nt)
    {
        RowBuilder rb(n);
        Stencil st;
#pragma omp for schedule(dynamic, 1)
        for (std::int64_t c = 0; c < static_cast<std::int64_t>(n_chunks); ++c) {
            const std::size_t lo = c * chunk, hi = std::min(n, lo + chunk);
            for (std::size_t k = lo; k < hi; ++k) {
                row(k, rb, st);
                rb.flush(parts[c]);
            }
        }
    }
    return concatenate(parts);
}

}  // namespace

void LatticeSemigroup::build_frozen() {
    frozen_ = build_rows(lat_.size(), [&](std::size_t k, RowBuilder& rb, Stencil& st) {
        frozen_row_into(lat_.point(k), rb, st);
    });
}

void LatticeSemigroup::build_jump() {
    if (lambda0_ <= 0.0) return;
    const int d = lat_.dim;
    jump_ = build_rows(lat_.size(), [&](std::size_t k, RowBuilder& rb, Stencil& st) {
        const Vec x = lat_.point(k);
        const Mat A = kernel_->field()(x);
        for (int i = 0; i < d; ++i) {
            const Rule& r = jump_rules_[i];
            for (std::size_t q = 0; q < r.size(); ++q) {
                const double w = r.w[q] / lambda0_;
                interpolation_stencil(lat_, x + A.col(i) * r.x[q], st);
                rb.add(st, w);
                interpolation_stencil(lat_, x - A.col(i) * r.x[q], st);
                rb.add(st, w);
            }
            rb.add_far(jump_far_[i] / lambda0_);
        }
    });
}

double LatticeSemigroup::apply_N(const Field& f, const Vec& x) const {
    const Mat A = kernel_->field()(x);
    double total = 0.0;
    for (int i = 0; i < lat_.dim; ++i) {
        const TruncatedModel1D& tm = kernel_->tmodel(i);
        const Vec a = A.col(i);
        auto integrand = [&](double w) { return (f(x + a * w) + f(x - a * w)) * tm.gap(w); };
        const double delta = tm.delta();
        const double support = tm.base().support;
        const double top = std::min(support, 64.0 * delta);
        std::vector<double> br{delta, 2.0 * delta};
        while (br.back() < top) br.push_back(std::min(top, 2.0 * br.back()));
        auto check = [&](const QuadResult& q, double lo, double hi) {
            if (q.converged) return q.value;
            std::ostringstream os;
            os << "long-jump quadrature on [" << lo << ", " << hi << "] not converged, estimate " << q.value
               << " +- " << q.error;
            throw DivergenceError(os.str());
        };
        for (std::size_t p = 0; p + 1 < br.size(); ++p)
            total += check(integrate(integrand, br[p], br[p + 1], 1e-10, 1e-12), br[p], br[p + 1]);
        if (top < support) {
            if (std::isfinite(support))
                total += check(integrate(integrand, top, support, 1e-10, 1e-12), top, support);
            else
                total += check(integrate_to_inf(integrand, top, 1e-10, 1e-12), top, INFINITY);
        }
    }
    return total;
}

double LatticeSemigroup::apply_R(const Field& f, const Vec& x) const { return apply_N(f, x) - lambda0_ * f(x); }

double LatticeSemigroup::apply_K(const Field& f, const Vec& x, double scale, double rtol) const {
    std::vector<const TruncatedModel1D*> tms;
    for (int i = 0; i < lat_.dim; ++i) tms.push_back(&kernel_->tmodel(i));
    GeneratorOptions go;
    go.rtol = rtol;
    return apply_frozen_generator(kernel_->field(), x, f, x, tms, scale, go) + apply_R(f, x);
}

void LatticeSemigroup::apply_N(const LatticeFunction& in, LatticeFunction& out) const {
    jump_.apply(in, out);
    for (double& v : out.v) v *= lambda0_;
    out.far *= lambda0_;
}

void LatticeSemigroup::long_jump_flow(const LatticeFunction& in, LatticeFunction& out, bool transpose) const {
    if (lambda0_ <= 0.0) {
        out = in;
        return;
    }
    LatticeFunction cur = in, next;
    out.v.assign(in.v.size(), 0.0);
    out.far = 0.0;
    for (std::size_t n = 0; n < poisson_.size(); ++n) {
        if (n > 0) {
            if (transpose)
                jump_.apply_transpose(cur, next);
            else
                jump_.apply(cur, next);
            std::swap(cur, next);
        }
        const double c = poisson_[n];
        for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] += c * cur.v[k];
        out.far += c * cur.far;
    }
}

void LatticeSemigroup::step(const LatticeFunction& in, LatticeFunction& out) const {
    LatticeFunction a, b;
    frozen_.apply(in, a);
    long_jump_flow(a, b);
    frozen_.apply(b, out);
}

void LatticeSemigroup::frozen_step(const LatticeFunction& in, LatticeFunction& out) const {
    LatticeFunction a;
    frozen_.apply(in, a);
    frozen_.apply(a, out);
}

int LatticeSemigroup::steps_for(double t) const {
    const double k = t / opt_.step;
    const long r = std::lround(k);
    if (t < 0.0 || std::abs(k - r) > 1e-9 * std::max(1.0, k)) {
        std::ostringstream os;
        os << "time " << t << " is not a multiple of the step " << opt_.step;
        throw std::invalid_argument(os.str());
    }
    return static_cast<int>(r);
}

std::vector<SemigroupState> LatticeSemigroup::march(const TestFunction& f, const std::vector<double>& times) const {
    return march(sample(lat_, f.f, f.far), times);
}

std::vector<SemigroupState> LatticeSemigroup::march(const LatticeFunction& f0, const std::vector<double>& times) const {
    std::vector<int> ks;
    for (double t : times) ks.push_back(steps_for(t));
    if (!std::is_sorted(ks.begin(), ks.end())) throw std::invalid_argument("march times must be ascending");
    std::vector<SemigroupState> out;
    LatticeFunction cur = f0, a, b;
    std::size_t next = 0;
    while (next < ks.size() && ks[next] == 0) {
        out.push_back({times[next], cur, cur});
        ++next;
    }
    for (int k = 1; next < ks.size(); ++k) {
        frozen_.apply(cur, a);
        long_jump_flow(a, b);
        frozen_.apply(b, cur);
        while (next < ks.size() && ks[next] == k) {
            out.push_back({times[next], cur, b});
            ++next;
        }
    }
    return out;
}

double LatticeSemigroup::frozen_row_apply(const Vec& x, const LatticeFunction& in) const {
    const int d = lat_.dim;
    const Mat A = kernel_->field()(x);
    Stencil st;
    double acc = 0.0;
    int total = 1;
    for (int i = 0; i < d; ++i) total *= static_cast<int>(frozen_rules_[i].size());
    Vec y(d);
    for (int m = 0; m < total; ++m) {
        int r = m;
        double w = 1.0;
        y = x;
        for (int i = d - 1; i >= 0; --i) {
            const int n = static_cast<int>(frozen_rules_[i].size());
            const int q = r % n;
            r /= n;
            w *= frozen_rules_[i].w[q];
            y += A.col(i) * frozen_rules_[i].x[q];
        }
        interpolation_stencil(lat_, y, st);
        double s = 0.0;
        for (std::size_t j = 0; j < st.w.size(); ++j) s += st.w[j] * (st.idx[j] >= 0 ? in.v[st.idx[j]] : in.far);
        acc += w * s;
    }
    return acc;
}

double LatticeSemigroup::value_at(const SemigroupState& s, const TestFunction& f, const Vec& x) const {
    if (s.t == 0.0) return f.f(x);
    return frozen_row_apply(x, s.before_last);
}

double LatticeSemigroup::T_apply(const TestFunction& f, double t, const Vec& x) const {
    return T_apply(f, t, std::vector<Vec>{x}).front();
}

std::vector<double> LatticeSemigroup::T_apply(const TestFunction& f, double t, const std::vector<Vec>& probes) const {
    const auto st = march(f, {t});
    std::vector<double> out;
    for (const auto& x : probes) out.push_back(value_at(st.front(), f, x));
    return out;
}

SemigroupResult LatticeSemigroup::psi_series(const TestFunction& f, double t, const std::vector<Vec>& probes,
                                             int n_max) const {
    const int K = steps_for(t);
    const double h = opt_.step;
    SemigroupResult res;
    res.lambda0 = lambda0_;
    std::vector<LatticeFunction> prev(K + 1);
    prev[0] = sample(lat_, f.f, f.far);
    for (int k = 1; k <= K; ++k) frozen_step(prev[k - 1], prev[k]);
    auto record = [&](const LatticeFunction& v) {
        std::vector<double> vals;
        double sup = 0.0;
        for (const auto& x : probes) {
            vals.push_back(interpolate(lat_, v, x));
            sup = std::max(sup, std::abs(vals.back()));
        }
        res.terms.push_back(vals);
        res.term_norms.push_back(sup);
    };
    record(prev[K]);
    const double damp = std::exp(-lambda0_ * t);
    const int cap = std::min(n_max, opt_.series_cap);
    res.n_terms = 1;
    for (int n = 1; n <= cap && K > 0; ++n) {
        std::vector<LatticeFunction> g(K + 1), cur(K + 1);
        for (int k = 0; k <= K; ++k) apply_N(prev[k], g[k]);
        cur[0].v.assign(lat_.size(), 0.0);
        cur[0].far = 0.0;
        LatticeFunction ug_prev, ug, uu, tmp;
        frozen_step(g[0], ug);
        frozen_step(cur[0], uu);
        cur[1] = uu;
        for (std::size_t j = 0; j < cur[1].v.size(); ++j) cur[1].v[j] += 0.5 * h * (ug.v[j] + g[1].v[j]);
        cur[1].far += 0.5 * h * (ug.far + g[1].far);
        for (int k = 1; k < K; ++k) {
            ug_prev = ug;
            frozen_step(g[k], ug);
            frozen_step(ug_prev, tmp);  // U_{2h} g_{k-1}
            frozen_step(cur[k], uu);
            cur[k + 1] = uu;
            for (std::size_t j = 0; j < uu.v.size(); ++j)
                cur[k + 1].v[j] += h / 12.0 * (5.0 * g[k + 1].v[j] + 8.0 * ug.v[j] - tmp.v[j]);
            cur[k + 1].far += h / 12.0 * (5.0 * g[k + 1].far + 8.0 * ug.far - tmp.far);
        }
        record(cur[K]);
        res.n_terms = n + 1;
        prev.swap(cur);
        if (damp * res.term_norms.back() < opt_.series_tol * std::max(f.sup_norm, 1e-300)) {
            res.converged = true;
            break;
        }
    }
    if (K == 0) res.converged = true;
    res.values.assign(probes.size(), 0.0);
    for (const auto& term : res.terms)
        for (std::size_t p = 0; p < probes.size(); ++p) res.values[p] += damp * term[p];
    return res;
}

LatticeFunction LatticeSemigroup::transition_density(double t, const Vec& x) const {
    const int K = steps_for(t);
    if (K == 0) throw std::invalid_argument("transition density needs t > 0");
    // Row of the final substep at x, as a measure on the lattice.
    RowBuilder rb(lat_.size());
    Stencil st;
    SparseOperator row;
    frozen_row_into(x, rb, st);
    rb.flush(row);
    LatticeFunction m, a;
    m.v.assign(lat_.size(), 0.0);
    for (std::int64_t p = row.row_ptr[0]; p < row.row_ptr[1]; ++p) m.v[row.col[p]] = row.val[p];
    m.far = row.far_weight[0];
    long_jump_flow(m, a, true);
    frozen_.apply_transpose(a, m);
    for (int k = 1; k < K; ++k) {
        frozen_.apply_transpose(m, a);
        long_jump_flow(a, m, true);
        frozen_.apply_transpose(m, a);
        std::swap(m, a);
    }
    const double vol = lat_.cell_volume();
    for (double& v : m.v) v /= vol;
    return m;
}

HolderReport LatticeSemigroup::holder_estimate(const TestFunction& f, const std::vector<double>& times,
                                               const std::vector<std::pair<Vec, Vec>>& pairs, double gamma) const {
    if (pairs.empty()) throw std::invalid_argument("holder estimate needs at least one pair");
    for (const auto& [x, y] : pairs)
        if ((x - y).norm() == 0.0) throw std::invalid_argument("holder estimate: degenerate pair");
    const auto& mdl = kernel_->tmodel(0).base();
    HolderReport rep;
    rep.target = -gamma / mdl.alpha;
    const auto states = march(f, times);
    for (const auto& s : states) {
        double worst = 0.0;
        for (const auto& [x, y] : pairs) {
            const double diff = std::abs(value_at(s, f, x) - value_at(s, f, y));
            worst = std::max(worst, diff / (std::pow((x - y).norm(), gamma) * f.sup_norm));
        }
        rep.times.push_back(s.t);
        rep.ratio.push_back(worst);
    }
    bool positive = true;
    for (double r : rep.ratio) positive = positive && r > 0.0;
    if (positive && rep.times.size() >= 2) {
        rep.slope = loglog_slope(rep.times, rep.ratio);
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < rep.times.size(); ++k) {
            mx += std::log(rep.times[k]);
            my += std::log(rep.ratio[k]);
        }
        const double n = static_cast<double>(rep.times.size());
        rep.intercept = std::exp(my / n - rep.slope * mx / n);
    }
    return rep;
}

SmoothingReport LatticeSemigroup::smoothing_estimate(const TestFunction& f, const std::vector<double>& times,
                                                     double gamma) const {
    const int d = lat_.dim;
    double alpha = 2.0, beta = 0.0;
    for (int i = 0; i < d; ++i) {
        alpha = std::min(alpha, kernel_->tmodel(i).base().alpha);
        beta = std::max(beta, kernel_->tmodel(i).base().beta);
    }
    SmoothingReport rep;
    rep.gamma = gamma;
    rep.exponent = -gamma * (d + beta - alpha) / alpha;
    const auto states = march(f, times);
    for (const auto& s : states) {
        double sup = std::abs(s.values.far);
        for (double v : s.values.v) sup = std::max(sup, std::abs(v));
        rep.times.push_back(s.t);
        rep.sup.push_back(sup);
    }
    for (std::size_t k = 1; k < rep.sup.size(); ++k) rep.monotone = rep.monotone && rep.sup[k] < rep.sup[k - 1];
    if (rep.times.size() >= 2) rep.slope = loglog_slope(rep.times, rep.sup);
    return rep;
}

GeneratorReport LatticeSemigroup::generator_residual(const TestFunction& f, double t,
                                                     const std::vector<Vec>& probes, double rtol) const {
    GeneratorReport rep;
    rep.t = t;
    const int K = steps_for(t);
    LatticeFunction kf;
    kf.v.assign(lat_.size(), 0.0);
    kf.far = 0.0;
    const std::int64_t n = static_cast<std::int64_t>(lat_.size());
    std::vector<char> failed(n, 0);
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t k = 0; k < n; ++k) {
        const Vec x = lat_.point(k);
        try {
            kf.v[k] = apply_K(f.f, x, f.scale, rtol);
        } catch (const DivergenceError&) {
            failed[k] = 1;
        }
    }
    for (char c : failed)
        if (c) throw DivergenceError("generator residual: K f quadrature failed on the lattice");
    for (double v : kf.v) rep.k_norm = std::max(rep.k_norm, std::abs(v));
    std::vector<double> times;
    for (int k = 0; k <= K; ++k) times.push_back(k * opt_.step);
    const auto states = march(kf, times);
    const auto ft = march(f, {t});
    TestFunction kfun;
    kfun.f = [&](const Vec& x) { return apply_K(f.f, x, f.scale, rtol); };
    for (const auto& x : probes) {
        std::vector<double> vals;
        for (const auto& s : states) vals.push_back(s.t == 0.0 ? kfun.f(x) : frozen_row_apply(x, s.before_last));
        // Composite Simpson, with a 3/8 panel when the count of intervals is odd.
        const double h = opt_.step;
        double integral = 0.0;
        int end = K;
        if (K % 2 == 1 && K >= 3) {
            integral += 3.0 * h / 8.0 * (vals[K - 3] + 3.0 * vals[K - 2] + 3.0 * vals[K - 1] + vals[K]);
            end = K - 3;
        } else if (K == 1) {
            integral += 0.5 * h * (vals[0] + vals[1]);
            end = 0;
        }
        for (int k = 0; k + 2 <= end; k += 2) integral += h / 3.0 * (vals[k] + 4.0 * vals[k + 1] + vals[k + 2]);
        const double tf = value_at(ft.front(), f, x);
        rep.probes.push_back(x);
        rep.residual.push_back(std::abs(tf - f.f(x) - integral));
    }
    return rep;
}

}  // namespace lf
