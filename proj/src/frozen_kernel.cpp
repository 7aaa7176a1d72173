#include "levyfeller/frozen_kernel.hpp"

#include "levyfeller/csv.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace lf {

namespace {

Mat identity(int d) { return Mat::Identity(d, d); }

void check_dim(int d) {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("field dimension must lie in [1, 4]");
}

double max_abs_entry(const Mat& A) { return A.cwiseAbs().maxCoeff(); }

}  // namespace

CoefficientField make_identity_field(int d) {
    check_dim(d);
    CoefficientField f;
    f.dim = d;
    f.A = [d](const Vec&) { return identity(d); };
    f.constant = true;
    f.name = "identity";
    return f;
}

CoefficientField make_constant_field(const Mat& A0) {
    const int d = static_cast<int>(A0.rows());
    check_dim(d);
    if (A0.cols() != d) throw std::invalid_argument("constant field: matrix must be square");
    CoefficientField f;
    f.dim = d;
    f.A = [A0](const Vec&) { return A0; };
    f.eta1 = std::max(1.0, max_abs_entry(A0));
    f.eta2 = A0.determinant();
    if (!(f.eta2 > 0.0)) throw std::invalid_argument("constant field: determinant must be positive");
    f.constant = true;
    f.name = "constant";
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) f.params.push_back(A0(i, j));
    return f;
}

CoefficientField make_diagonal_field(const std::vector<double>& diag) {
    const int d = static_cast<int>(diag.size());
    check_dim(d);
    Mat A0 = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        if (!(diag[i] > 0.0)) throw std::invalid_argument("diagonal field: entries must be positive");
        A0(i, i) = diag[i];
    }
    CoefficientField f = make_constant_field(A0);
    f.name = "diagonal";
    f.params = diag;
    return f;
}

CoefficientField make_rotation_field(int d, double theta0) {
    check_dim(d);
    if (d < 2) throw std::invalid_argument("rotation field needs d >= 2");
    CoefficientField f;
    f.dim = d;
    f.A = [d, theta0](const Vec& x) {
        const double th = theta0 / (1.0 + x.squaredNorm());
        Mat A = identity(d);
        const double c = std::cos(th), s = std::sin(th);
        A(0, 0) = c;
        A(0, 1) = -s;
        A(1, 0) = s;
        A(1, 1) = c;
        return A;
    };
    // |grad theta| <= theta0 * max_r 2r/(1+r^2)^2 = theta0 * 3 sqrt(3) / 8.
    f.eta1 = 1.0;
    f.eta2 = 1.0;
    f.eta3 = std::max(1.0, std::abs(theta0) * 3.0 * std::sqrt(3.0) / 8.0);
    f.name = "rotation";
    f.params = {theta0};
    return f;
}

CoefficientField make_bump_field(int d, double kappa, std::uint64_t seed) {
    check_dim(d);
    if (!(kappa >= 0.0 && kappa < 1.0 / (2.0 * d)))
        throw std::invalid_argument("bump field: kappa must lie in [0, 1/(2d))");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Mat M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = U(rng);
    CoefficientField f;
    f.dim = d;
    f.A = [d, kappa, M](const Vec& x) { return Mat(identity(d) + kappa * std::exp(-0.5 * x.squaredNorm()) * M); };
    f.eta1 = 1.0 + kappa;
    // ||kappa M||_2 <= d kappa < 1/2, so every singular value of A exceeds 1/2.
    f.eta2 = std::pow(1.0 - d * kappa, d);
    // |grad exp(-|x|^2/2)| <= exp(-1/2).
    f.eta3 = std::max(1.0, kappa * std::exp(-0.5));
    f.name = "bump";
    f.params = {kappa, static_cast<double>(seed)};
    return f;
}

CoefficientField load_tabulated_field(const std::string& path, int d) {
    check_dim(d);
    const CsvTable tab = read_csv(path);
    if (static_cast<int>(tab.header.size()) != d + d * d)
        throw IoError(path + ": expected " + std::to_string(d + d * d) + " columns");
    std::vector<std::vector<double>> axes(d);
    for (int k = 0; k < d; ++k) {
        for (const auto& r : tab.rows) axes[k].push_back(r[k]);
        std::sort(axes[k].begin(), axes[k].end());
        axes[k].erase(std::unique(axes[k].begin(), axes[k].end()), axes[k].end());
        if (axes[k].size() < 2) throw IoError(path + ": each axis needs at least two nodes");
    }
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size();
    if (total != tab.rows.size()) throw IoError(path + ": rows do not form a full tensor lattice");
    std::vector<double> values(total * d * d);
    std::vector<char> seen(total, 0);
    for (const auto& r : tab.rows) {
        std::size_t idx = 0;
        for (int k = 0; k < d; ++k) {
            const auto it = std::lower_bound(axes[k].begin(), axes[k].end(), r[k]);
            idx = idx * axes[k].size() + static_cast<std::size_t>(it - axes[k].begin());
        }
        if (seen[idx]) throw IoError(path + ": duplicate lattice node");
        seen[idx] = 1;
        for (int e = 0; e < d * d; ++e) values[idx * d * d + e] = r[d + e];
    }
    CoefficientField f;
    f.dim = d;
    f.A = [d, axes, values](const Vec& x) {
        std::array<std::size_t, kMaxDim> lo{};
        std::array<double, kMaxDim> w{};
        for (int k = 0; k < d; ++k) {
            const auto& ax = axes[k];
            const double xc = std::clamp(x[k], ax.front(), ax.back());
            std::size_t j = static_cast<std::size_t>(std::upper_bound(ax.begin(), ax.end(), xc) - ax.begin());
            j = std::clamp<std::size_t>(j, 1, ax.size() - 1) - 1;
            lo[k] = j;
            w[k] = (xc - ax[j]) / (ax[j + 1] - ax[j]);
        }
        Mat A = Mat::Zero(d, d);
        for (int corner = 0; corner < (1 << d); ++corner) {
            double wt = 1.0;
            std::size_t idx = 0;
            for (int k = 0; k < d; ++k) {
                const int bit = (corner >> k) & 1;
                wt *= bit ? w[k] : 1.0 - w[k];
                idx = idx * axes[k].size() + lo[k] + bit;
            }
            if (wt == 0.0) continue;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) A(i, j) += wt * values[idx * d * d + i * d + j];
        }
        return A;
    };
    // Constants from the samples: interpolation preserves entry bounds; the
    // determinant and slopes are re-certified by validate_field.
    double e1 = 0.0, e2 = std::numeric_limits<double>::infinity(), e3 = 0.0;
    for (std::size_t n = 0; n < total; ++n) {
        Mat A(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) A(i, j) = values[n * d * d + i * d + j];
        e1 = std::max(e1, max_abs_entry(A));
        e2 = std::min(e2, A.determinant());
    }
    for (int k = 0; k < d; ++k) {
        std::size_t stride = 1;
        for (int m = k + 1; m < d; ++m) stride *= axes[m].size();
        for (std::size_t n = 0; n < total; ++n) {
            const std::size_t pos = (n / stride) % axes[k].size();
            if (pos + 1 >= axes[k].size()) continue;
            const double h = axes[k][pos + 1] - axes[k][pos];
            for (int e = 0; e < d * d; ++e)
                e3 = std::max(e3, std::abs(values[(n + stride) * d * d + e] - values[n * d * d + e]) / h);
        }
    }
    f.eta1 = std::max(1.0, e1);
    f.eta2 = 0.5 * e2;
    f.eta3 = std::max(1.0, e3);
    f.name = "tabulated";
    return f;
}

LatticeSpec default_validation_lattice(int d) {
    if (d <= 2) return {33, 3.0};
    if (d == 3) return {17, 3.0};
    return {9, 3.0};
}

FieldReport validate_field(const CoefficientField& field, const LatticeSpec& lattice) {
    const int d = field.dim;
    const int n = lattice.points_per_axis;
    if (n < 2) throw std::invalid_argument("validation lattice needs at least two points per axis");
    const double h = 2.0 * lattice.half_width / (n - 1);
    std::size_t total = 1;
    for (int k = 0; k < d; ++k) total *= n;
    auto point = [&](std::size_t idx) {
        Vec x(d);
        for (int k = d - 1; k >= 0; --k) {
            x[k] = -lattice.half_width + h * static_cast<double>(idx % n);
            idx /= n;
        }
        return x;
    };
    std::vector<Mat> As(total);
    for (std::size_t i = 0; i < total; ++i) As[i] = field(point(i));
    FieldReport rep;
    rep.normalization_ok = field.eta1 >= 1.0 && field.eta3 >= 1.0;
    double max_entry = 0.0, min_det = std::numeric_limits<double>::infinity(), max_quot = 0.0;
    auto witness = [&](const std::string& kind, const Vec& x) {
        if (rep.witnesses.size() < 16) {
            rep.witnesses.emplace_back(x.data(), x.data() + d);
            rep.witness_kind.push_back(kind);
        }
    };
    for (std::size_t i = 0; i < total; ++i) {
        const double e = max_abs_entry(As[i]);
        const double det = As[i].determinant();
        max_entry = std::max(max_entry, e);
        min_det = std::min(min_det, det);
        if (e > field.eta1 + 1e-12) witness("bound", point(i));
        if (det < field.eta2 - 1e-12) witness("determinant", point(i));
        std::size_t stride = 1;
        for (int k = d - 1; k >= 0; --k) {
            const std::size_t pos = (i / stride) % n;
            if (pos + 1 < static_cast<std::size_t>(n)) {
                const double q = max_abs_entry(As[i + stride] - As[i]) / h;
                max_quot = std::max(max_quot, q);
                if (q > field.eta3 + 1e-12) witness("lipschitz", point(i));
            }
            stride *= n;
        }
    }
    rep.bound_margin = field.eta1 - max_entry;
    rep.det_margin = min_det - field.eta2;
    rep.lip_margin = field.eta3 - max_quot;
    return rep;
}

InverseField::InverseField(CoefficientField field) : field_(std::move(field)) {}

Frozen InverseField::at(const Vec& y) const {
    Frozen f;
    f.A = field_(y);
    const double det = f.A.determinant();
    if (!(det >= 0.5 * field_.eta2))
        throw std::domain_error("coefficient determinant below half the certified bound");
    f.B = f.A.inverse();
    f.detB = 1.0 / det;
    return f;
}

FrozenKernel::FrozenKernel(CoefficientField field, std::vector<std::shared_ptr<DensityProvider>> providers,
                           double t_min, double t_max)
    : field_(field), inv_(std::move(field)), providers_(std::move(providers)), t_min_(t_min), t_max_(t_max) {
    if (static_cast<int>(providers_.size()) != field_.dim)
        throw std::invalid_argument("frozen kernel: one density provider per coordinate required");
}

Slices FrozenKernel::slices(double t) const {
    if (!(t >= t_min_ * (1.0 - 1e-12) && t <= t_max_ * (1.0 + 1e-12))) {
        std::ostringstream os;
        os << "frozen kernel: t=" << t << " outside [" << t_min_ << ", " << t_max_ << "]";
        throw std::out_of_range(os.str());
    }
    Slices s;
    s.t = t;
    for (int i = 0; i < dim(); ++i) s.g[i] = providers_[i]->slice(t);
    return s;
}

double FrozenKernel::density(const Slices& s, const Frozen& fy, const Vec& v) {
    const int d = static_cast<int>(v.size());
    double p = fy.detB;
    for (int i = 0; i < d && p != 0.0; ++i) p *= s[i].value(fy.B.row(i).dot(v));
    return p;
}

double FrozenKernel::density(double t, const Vec& v, const Vec& y) const {
    return density(slices(t), inv_.at(y), v);
}

double FrozenKernel::time_derivative(const Slices& s, const Frozen& fy, const Vec& v) {
    const int d = static_cast<int>(v.size());
    std::array<double, kMaxDim> u{}, g{};
    for (int i = 0; i < d; ++i) {
        u[i] = fy.B.row(i).dot(v);
        g[i] = s[i].value(u[i]);
    }
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
        double term = s[i].time_deriv(u[i]);
        for (int j = 0; j < d; ++j)
            if (j != i) term *= g[j];
        total += term;
    }
    return fy.detB * total;
}

FrozenEnvelope::FrozenEnvelope(const InverseField& inv, std::vector<EnvelopeParams> env,
                               std::vector<std::shared_ptr<const ConcentrationTable>> tables)
    : inv_(inv), env_(std::move(env)), ct_(std::move(tables)) {
    if (static_cast<int>(env_.size()) != inv_.field().dim || ct_.size() != env_.size())
        throw std::invalid_argument("frozen envelope: one envelope per coordinate required");
}

double FrozenEnvelope::operator()(double t, const Vec& v, const Vec& y) const {
    const Frozen fy = inv_.at(y);
    double r = 1.0;
    for (std::size_t i = 0; i < env_.size(); ++i)
        r *= envelope_gtilde(env_[i], *ct_[i], t, fy.B.row(static_cast<int>(i)).dot(v));
    return r;
}

double FrozenEnvelope::central(double t) const {
    double r = 1.0;
    for (const auto& c : ct_) r /= c->h_inv(1.0 / t);
    return r;
}

}  // namespace lf
