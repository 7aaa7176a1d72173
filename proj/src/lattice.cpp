#include "levyfeller/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lf {

Lattice Lattice::make(int dim, double half_width, double spacing) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("lattice dimension must be 1..3");
    if (!(half_width > 0.0) || !(spacing > 0.0)) throw std::invalid_argument("lattice extent and spacing must be positive");
    Lattice lat;
    lat.dim = dim;
    const int cells = static_cast<int>(std::lround(2.0 * half_width / spacing));
    lat.n = cells + 1;
    lat.L = half_width;
    lat.dx = 2.0 * half_width / cells;
    return lat;
}

std::size_t Lattice::size() const {
    std::size_t s = 1;
    for (int i = 0; i < dim; ++i) s *= static_cast<std::size_t>(n);
    return s;
}

Vec Lattice::point(std::size_t k) const {
    Vec x(dim);
    for (int i = dim - 1; i >= 0; --i) {
        x[i] = -L + static_cast<double>(k % n) * dx;
        k /= n;
    }
    return x;
}

std::size_t Lattice::index(const std::vector<int>& ijk) const {
    std::size_t k = 0;
    for (int i = 0; i < dim; ++i) k = k * n + ijk[i];
    return k;
}

double Lattice::cell_volume() const { return std::pow(dx, dim); }

LatticeFunction sample(const Lattice& lat, const std::function<double(const Vec&)>& f, double far) {
    LatticeFunction out;
    out.v.resize(lat.size());
    out.far = far;
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] = f(lat.point(k));
    return out;
}

namespace {

void lagrange4(double s, double* c) {
    // Nodes at -1, 0, 1, 2 relative to the cell start.
    c[0] = -s * (s - 1.0) * (s - 2.0) / 6.0;
    c[1] = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    c[2] = -(s + 1.0) * s * (s - 2.0) / 2.0;
    c[3] = (s + 1.0) * s * (s - 1.0) / 6.0;
}

}  // namespace

void interpolation_stencil(const Lattice& lat, const Vec& y, Stencil& out) {
    const int d = lat.dim;
    int base[3];
    double coef[3][4];
    for (int i = 0; i < d; ++i) {
        const double u = (y[i] + lat.L) / lat.dx;
        const double fl = std::floor(u);
        base[i] = static_cast<int>(fl) - 1;
        lagrange4(u - fl, coef[i]);
    }
    int total = 1;
    for (int i = 0; i < d; ++i) total *= 4;
    out.idx.resize(total);
    out.w.resize(total);
    for (int m = 0; m < total; ++m) {
        int r = m;
        double w = 1.0;
        std::int64_t k = 0;
        bool inside = true;
        for (int i = d - 1; i >= 0; --i) {
            const int o = r % 4;
            r /= 4;
            w *= coef[i][o];
            const int j = base[i] + o;
            if (j < 0 || j >= lat.n) inside = false;
        }
        if (inside) {
            r = m;
            int stride = 1;
            for (int i = d - 1; i >= 0; --i) {
                k += static_cast<std::int64_t>(base[i] + r % 4) * stride;
                r /= 4;
                stride *= lat.n;
            }
        }
        out.idx[m] = inside ? k : -1;
        out.w[m] = w;
    }
}

double interpolate(const Lattice& lat, const LatticeFunction& f, const Vec& y) {
    Stencil s;
    interpolation_stencil(lat, y, s);
    double acc = 0.0;
    for (std::size_t m = 0; m < s.w.size(); ++m) acc += s.w[m] * (s.idx[m] >= 0 ? f.v[s.idx[m]] : f.far);
    return acc;
}

void SparseOperator::apply(const LatticeFunction& in, LatticeFunction& out) const {
    const std::int64_t n = static_cast<std::int64_t>(rows());
    out.v.resize(n);
    const double* x = in.v.data();
    double* y = out.v.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < n; ++r) {
        double acc = far_weight[r] * in.far;
        for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += val[p] * x[col[p]];
        y[r] = acc;
    }
    out.far = far_gain * in.far;
}

void SparseOperator::apply_serial(const LatticeFunction& in, LatticeFunction& out) const {
    const std::size_t n = rows();
    out.v.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        double acc = far_weight[r] * in.far;
        for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += val[p] * in.v[col[p]];
        out.v[r] = acc;
    }
    out.far = far_gain * in.far;
}

void SparseOperator::apply_transpose(const LatticeFunction& in, LatticeFunction& out) const {
    const std::size_t n = rows();
    out.v.assign(n, 0.0);
    double far = far_gain * in.far;
    for (std::size_t r = 0; r < n; ++r) {
        const double m = in.v[r];
        if (m == 0.0) continue;
        for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) out.v[col[p]] += val[p] * m;
        far += far_weight[r] * m;
    }
    out.far = far;
}

double SparseOperator::max_row_sum_error() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < rows(); ++r) {
        double s = far_weight[r];
        for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) s += val[p];
        worst = std::max(worst, std::abs(s - far_gain));
    }
    return worst;
}

RowBuilder::RowBuilder(std::size_t n_cols) : dense_(n_cols, 0.0), mark_(n_cols, 0) {}

void RowBuilder::add(const Stencil& s, double weight) {
    for (std::size_t m = 0; m < s.w.size(); ++m) {
        const double w = weight * s.w[m];
        if (s.idx[m] < 0) {
            far_ += w;
            continue;
        }
        const auto c = static_cast<std::int32_t>(s.idx[m]);
        if (!mark_[c]) {
            mark_[c] = 1;
            touched_.push_back(c);
        }
        dense_[c] += w;
    }
}

void RowBuilder::flush(SparseOperator& op) {
    std::sort(touched_.begin(), touched_.end());
    for (const auto c : touched_) {
        op.col.push_back(c);
        op.val.push_back(dense_[c]);
        dense_[c] = 0.0;
        mark_[c] = 0;
    }
    touched_.clear();
    op.far_weight.push_back(far_);
    far_ = 0.0;
    if (op.row_ptr.empty()) op.row_ptr.push_back(0);
    op.row_ptr.push_back(static_cast<std::int64_t>(op.col.size()));
}

SparseOperator concatenate(std::vector<SparseOperator>& parts) {
    SparseOperator out;
    std::size_t nnz = 0, rows = 0;
    for (const auto& p : parts) {
        nnz += p.nnz();
        rows += p.rows();
    }
    out.col.reserve(nnz);
    out.val.reserve(nnz);
    out.far_weight.reserve(rows);
    out.row_ptr.reserve(rows + 1);
    out.row_ptr.push_back(0);
    for (auto& p : parts) {
        const std::int64_t offset = static_cast<std::int64_t>(out.col.size());
        out.col.insert(out.col.end(), p.col.begin(), p.col.end());
        out.val.insert(out.val.end(), p.val.begin(), p.val.end());
        out.far_weight.insert(out.far_weight.end(), p.far_weight.begin(), p.far_weight.end());
        for (std::size_t r = 1; r < p.row_ptr.size(); ++r) out.row_ptr.push_back(p.row_ptr[r] + offset);
        std::vector<std::int32_t>().swap(p.col);
        std::vector<double>().swap(p.val);
    }
    if (!parts.empty()) out.far_gain = parts.front().far_gain;
    return out;
}

}  // namespace lf
