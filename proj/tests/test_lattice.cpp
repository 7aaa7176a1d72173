#include "levyfeller/lattice.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lf;

namespace {

SparseOperator random_operator(const Lattice& lat, unsigned seed, double far_gain = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    SparseOperator op;
    op.row_ptr.push_back(0);
    RowBuilder rb(lat.size());
    Stencil st;
    for (std::size_t k = 0; k < lat.size(); ++k) {
        Vec y = lat.point(k);
        for (int j = 0; j < 3; ++j) {
            Vec z = y;
            for (int i = 0; i < lat.dim; ++i) z[i] += u(rng);
            interpolation_stencil(lat, z, st);
            rb.add(st, 1.0 / 3.0);
        }
        rb.flush(op);
    }
    op.far_gain = far_gain;
    return op;
}

}  // namespace

TEST(Lattice, IndexRoundTrip) {
    const Lattice lat = Lattice::make(2, 1.0, 0.25);
    EXPECT_EQ(lat.n, 9);
    EXPECT_EQ(lat.size(), 81u);
    const Vec p = lat.point(lat.index({2, 5}));
    EXPECT_DOUBLE_EQ(p[0], -0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.25);
    EXPECT_DOUBLE_EQ(lat.cell_volume(), 0.0625);
}

TEST(Interpolation, ExactForCubics) {
    const Lattice lat = Lattice::make(2, 2.0, 0.125);
    auto cubic = [](const Vec& x) { return 1.0 + x[0] - 2.0 * x[1] * x[1] + x[0] * x[0] * x[0] - x[0] * x[1]; };
    const LatticeFunction f = sample(lat, cubic, 0.0);
    Stencil st;
    for (const Vec& y : {Vec{{0.013, -0.77}}, Vec{{1.51, 0.3}}, Vec{{-0.2, 0.0625}}}) {
        EXPECT_NEAR(interpolate(lat, f, y), cubic(y), 1e-12);
        interpolation_stencil(lat, y, st);
        double s = 0.0;
        for (double w : st.w) s += w;
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(Interpolation, OffLatticeUsesFarValue) {
    const Lattice lat = Lattice::make(2, 1.0, 0.125);
    const LatticeFunction f = sample(lat, [](const Vec&) { return 0.0; }, 3.0);
    EXPECT_DOUBLE_EQ(interpolate(lat, f, Vec{{5.0, 0.0}}), 3.0);
}

TEST(Sparse, ParallelMatchesSerialBitwise) {
    const Lattice lat = Lattice::make(2, 1.0, 0.0625);
    const SparseOperator op = random_operator(lat, 1);
    const LatticeFunction f = sample(lat, [](const Vec& x) { return std::sin(3.0 * x[0]) * std::cos(x[1]); }, 0.2);
    LatticeFunction a, b;
    op.apply(f, a);
    op.apply_serial(f, b);
    EXPECT_EQ(a.v, b.v);
    EXPECT_EQ(a.far, b.far);
    EXPECT_LE(op.max_row_sum_error(), 1e-13);
}

TEST(Sparse, TransposeIsAdjoint) {
    const Lattice lat = Lattice::make(2, 1.0, 0.125);
    const SparseOperator op = random_operator(lat, 2, 0.9);
    std::mt19937 rng(3);
    std::normal_distribution<double> n;
    LatticeFunction f, m;
    for (std::size_t k = 0; k < lat.size(); ++k) {
        f.v.push_back(n(rng));
        m.v.push_back(n(rng));
    }
    f.far = 0.7;
    m.far = -0.3;
    LatticeFunction af, atm;
    op.apply(f, af);
    op.apply_transpose(m, atm);
    double lhs = m.far * af.far, rhs = atm.far * f.far;
    for (std::size_t k = 0; k < lat.size(); ++k) {
        lhs += m.v[k] * af.v[k];
        rhs += atm.v[k] * f.v[k];
    }
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs) + 1e-12);
}

TEST(RowBuilder, MergesAndSorts) {
    const Lattice lat = Lattice::make(1, 1.0, 0.25);
    SparseOperator op;
    op.row_ptr.push_back(0);
    RowBuilder rb(lat.size());
    Stencil a{{4, 2, -1}, {0.25, 0.5, 0.1}}, b{{2, 7}, {0.1, 0.05}};
    rb.add(a, 1.0);
    rb.add(b, 1.0);
    rb.flush(op);
    ASSERT_EQ(op.col.size(), 3u);
    EXPECT_EQ(op.col[0], 2);
    EXPECT_EQ(op.col[1], 4);
    EXPECT_EQ(op.col[2], 7);
    EXPECT_DOUBLE_EQ(op.val[0], 0.6);
    EXPECT_DOUBLE_EQ(op.far_weight[0], 0.1);
}

TEST(Concatenate, JoinsRowBlocks) {
    const Lattice lat = Lattice::make(2, 1.0, 0.25);
    const SparseOperator whole = random_operator(lat, 5);
    std::vector<SparseOperator> parts(2);
    for (int p = 0; p < 2; ++p) {
        const std::size_t lo = p == 0 ? 0 : 40, hi = p == 0 ? 40 : whole.rows();
        parts[p].row_ptr.push_back(0);
        for (std::size_t r = lo; r < hi; ++r) {
            for (auto k = whole.row_ptr[r]; k < whole.row_ptr[r + 1]; ++k) {
                parts[p].col.push_back(whole.col[k]);
                parts[p].val.push_back(whole.val[k]);
            }
            parts[p].row_ptr.push_back(whole.row_ptr[r + 1] - whole.row_ptr[lo]);
            parts[p].far_weight.push_back(whole.far_weight[r]);
        }
    }
    const SparseOperator joined = concatenate(parts);
    EXPECT_EQ(joined.col, whole.col);
    EXPECT_EQ(joined.val, whole.val);
    EXPECT_EQ(joined.row_ptr, whole.row_ptr);
}
