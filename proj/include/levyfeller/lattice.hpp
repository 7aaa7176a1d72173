#pragma once

#include "levyfeller/frozen_kernel.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace lf {

/// Uniform lattice [-L, L]^d with n points per axis.
struct Lattice {
    int dim = 2;
    int n = 0;
    double L = 0.0;
    double dx = 0.0;

    static Lattice make(int dim, double half_width, double spacing);
    std::size_t size() const;
    Vec point(std::size_t k) const;
    std::size_t index(const std::vector<int>& ijk) const;
    double cell_volume() const;
};

/// Values on a lattice plus the constant the function takes off the lattice.
struct LatticeFunction {
    std::vector<double> v;
    double far = 0.0;
};

LatticeFunction sample(const Lattice& lat, const std::function<double(const Vec&)>& f, double far);

/// Cubic Lagrange interpolation weights of the lattice at y, 4^d entries.
/// Entries outside the lattice get index -1 and are charged to the far value.
struct Stencil {
    std::vector<std::int64_t> idx;
    std::vector<double> w;
};
void interpolation_stencil(const Lattice& lat, const Vec& y, Stencil& out);
double interpolate(const Lattice& lat, const LatticeFunction& f, const Vec& y);

/// Row-compressed linear operator on lattice functions. Each row also carries
/// the weight it gives to the far value; far values map to themselves times `far_gain`.
struct SparseOperator {
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int32_t> col;
    std::vector<double> val;
    std::vector<double> far_weight;
    double far_gain = 1.0;

    std::size_t rows() const { return far_weight.size(); }
    std::size_t nnz() const { return val.size(); }
    void apply(const LatticeFunction& in, LatticeFunction& out) const;
    void apply_serial(const LatticeFunction& in, LatticeFunction& out) const;
    /// Adjoint action on a measure; the far entry collects mass leaving the lattice.
    void apply_transpose(const LatticeFunction& in, LatticeFunction& out) const;
    double max_row_sum_error() const;
};

/// Accumulates weighted stencils into one row with duplicate columns merged.
class RowBuilder {
public:
    explicit RowBuilder(std::size_t n_cols);
    void add(const Stencil& s, double weight);
    void add_far(double weight) { far_ += weight; }
    /// Appends the row to op in ascending column order and resets.
    void flush(SparseOperator& op);

private:
    std::vector<double> dense_;
    std::vector<char> mark_;
    std::vector<std::int32_t> touched_;
    double far_ = 0.0;
};

/// Sets row_ptr for `rows` rows built independently and concatenates them.
SparseOperator concatenate(std::vector<SparseOperator>& parts);

}  // namespace lf
