#pragma once

#include "levyfeller/density1d.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lf {

constexpr int kMaxDim = 4;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

/// Matrix-valued coefficient x -> A(x). Column i of A(x) is the jump
/// direction of driving coordinate i.
struct CoefficientField {
    int dim = 2;
    std::function<Mat(const Vec&)> A;
    double eta1 = 1.0;  ///< entry bound
    double eta2 = 1.0;  ///< determinant lower bound
    double eta3 = 1.0;  ///< Lipschitz constant of the entries
    bool constant = false;
    std::string name = "custom";
    std::vector<double> params;

    Mat operator()(const Vec& x) const { return A(x); }
    Vec column(const Vec& x, int i) const { return A(x).col(i); }
};

CoefficientField make_identity_field(int d);
CoefficientField make_constant_field(const Mat& A0);
CoefficientField make_diagonal_field(const std::vector<double>& diag);
/// R(theta(x)) with theta(x) = theta0 / (1 + |x|^2), rotating the first two axes.
CoefficientField make_rotation_field(int d, double theta0);
/// I + kappa * exp(-|x|^2 / 2) * M with a seeded matrix M of entries in [-1, 1].
CoefficientField make_bump_field(int d, double kappa, std::uint64_t seed);
/// CSV with columns x_1..x_d, a_11, a_12, ..., a_dd (row-major) on a full
/// tensor lattice; multilinear interpolation, clamped outside.
CoefficientField load_tabulated_field(const std::string& path, int d);

struct LatticeSpec {
    int points_per_axis = 33;
    double half_width = 3.0;
};

LatticeSpec default_validation_lattice(int d);

struct FieldReport {
    double bound_margin = 0.0;  ///< eta1 - max |a_ij|
    double det_margin = 0.0;    ///< min det A - eta2
    double lip_margin = 0.0;    ///< eta3 - max difference quotient
    bool normalization_ok = true;
    std::vector<std::vector<double>> witnesses;
    std::vector<std::string> witness_kind;
    bool ok() const {
        return bound_margin >= -1e-12 && det_margin >= -1e-12 && lip_margin >= -1e-12 && normalization_ok;
    }
};

FieldReport validate_field(const CoefficientField& field, const LatticeSpec& lattice);

/// A(y), its inverse B(y) and det B(y) at one freezing point.
struct Frozen {
    Mat A, B;
    double detB = 1.0;
};

class InverseField {
public:
    explicit InverseField(CoefficientField field);
    Frozen at(const Vec& y) const;
    const CoefficientField& field() const { return field_; }

private:
    CoefficientField field_;
};

/// Per-coordinate density slices at one time.
struct Slices {
    double t = 0.0;
    std::array<std::shared_ptr<const DensitySlice>, kMaxDim> g{};
    const DensitySlice& operator[](int i) const { return *g[i]; }
};

/// Frozen-coefficient kernel p_y(t, v) = det B(y) prod_i g_{i,t}(b_i(y) . v).
class FrozenKernel {
public:
    FrozenKernel(CoefficientField field, std::vector<std::shared_ptr<DensityProvider>> providers, double t_min = 1e-4,
                 double t_max = 1.0);

    int dim() const { return field_.dim; }
    const CoefficientField& field() const { return inv_.field(); }
    const InverseField& inverse() const { return inv_; }
    const DensityProvider& provider(int i) const { return *providers_[i]; }
    const TruncatedModel1D& tmodel(int i) const { return providers_[i]->model(); }
    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }

    Slices slices(double t) const;
    double density(double t, const Vec& v, const Vec& y) const;
    static double density(const Slices& s, const Frozen& fy, const Vec& v);
    /// Time derivative of p_y(t, v), equal to the y-frozen generator applied to p_y.
    static double time_derivative(const Slices& s, const Frozen& fy, const Vec& v);
    /// Characteristic spatial scale of coordinate i at time t: 1 / (pi g_{i,t}(0)).
    static double feature_scale(const Slices& s, int i) { return 1.0 / (3.141592653589793 * s[i].value(0.0)); }

private:
    CoefficientField field_;
    InverseField inv_;
    std::vector<std::shared_ptr<DensityProvider>> providers_;
    double t_min_, t_max_;
};

/// Product of the g-tilde envelopes at the rotated coordinates.
class FrozenEnvelope {
public:
    FrozenEnvelope(const InverseField& inv, std::vector<EnvelopeParams> env,
                   std::vector<std::shared_ptr<const ConcentrationTable>> tables);
    double operator()(double t, const Vec& v, const Vec& y) const;
    double central(double t) const;

private:
    const InverseField& inv_;
    std::vector<EnvelopeParams> env_;
    std::vector<std::shared_ptr<const ConcentrationTable>> ct_;
};

}  // namespace lf
