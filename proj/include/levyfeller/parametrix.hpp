#pragma once

#include "levyfeller/frozen_kernel.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <memory>
#include <stdexcept>
#include <vector>

namespace lf {

enum class AssumptionMode { Z1, Z2 };

/// Singularity exponent of the integrated q0: 1 - alpha/(3 beta) or 2 beta/(3 alpha).
double sigma_exponent(AssumptionMode mode, double alpha, double beta);

/// Checks the mode against the coordinate models; throws std::invalid_argument.
void check_mode(AssumptionMode mode, const std::vector<const LevyModel1D*>& models);

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GeneratorOptions {
    double rtol = 1e-8;
    double inner_fraction = 1e-3;  ///< Taylor region [0, zeta] with zeta = inner_fraction * outer scale
};

using Field = std::function<double(const Vec&)>;

/// 1/2 sum_i int [f(x + a_i(z) w) + f(x - a_i(z) w) - 2 f(x)] mu_i(w) dw for a general f.
double apply_frozen_generator(const CoefficientField& field, const Vec& z, const Field& f, const Vec& x,
                              const std::vector<const TruncatedModel1D*>& tms, double scale,
                              const GeneratorOptions& opt = {});

/// Panel rule on [0, 2 delta] resolving features of size `scale`, plus the Taylor weight of [0, zeta].
struct JumpRule {
    std::vector<double> w, weight;  ///< nodes and mu-weighted quadrature weights on [zeta, 2 delta]
    double zeta = 0.0;
    double inner_moment = 0.0;  ///< int_0^zeta w^2 mu(w) dw
};

JumpRule make_jump_rule(const TruncatedModel1D& tm, double scale, double inner_fraction = 1e-3, int nodes = 8);

struct ParametrixOptions {
    double t_floor = 1e-3;   ///< below this the kernel is replaced by its frozen leading term
    double inner_fraction = 1e-3;
    int jump_nodes = 4;      ///< Gauss nodes per jump-size panel
    double jump_ratio = 2.5; ///< geometric growth of jump-size panels
    // Row grids: composite Gauss panels graded away from the centre.
    double core = 0.75;      ///< first breakpoint in units of the feature scale
    double growth = 2.5;     ///< panel growth ratio
    int panel_nodes = 3;
    double tail = 1e-6;      ///< extent where g drops below tail * g(0)
    int time_nodes = 3;      ///< Gauss nodes per half of each time integral
    double level_ratio = 2.0;
    bool parallel = true;
};

/// One-dimensional composite Gauss axis, symmetric about 0.
struct GradedAxis {
    std::vector<double> breaks;  ///< panel edges, increasing
    std::vector<double> x, w;    ///< nodes and weights
    int per_panel = 4;
    double extent() const { return breaks.back(); }
    /// Lagrange weights on the panel containing s; returns first node index, or -1 outside.
    int stencil(double s, double* coef) const;
};

GradedAxis make_graded_axis(double scale, double extent, const ParametrixOptions& opt);

/// Tensor grid y = centre + A ξ with ξ on graded axes.
struct RowGrid {
    Vec centre;
    Mat A, B;
    double detA = 1.0;
    std::vector<GradedAxis> axes;
    std::size_t size() const;
    Vec point(std::size_t k) const;
    double weight(std::size_t k) const;
    double interpolate(const std::vector<double>& values, const Vec& y) const;
};

/// Values of a row function y -> F(tau, x, y) stored on one grid per time level.
struct RowHistory {
    std::vector<double> times;
    std::vector<RowGrid> grids;
    std::vector<std::vector<double>> values;
    double small_time_exponent = 0.0;  ///< power law used below the first level
    double time_power = 1.0;           ///< interpolation in tau^time_power between levels
    double eval(double tau, const Vec& y) const;
    double l1(std::size_t level) const;
    double integral(std::size_t level) const;
};

struct PicardReport {
    double t = 0.0;
    std::vector<double> l1;     ///< int |q_n(t, x, y)| dy
    std::vector<double> ratios; ///< l1[n+1] / l1[n]
    int n_terms = 0;
    bool converged = false;
};

struct URowReport {
    std::vector<double> times;
    std::vector<double> mass;        ///< int u(t, x, y) dy
    std::vector<double> frozen_mass; ///< int p_y(t, x - y) dy
    std::vector<double> min_value;   ///< min over the row grid of u
    std::vector<double> max_abs_correction;
};

struct TimeData;
class MuTable;

class Parametrix {
public:
    Parametrix(std::shared_ptr<const FrozenKernel> kernel, AssumptionMode mode, ParametrixOptions opt = {});

    const FrozenKernel& kernel() const { return *kernel_; }
    double sigma() const { return sigma_; }
    const ParametrixOptions& options() const { return opt_; }

    /// L^z applied to p_y(t, .) at v, by quadrature in the jump size.
    double generator_on_kernel(double t, const Vec& z, const Vec& y, const Vec& v) const;
    /// q0(t, x, y) = (L^x - L^y) p_y(t, .)(x - y), telescoped before quadrature.
    double q0(double t, const Vec& x, const Vec& y) const;

    /// Rows y -> q_n(t, x, y) for n = 0..n_max on the level mesh ending at t_max.
    std::vector<RowHistory> picard_rows(const Vec& x, double t_max, int n_max,
                                        const std::vector<double>& extra = {}) const;
    PicardReport picard_report(const std::vector<RowHistory>& rows, double t, double rtol = 1e-6) const;

    /// Correction row y -> u(t, x, y) - p_y(t, x - y) by marching u = p + u * q0.
    RowHistory correction_row(const Vec& x, double t_max, const std::vector<double>& extra = {}) const;
    double u(const RowHistory& corr, double t, const Vec& x, const Vec& y) const;
    URowReport u_report(const RowHistory& corr, const Vec& x, const std::vector<double>& times) const;
    /// int p_y(t, x - y) dy by a fine tensor quadrature.
    double frozen_mass(double t, const Vec& x) const;
    /// int |q0(t, x, y)| dy on the row grid.
    double q0_l1(double t, const Vec& x) const;

    std::vector<double> level_times(double t_max, const std::vector<double>& extra) const;
    /// Grid around `centre` aligned with f.A, resolving p at time t plus `reach` in every direction.
    RowGrid make_grid(double t, const Vec& centre, const Frozen& f, double reach = 0.0) const;
    /// Largest displacement a single truncated jump can produce.
    double jump_reach() const { return reach_; }

private:
    struct Node;
    using Left = std::function<double(const Node&, const Vec& w, const Frozen& fw)>;
    std::shared_ptr<const TimeData> time_data(double t) const;
    double q0_fast(const TimeData& td, const Frozen& fx, const Frozen& fy, const Vec& x, const Vec& y) const;
    std::vector<Node> time_nodes(double tau) const;
    /// Values on `grid` of y -> int_0^tau int left(tau - s, w) q0(s, w, y) dw ds.
    std::vector<double> convolve(double tau, const Vec& x, const Frozen& fx, const RowGrid& grid,
                                 const Left& left) const;

    std::shared_ptr<const FrozenKernel> kernel_;
    AssumptionMode mode_;
    ParametrixOptions opt_;
    double sigma_;
    double reach_;
    std::vector<std::shared_ptr<const MuTable>> mu_tables_;
    mutable std::mutex cache_mu_;
    mutable std::map<double, std::shared_ptr<const TimeData>> cache_;
};

}  // namespace lf
