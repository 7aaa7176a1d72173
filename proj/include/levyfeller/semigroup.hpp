#pragma once

#include "levyfeller/lattice.hpp"
#include "levyfeller/parametrix.hpp"
#include "levyfeller/quadrature.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace lf {

enum class Smoothness { C0, C02, Indicator };

/// Bounded test function. Every built-in one vanishes at infinity, so
/// lattice functions built from them have far value 0 (constants excepted).
struct TestFunction {
    std::string name;
    std::function<double(const Vec&)> f;
    double sup_norm = 1.0;
    double l1_norm = -1.0;  ///< negative when not known
    double far = 0.0;       ///< value at infinity
    double scale = 1.0;     ///< feature length
    Smoothness smoothness = Smoothness::C0;
};

TestFunction constant_function(double c);
/// height * exp(-|x - centre|^2 / (2 width^2))
TestFunction gauss_bump(const Vec& centre, double width, double height = 1.0);
/// Gaussian bump with unit integral.
TestFunction unit_mass_bump(const Vec& centre, double width);
/// Smooth step across x_1 = 0 of the given width, cut off by a smooth window of radius `window`.
TestFunction tanh_step(int dim, double width, double window = 2.5);
/// Indicator of the cube centre + [-half, half]^d.
TestFunction indicator_box(const Vec& centre, double half);
/// sin(k x_i) times a smooth window of radius `window`.
TestFunction coordinate_sine(int dim, int coordinate, double k, double window = 2.5);

TestFunction make_test_function(const std::string& name, int dim, const std::map<std::string, double>& params);

struct SemigroupOptions {
    double half_width = 4.0;
    double spacing = 1.0 / 32.0;
    double step = 1.0 / 64.0;       ///< full time step; frozen substeps are half of it
    int frozen_nodes = 12;          ///< Gauss nodes per coordinate for the short-step density
    int jump_nodes = 4;             ///< Gauss nodes per long-jump panel
    double jump_panel = 0.15;       ///< longest long-jump panel
    double poisson_tol = 1e-13;     ///< remainder of the per-step Poisson sum
    double series_tol = 1e-6;       ///< termination of the interlacing series
    int series_cap = 12;
};

struct SemigroupResult {
    std::vector<double> values;      ///< per probe
    int n_terms = 0;
    bool converged = false;
    double lambda0 = 0.0;
    std::vector<double> term_norms;  ///< sup over probes of |Psi_n|
    std::vector<std::vector<double>> terms;  ///< terms[n][probe]
};

/// Snapshot of the marched semigroup at one time.
struct SemigroupState {
    double t = 0.0;
    LatticeFunction values;       ///< T_t f on the lattice
    LatticeFunction before_last;  ///< input of the final short frozen substep
};

struct GeneratorReport {
    double t = 0.0;
    double k_norm = 0.0;  ///< sup of K f over the lattice
    std::vector<Vec> probes;
    std::vector<double> residual;  ///< |T_t f - f - int_0^t T_s K f ds|
};

struct HolderReport {
    std::vector<double> times, ratio;  ///< R_t
    double slope = 0.0, intercept = 0.0, target = 0.0;
};

struct SmoothingReport {
    std::vector<double> times, sup;
    double slope = 0.0, exponent = 0.0, gamma = 0.0;
    bool monotone = true;
};

/// Feller semigroup of the full process on a lattice: x-frozen short steps of
/// the truncated process interleaved with the long-jump Poisson sum.
class LatticeSemigroup {
public:
    LatticeSemigroup(std::shared_ptr<const FrozenKernel> kernel, SemigroupOptions opt = {});

    const Lattice& lattice() const { return lat_; }
    const SemigroupOptions& options() const { return opt_; }
    double lambda0() const { return lambda0_; }
    const FrozenKernel& kernel() const { return *kernel_; }
    const SparseOperator& frozen_substep() const { return frozen_; }
    /// Long-jump operator divided by lambda0: a Markov operator.
    const SparseOperator& jump_operator() const { return jump_; }

    /// N f(x) for a general f by adaptive quadrature.
    double apply_N(const Field& f, const Vec& x) const;
    /// (N - lambda0) f(x), the long-jump generator.
    double apply_R(const Field& f, const Vec& x) const;
    /// L f(x) + R f(x), the full generator.
    double apply_K(const Field& f, const Vec& x, double scale, double rtol = 1e-6) const;

    void apply_N(const LatticeFunction& in, LatticeFunction& out) const;
    /// exp(h (N - lambda0)) by the Poisson sum, remainder lumped into the last term.
    void long_jump_flow(const LatticeFunction& in, LatticeFunction& out, bool transpose = false) const;
    /// One full step: frozen half step, long-jump flow, frozen half step.
    void step(const LatticeFunction& in, LatticeFunction& out) const;
    /// U_h-only step (no long jumps).
    void frozen_step(const LatticeFunction& in, LatticeFunction& out) const;

    /// Number of steps for t; throws unless t is a multiple of the step.
    int steps_for(double t) const;
    /// States at the requested times (multiples of the step, ascending).
    std::vector<SemigroupState> march(const TestFunction& f, const std::vector<double>& times) const;
    std::vector<SemigroupState> march(const LatticeFunction& f0, const std::vector<double>& times) const;
    /// T_t f at an arbitrary point, using the exact frozen row at x for the last substep.
    double value_at(const SemigroupState& s, const TestFunction& f, const Vec& x) const;

    double T_apply(const TestFunction& f, double t, const Vec& x) const;
    std::vector<double> T_apply(const TestFunction& f, double t, const std::vector<Vec>& probes) const;
    /// Interlacing terms Psi_n for n <= n_max at the probes.
    SemigroupResult psi_series(const TestFunction& f, double t, const std::vector<Vec>& probes, int n_max) const;
    /// y -> p(t, x, y) on the lattice, with the far entry the mass off the lattice.
    LatticeFunction transition_density(double t, const Vec& x) const;

    /// Final frozen substep evaluated at an arbitrary point.
    double frozen_row_apply(const Vec& x, const LatticeFunction& in) const;

    HolderReport holder_estimate(const TestFunction& f, const std::vector<double>& times,
                                 const std::vector<std::pair<Vec, Vec>>& pairs, double gamma) const;
    SmoothingReport smoothing_estimate(const TestFunction& f, const std::vector<double>& times, double gamma) const;
    GeneratorReport generator_residual(const TestFunction& f, double t, const std::vector<Vec>& probes,
                                       double rtol = 1e-6) const;

private:
    void build_frozen();
    void build_jump();
    void frozen_row_into(const Vec& x, RowBuilder& rb, Stencil& st) const;

    std::shared_ptr<const FrozenKernel> kernel_;
    SemigroupOptions opt_;
    Lattice lat_;
    double lambda0_ = 0.0;
    std::vector<double> coord_rate_;
    std::vector<Rule> frozen_rules_;
    std::vector<Rule> jump_rules_;  ///< nodes w > 0 with weights gap(w) dw, both signs use them
    std::vector<double> jump_far_;  ///< per coordinate rate beyond the last node (both signs)
    SparseOperator frozen_, jump_;
    std::vector<double> poisson_;   ///< Poisson weights of the per-step sum
};

}  // namespace lf
