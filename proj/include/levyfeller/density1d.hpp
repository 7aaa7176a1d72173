#pragma once

#include "levyfeller/levy_models.hpp"
#include "levyfeller/truncation.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace lf {

/// Truncated 1-D transition density at one time on a uniform periodic grid.
struct DensitySlice {
    double t = 0.0;
    double L = 0.0;
    double dx = 0.0;
    int n = 0;
    std::vector<double> g, g1, g2, gt, gt1;
    double mass_error = 0.0;
    double symmetry_error = 0.0;
    double most_negative = 0.0;
    double tail_rate = 0.0;

    double x_at(int k) const { return -L + k * dx; }
    double value(double x) const { return hermite(g, g1, x); }
    double deriv(double x) const { return hermite(g1, g2, x); }
    double second(double x) const;
    /// Time derivative, which equals the truncated generator applied to g.
    double time_deriv(double x) const { return hermite(gt, gt1, x); }

private:
    double hermite(const std::vector<double>& f, const std::vector<double>& df, double x) const;
};

struct GridPolicy {
    double L = 0.0;  ///< 0 selects the automatic half-width
    int n_min = 1024;
    int n_max = 1 << 22;
    double spectral_tail = 1e-14;
    double jump_cells = 32.0;  ///< grid cells per truncation radius, so jump second differences are resolved
};

struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thread-safe producer of density slices for one truncated model.
class DensityProvider {
public:
    explicit DensityProvider(std::shared_ptr<const TruncatedModel1D> tm, GridPolicy policy = {});

    std::shared_ptr<const DensitySlice> slice(double t) const;
    /// Builds a slice on an explicit grid without caching.
    DensitySlice build(double t, double L, int n) const;

    const TruncatedModel1D& model() const { return *tm_; }
    std::shared_ptr<const TruncatedModel1D> model_ptr() const { return tm_; }
    double auto_half_width(double t) const;
    int auto_points(double t, double L) const;
    /// psi_delta at xi = m * pi / L.
    double spectrum(double L, int m) const;
    void clear() const;

private:
    const std::vector<double>& spectrum_upto(double L, int mmax) const;
    std::shared_ptr<const TruncatedModel1D> tm_;
    GridPolicy policy_;
    mutable std::mutex mu_;
    mutable std::map<double, std::shared_ptr<const DensitySlice>> slices_;
    mutable std::map<double, std::vector<double>> spectra_;
};

/// Densities for a list of times on one shared grid.
struct DensityTable {
    std::shared_ptr<const TruncatedModel1D> tmodel;
    std::vector<double> times;
    double L = 0.0;
    int n = 0;
    std::vector<DensitySlice> slices;
};

DensityTable compute_density(const DensityProvider& provider, const std::vector<double>& times, double L = 0.0,
                             int n = 0);

struct EnvelopeParams {
    double epsilon = 1.0;
    double tau = 1.0;
    double c_eps = 0.0;
    int dim = 2;
    double alpha = 1.0;
    double beta = 1.0;
};

EnvelopeParams make_envelope(const ConcentrationTable& ct, double epsilon, double tau, int dim, double alpha,
                             double beta);
double envelope_gstar(const ConcentrationTable& ct, double t, double x);
double envelope_gtilde(const EnvelopeParams& env, const ConcentrationTable& ct, double t, double x);

struct EnvelopeReport {
    std::vector<double> ratio_value, ratio_d1, ratio_d2;
    bool finite = true;
    bool stable = true;
};

EnvelopeReport check_envelope(const DensityTable& table, const EnvelopeParams& env, const ConcentrationTable& ct);

/// Sup-norm distance between g_{t+s} and the grid convolution g_t * g_s, all on one grid.
double chapman_kolmogorov_error(const DensityProvider& provider, double t, double s, double* sup_norm = nullptr);

/// Direct cosine-integral value of g_t(0).
double density_at_zero_quadrature(const TruncatedModel1D& tm, double t);

/// Distribution function of Z_t for the untruncated model, by the sine-integral inversion formula.
double untruncated_cdf(const LevyModel1D& m, double t, double x);

}  // namespace lf
