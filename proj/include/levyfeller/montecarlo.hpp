#pragma once

#include "levyfeller/frozen_kernel.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace lf {

/// Counter-based stream: output k is a SplitMix64 finalisation of (key, k),
/// with key derived from seed, path index and step index.
class CounterRng {
public:
    using result_type = std::uint64_t;
    CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t step = 0);
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();
    /// Uniform on the open interval (0, 1).
    double uniform();

private:
    std::uint64_t key_, ctr_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

enum class SmallJumpPolicy { GaussianSurrogate, Discard };

struct SimConfig {
    std::size_t n_paths = 1000000;
    int n_steps = 256;
    std::uint64_t seed = 20240611ULL;
    SmallJumpPolicy policy = SmallJumpPolicy::GaussianSurrogate;
    double rho = 0.0;  ///< compound-Poisson cut; 0 selects delta / 4
};

/// Sampler of increments Z_{t+dt} - Z_t of one coordinate.
class IncrementSampler {
public:
    IncrementSampler(const LevyModel1D& model, double rho, SmallJumpPolicy policy);
    double sample(double dt, CounterRng& rng) const;
    double jump_rate() const { return rate_; }        ///< jumps above rho per unit time, both signs
    double small_variance() const { return var_; }    ///< below-cut variance per unit time
    bool exact_stable() const { return stable_; }

private:
    double jump_size(CounterRng& rng) const;
    bool stable_ = false;
    double alpha_ = 1.0;
    double rho_ = 0.0, rate_ = 0.0, var_ = 0.0;
    SmallJumpPolicy policy_;
    std::vector<double> log_tail_, log_r_;  ///< inverse-CDF table of the one-sided tail
};

struct MCEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n_paths = 0;
    double elapsed = 0.0;
};

struct ZReport {
    double diff = 0.0;
    double z = 0.0;
    bool pass = false;
};

class EulerSimulator {
public:
    EulerSimulator(CoefficientField field, std::vector<std::shared_ptr<const LevyModel1D>> models, SimConfig cfg,
                   double delta);

    const SimConfig& config() const { return cfg_; }
    const IncrementSampler& sampler(int i) const { return samplers_[i]; }
    double rho() const { return rho_; }

    Vec euler_path(const Vec& x0, double t, std::uint64_t path) const;
    /// Endpoints of all paths, in path order.
    std::vector<Vec> endpoints(const Vec& x0, double t) const;
    MCEstimate estimate_Ptf(const Vec& x0, const std::function<double(const Vec&)>& f, double t) const;

private:
    CoefficientField field_;
    std::vector<std::shared_ptr<const LevyModel1D>> models_;
    SimConfig cfg_;
    double rho_;
    std::vector<IncrementSampler> samplers_;
};

/// z = diff / (stderr + model_tol); pass iff |z| <= 3.
ZReport compare(double parametrix_value, const MCEstimate& mc, double model_tol);

/// Sum in fixed pairwise order, independent of thread count.
double pairwise_sum(const double* v, std::size_t n);

struct ChiSquareReport {
    double statistic = 0.0;
    int dof = 0;
    double critical = 0.0;  ///< 99% quantile
    double p_value = 1.0;
    bool pass = false;
};

/// Pearson test of samples against a CDF, with equiprobable-ish bins on [lo, hi] plus two tail bins.
ChiSquareReport chi_square_vs_cdf(const std::vector<double>& samples, const std::function<double(double)>& cdf,
                                  double lo, double hi, int bins);

}  // namespace lf
