#pragma once

#include "levyfeller/levy_models.hpp"

#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace lf {

enum class TaperKind { Quintic, Hard, RatioProfile };

struct TaperReport {
    bool c1 = true;
    bool nonincreasing = true;
    bool ratio_monotone = true;
    bool bounded_by_nu = true;
    double worst_jump = 0.0;        ///< largest relative derivative jump
    double worst_slope = 0.0;       ///< largest positive mu'
    double worst_ratio_rise = 0.0;  ///< largest relative rise of -mu'/x
    double first_violation_x = 0.0;
    std::string first_violation;
    int grid_points = 1025;
    bool ok() const { return c1 && nonincreasing && ratio_monotone && bounded_by_nu; }
};

/// Truncated jump density mu supported in [-2 delta, 2 delta] with a C^1 taper.
class TruncatedModel1D {
public:
    TruncatedModel1D(std::shared_ptr<const LevyModel1D> base, double delta, TaperKind kind, double power = 1.0);

    const LevyModel1D& base() const { return *base_; }
    std::shared_ptr<const LevyModel1D> base_ptr() const { return base_; }
    double delta() const { return delta_; }
    TaperKind kind() const { return kind_; }
    double power() const { return power_; }

    double mu(double x) const;
    double dmu(double x) const;
    /// nu - mu, the long-jump density.
    double gap(double x) const { return base_->nu(x) - mu(x); }
    double psi_delta(double xi) const;
    double mass_defect() const { return mass_defect_; }
    /// Integral of x^2 mu over the real line.
    double second_moment() const { return second_moment_; }
    /// Rate of jumps of size above r in the long-jump part (both sides).
    double gap_mass_above(double r) const;

private:
    double taper_value(double x) const;
    std::shared_ptr<const LevyModel1D> base_;
    double delta_;
    TaperKind kind_;
    double power_;
    double profile_k_ = 1.0;
    double profile_c_ = 0.0;
    double mass_defect_ = 0.0;
    double second_moment_ = 0.0;
};

struct DeltaInputs {
    double alpha, beta;
    int d;
    double eta1;
    double delta0 = 1.0 / 24.0;
};

double choose_delta(double epsilon, const DeltaInputs& in);

TaperReport validate_taper(const TruncatedModel1D& tm);

/// Builds the truncation, trying the quintic blend with steepening first and
/// falling back to the ratio profile taper.
TruncatedModel1D truncate(std::shared_ptr<const LevyModel1D> model, double delta, double delta0 = 1.0 / 24.0);

double lambda_zero(const std::vector<TruncatedModel1D>& tms);

std::string taper_name(const TruncatedModel1D& tm);

}  // namespace lf
