#pragma once

#include "levyfeller/montecarlo.hpp"
#include "levyfeller/parametrix.hpp"
#include "levyfeller/semigroup.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lf {

/// Configuration problem, with the source position when known.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelSpec {
    std::string family = "truncated_stable";
    double alpha = 1.0;
    double mass = 1.0;  ///< relativistic mass
    std::string csv;    ///< tabulated nu
    double beta = 1.0, c_lower = 1.0, c_upper = 1.0, eta4 = 1.0;
    bool operator==(const ModelSpec&) const = default;
};

struct FieldSpec {
    std::string kind = "rotation";
    double theta0 = 0.5;
    double kappa = 0.2;
    std::uint64_t seed = 7;
    std::vector<double> diagonal;
    std::vector<std::vector<double>> matrix;
    std::string csv;
};

struct TestFunctionSpec {
    std::string name;
    std::map<std::string, double> params;
};

struct HolderSpec {
    double gamma_fraction = 0.5;  ///< gamma = fraction * alpha
    std::vector<double> times;
    std::vector<double> separations;
    std::vector<std::vector<double>> base_points;
    std::vector<std::vector<double>> directions;
    std::string function = "indicator_box";
    std::map<std::string, double> function_params;
};

struct SmoothingSpec {
    double gamma = 0.45;
    std::vector<double> times;
    double width = 0.05;
};

struct ExperimentConfig {
    int dim = 2;
    AssumptionMode mode = AssumptionMode::Z1;
    std::vector<ModelSpec> models;
    FieldSpec field;
    double epsilon = 1.0;
    double delta = 0.0;  ///< 0 selects choose_delta
    double delta0 = 1.0 / 24.0;
    double tau = 1.0;
    GridPolicy density;
    ParametrixOptions mesh;
    SemigroupOptions lattice;
    double rtol = 1e-6;
    std::vector<double> times;
    std::vector<TestFunctionSpec> functions;
    std::vector<std::vector<double>> probes;
    HolderSpec holder;
    SmoothingSpec smoothing;
    SimConfig mc;
    std::vector<double> mc_times;
    std::string output = "out";
    std::string source;  ///< canonical text of the parsed file, for hashing
};

/// Parses and validates; unknown keys and type errors report line and column.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");

/// FNV-1a of the canonical config text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Objects built from a configuration.
struct Pipeline {
    std::vector<std::shared_ptr<const LevyModel1D>> models;
    std::vector<std::shared_ptr<const TruncatedModel1D>> truncated;
    std::vector<std::shared_ptr<DensityProvider>> providers;
    std::shared_ptr<const FrozenKernel> kernel;
    CoefficientField field;
    double delta = 0.0;
};

LevyModel1D build_model(const ModelSpec& spec);
CoefficientField build_field(const FieldSpec& spec, int dim);
Pipeline build_pipeline(const ExperimentConfig& cfg);
std::vector<Vec> probe_points(const ExperimentConfig& cfg);
/// Pairs centred on each base point, one per direction and separation (times scale).
std::vector<std::pair<Vec, Vec>> holder_pairs(const ExperimentConfig& cfg, double scale = 1.0);

}  // namespace lf
