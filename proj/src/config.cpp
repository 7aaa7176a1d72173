#include "levyfeller/config.hpp"

#include "levyfeller/csv.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace lf {

namespace {

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
        std::ostringstream os;
        os << origin_;
        if (n.IsDefined() && n.Mark().line >= 0) os << ":" << n.Mark().line + 1 << ":" << n.Mark().column + 1;
        os << ": " << msg;
        throw ConfigError(os.str());
    }

    void keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& where) const {
        if (!n.IsMap()) fail(n, where + " must be a mapping");
        for (const auto& kv : n) {
            const std::string k = kv.first.as<std::string>();
            if (!allowed.count(k)) fail(kv.first, "unknown key '" + k + "' in " + where);
        }
    }

    template <class T>
    T get(const YAML::Node& n, const char* key, T def) const {
        const YAML::Node v = n[key];
        if (!v.IsDefined() || v.IsNull()) return def;
        try {
            return v.as<T>();
        } catch (const YAML::Exception&) {
            fail(v, std::string("bad value for '") + key + "'");
        }
    }

    std::vector<double> vec(const YAML::Node& n, const char* key, std::vector<double> def = {}) const {
        const YAML::Node v = n[key];
        if (!v.IsDefined() || v.IsNull()) return def;
        if (!v.IsSequence()) fail(v, std::string("'") + key + "' must be a list of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            try {
                out.push_back(e.as<double>());
            } catch (const YAML::Exception&) {
                fail(e, std::string("non-numeric entry in '") + key + "'");
            }
        }
        return out;
    }

    std::vector<std::vector<double>> mat(const YAML::Node& n, const char* key) const {
        const YAML::Node v = n[key];
        std::vector<std::vector<double>> out;
        if (!v.IsDefined() || v.IsNull()) return out;
        if (!v.IsSequence()) fail(v, std::string("'") + key + "' must be a list of lists");
        for (const auto& row : v) {
            if (!row.IsSequence()) fail(row, std::string("'") + key + "' rows must be lists");
            std::vector<double> r;
            for (const auto& e : row) {
                try {
                    r.push_back(e.as<double>());
                } catch (const YAML::Exception&) {
                    fail(e, std::string("non-numeric entry in '") + key + "'");
                }
            }
            out.push_back(std::move(r));
        }
        return out;
    }

    std::map<std::string, double> params(const YAML::Node& n, const std::set<std::string>& skip) const {
        std::map<std::string, double> out;
        for (const auto& kv : n) {
            const std::string k = kv.first.as<std::string>();
            if (skip.count(k)) continue;
            try {
                out[k] = kv.second.as<double>();
            } catch (const YAML::Exception&) {
                fail(kv.second, "parameter '" + k + "' must be numeric");
            }
        }
        return out;
    }

private:
    std::string origin_;
};

ModelSpec read_model(const Reader& r, const YAML::Node& n) {
    r.keys(n, {"family", "alpha", "mass", "csv", "beta", "c_lower", "c_upper", "eta4"}, "model");
    ModelSpec m;
    m.family = r.get<std::string>(n, "family", m.family);
    m.alpha = r.get<double>(n, "alpha", m.alpha);
    m.mass = r.get<double>(n, "mass", m.mass);
    m.csv = r.get<std::string>(n, "csv", "");
    m.beta = r.get<double>(n, "beta", m.family == "tabulated" ? m.beta : m.alpha);
    m.c_lower = r.get<double>(n, "c_lower", m.c_lower);
    m.c_upper = r.get<double>(n, "c_upper", m.c_upper);
    m.eta4 = r.get<double>(n, "eta4", m.eta4);
    static const std::set<std::string> families{"stable", "truncated_stable", "relativistic", "tabulated"};
    if (!families.count(m.family)) r.fail(n["family"], "unknown model family '" + m.family + "'");
    if (!(m.alpha > 0.0 && m.alpha < 2.0)) r.fail(n["alpha"], "alpha must lie in (0, 2)");
    if (m.family == "tabulated" && m.csv.empty()) r.fail(n, "tabulated model needs 'csv'");
    if (m.family != "tabulated") m.beta = m.alpha;
    return m;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        std::ostringstream os;
        os << origin << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
        throw ConfigError(os.str());
    }
    const Reader r(origin);
    if (!root.IsMap()) r.fail(root, "top level must be a mapping");
    r.keys(root, {"dim", "mode", "models", "field", "epsilon", "delta", "delta0", "tau", "density", "mesh", "lattice",
                  "tolerances", "times", "test_functions", "probes", "holder", "smoothing", "montecarlo", "output"},
           "config");
    ExperimentConfig c;
    c.dim = r.get<int>(root, "dim", 2);
    if (c.dim < 2) r.fail(root["dim"], "dimension must be at least 2");
    if (c.dim > 3) r.fail(root["dim"], "dimension above 3 is not supported");

    const std::string mode = r.get<std::string>(root, "mode", "Z1");
    if (mode == "Z1")
        c.mode = AssumptionMode::Z1;
    else if (mode == "Z2")
        c.mode = AssumptionMode::Z2;
    else
        r.fail(root["mode"], "mode must be Z1 or Z2");

    const YAML::Node models = root["models"];
    if (!models.IsDefined() || !models.IsSequence() || models.size() == 0)
        r.fail(models.IsDefined() ? models : root, "'models' must be a non-empty list");
    for (const auto& m : models) c.models.push_back(read_model(r, m));
    if (c.models.size() == 1)
        c.models.resize(c.dim, c.models.front());
    else if (static_cast<int>(c.models.size()) != c.dim)
        r.fail(models, "need one model per coordinate");
    const bool identical =
        std::all_of(c.models.begin(), c.models.end(), [&](const ModelSpec& m) { return m == c.models.front(); });
    double amin = 2.0, bmax = 0.0;
    for (const auto& m : c.models) {
        amin = std::min(amin, m.alpha);
        bmax = std::max(bmax, m.beta);
    }
    if (c.mode == AssumptionMode::Z1 && !identical) r.fail(models, "mode Z1 needs identical coordinate models");
    if (c.mode == AssumptionMode::Z2) {
        if (identical) r.fail(models, "mode Z2 needs coordinate models that are not all identical");
        if (!(amin > 2.0 * bmax / 3.0)) r.fail(models, "mode Z2 needs alpha > (2/3) beta across coordinates");
    }

    if (const YAML::Node f = root["field"]; f.IsDefined()) {
        r.keys(f, {"kind", "theta0", "kappa", "seed", "diagonal", "matrix", "csv"}, "field");
        c.field.kind = r.get<std::string>(f, "kind", c.field.kind);
        c.field.theta0 = r.get<double>(f, "theta0", c.field.theta0);
        c.field.kappa = r.get<double>(f, "kappa", c.field.kappa);
        c.field.seed = r.get<std::uint64_t>(f, "seed", c.field.seed);
        c.field.diagonal = r.vec(f, "diagonal");
        c.field.matrix = r.mat(f, "matrix");
        c.field.csv = r.get<std::string>(f, "csv", "");
        static const std::set<std::string> kinds{"identity", "constant", "diagonal", "rotation", "bump", "tabulated"};
        if (!kinds.count(c.field.kind)) r.fail(f["kind"], "unknown field kind '" + c.field.kind + "'");
    }

    c.epsilon = r.get<double>(root, "epsilon", c.epsilon);
    c.delta = r.get<double>(root, "delta", c.delta);
    c.delta0 = r.get<double>(root, "delta0", c.delta0);
    c.tau = r.get<double>(root, "tau", c.tau);
    if (!(c.epsilon > 0.0 && c.epsilon <= 1.0)) r.fail(root["epsilon"], "epsilon must lie in (0, 1]");
    if (c.delta < 0.0) r.fail(root["delta"], "delta must be positive (or 0 for automatic)");
    if (!(c.tau > 0.0)) r.fail(root["tau"], "tau must be positive");

    if (const YAML::Node d = root["density"]; d.IsDefined()) {
        r.keys(d, {"L", "n_min", "n_max", "spectral_tail", "jump_cells"}, "density");
        c.density.L = r.get<double>(d, "L", c.density.L);
        c.density.n_min = r.get<int>(d, "n_min", c.density.n_min);
        c.density.n_max = r.get<int>(d, "n_max", c.density.n_max);
        c.density.spectral_tail = r.get<double>(d, "spectral_tail", c.density.spectral_tail);
        c.density.jump_cells = r.get<double>(d, "jump_cells", c.density.jump_cells);
    }
    if (const YAML::Node m = root["mesh"]; m.IsDefined()) {
        r.keys(m, {"t_min", "inner_fraction", "jump_nodes", "jump_ratio", "core", "growth", "panel_nodes", "tail",
                   "time_nodes", "level_ratio"},
               "mesh");
        auto& o = c.mesh;
        o.t_floor = r.get<double>(m, "t_min", o.t_floor);
        o.inner_fraction = r.get<double>(m, "inner_fraction", o.inner_fraction);
        o.jump_nodes = r.get<int>(m, "jump_nodes", o.jump_nodes);
        o.jump_ratio = r.get<double>(m, "jump_ratio", o.jump_ratio);
        o.core = r.get<double>(m, "core", o.core);
        o.growth = r.get<double>(m, "growth", o.growth);
        o.panel_nodes = r.get<int>(m, "panel_nodes", o.panel_nodes);
        o.tail = r.get<double>(m, "tail", o.tail);
        o.time_nodes = r.get<int>(m, "time_nodes", o.time_nodes);
        o.level_ratio = r.get<double>(m, "level_ratio", o.level_ratio);
        if (!(o.t_floor > 0.0)) r.fail(m["t_min"], "t_min must be positive");
        if (!(o.growth > 1.0)) r.fail(m["growth"], "growth must exceed 1");
        if (!(o.level_ratio > 1.0)) r.fail(m["level_ratio"], "level_ratio must exceed 1");
    }
    if (const YAML::Node l = root["lattice"]; l.IsDefined()) {
        r.keys(l, {"half_width", "spacing", "step", "frozen_nodes", "jump_nodes", "jump_panel", "poisson_tol",
                   "series_cap"},
               "lattice");
        auto& o = c.lattice;
        o.half_width = r.get<double>(l, "half_width", o.half_width);
        o.spacing = r.get<double>(l, "spacing", o.spacing);
        o.step = r.get<double>(l, "step", o.step);
        o.frozen_nodes = r.get<int>(l, "frozen_nodes", o.frozen_nodes);
        o.jump_nodes = r.get<int>(l, "jump_nodes", o.jump_nodes);
        o.jump_panel = r.get<double>(l, "jump_panel", o.jump_panel);
        o.poisson_tol = r.get<double>(l, "poisson_tol", o.poisson_tol);
        o.series_cap = r.get<int>(l, "series_cap", o.series_cap);
        if (!(o.half_width > 0.0)) r.fail(l["half_width"], "half_width must be positive");
        if (!(o.spacing > 0.0 && o.spacing < o.half_width)) r.fail(l["spacing"], "spacing must lie in (0, half_width)");
        if (!(o.step > 0.0)) r.fail(l["step"], "step must be positive");
    }
    if (const YAML::Node t = root["tolerances"]; t.IsDefined()) {
        r.keys(t, {"rtol", "series_tol"}, "tolerances");
        c.rtol = r.get<double>(t, "rtol", c.rtol);
        c.lattice.series_tol = r.get<double>(t, "series_tol", c.lattice.series_tol);
        if (!(c.rtol > 0.0)) r.fail(t["rtol"], "rtol must be positive");
    }
    c.times = r.vec(root, "times", {0.05, 0.1, 0.25});
    for (double t : c.times)
        if (!(t > 0.0 && t <= c.tau)) r.fail(root["times"], "times must lie in (0, tau]");

    if (const YAML::Node fs = root["test_functions"]; fs.IsDefined()) {
        if (!fs.IsSequence()) r.fail(fs, "'test_functions' must be a list");
        for (const auto& f : fs) {
            if (!f.IsMap() || !f["name"].IsDefined()) r.fail(f, "test function entries need a 'name'");
            TestFunctionSpec s;
            s.name = f["name"].as<std::string>();
            s.params = r.params(f, {"name"});
            try {
                (void)make_test_function(s.name, c.dim, s.params);
            } catch (const std::invalid_argument& e) {
                r.fail(f, e.what());
            }
            c.functions.push_back(std::move(s));
        }
    } else {
        c.functions.push_back({"gauss_bump", {{"width", 0.25}}});
    }
    c.probes = r.mat(root, "probes");
    for (const auto& p : c.probes)
        if (static_cast<int>(p.size()) != c.dim) r.fail(root["probes"], "probe points must have dim coordinates");

    if (const YAML::Node h = root["holder"]; h.IsDefined()) {
        r.keys(h, {"gamma_fraction", "times", "separations", "base_points", "directions", "function"}, "holder");
        c.holder.gamma_fraction = r.get<double>(h, "gamma_fraction", c.holder.gamma_fraction);
        c.holder.times = r.vec(h, "times");
        c.holder.separations = r.vec(h, "separations");
        c.holder.base_points = r.mat(h, "base_points");
        c.holder.directions = r.mat(h, "directions");
        if (const YAML::Node f = h["function"]; f.IsDefined()) {
            if (!f.IsMap() || !f["name"].IsDefined()) r.fail(f, "holder function needs a 'name'");
            c.holder.function = f["name"].as<std::string>();
            c.holder.function_params = r.params(f, {"name"});
        }
    }
    if (c.holder.times.empty()) c.holder.times = {0.0625, 0.09375, 0.125, 0.1875, 0.25, 0.375};
    if (c.holder.separations.empty()) c.holder.separations = {0.0078125, 0.015625, 0.03125, 0.0625, 0.125, 0.25, 0.5, 1.0};
    if (c.holder.base_points.empty()) c.holder.base_points = {{0.5, 0.0}, {0.0, 0.5}, {0.5, 0.5}};
    if (c.holder.directions.empty()) c.holder.directions = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    if (const YAML::Node s = root["smoothing"]; s.IsDefined()) {
        r.keys(s, {"gamma", "times", "width"}, "smoothing");
        c.smoothing.gamma = r.get<double>(s, "gamma", c.smoothing.gamma);
        c.smoothing.times = r.vec(s, "times");
        c.smoothing.width = r.get<double>(s, "width", c.smoothing.width);
    }
    if (c.smoothing.times.empty()) c.smoothing.times = {0.0625, 0.09375, 0.125, 0.1875, 0.25, 0.375, 0.5};

    if (const YAML::Node m = root["montecarlo"]; m.IsDefined()) {
        r.keys(m, {"n_paths", "n_steps", "seed", "rho", "policy", "times"}, "montecarlo");
        c.mc.n_paths = r.get<std::size_t>(m, "n_paths", c.mc.n_paths);
        c.mc.n_steps = r.get<int>(m, "n_steps", c.mc.n_steps);
        c.mc.seed = r.get<std::uint64_t>(m, "seed", c.mc.seed);
        c.mc.rho = r.get<double>(m, "rho", c.mc.rho);
        const std::string pol = r.get<std::string>(m, "policy", "gaussian_surrogate");
        if (pol == "gaussian_surrogate")
            c.mc.policy = SmallJumpPolicy::GaussianSurrogate;
        else if (pol == "discard")
            c.mc.policy = SmallJumpPolicy::Discard;
        else
            r.fail(m["policy"], "policy must be gaussian_surrogate or discard");
        c.mc_times = r.vec(m, "times");
        if (c.mc.n_paths < 1) r.fail(m["n_paths"], "n_paths must be >= 1");
        if (c.mc.n_steps < 1) r.fail(m["n_steps"], "n_steps must be >= 1");
    }
    if (c.mc_times.empty()) c.mc_times = {0.25};
    c.output = r.get<std::string>(root, "output", c.output);
    c.source = YAML::Dump(root);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : cfg.source) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

LevyModel1D build_model(const ModelSpec& s) {
    if (s.family == "stable") return make_stable(s.alpha);
    if (s.family == "truncated_stable") return make_truncated_stable(s.alpha);
    if (s.family == "relativistic") return make_relativistic(s.alpha, s.mass);
    if (s.family == "tabulated") {
        const CsvTable t = read_csv(s.csv);
        if (t.header.size() < 2) throw ConfigError(s.csv + ": tabulated density needs two columns");
        std::vector<double> x, nu;
        for (const auto& row : t.rows) {
            x.push_back(row[0]);
            nu.push_back(row[1]);
        }
        return make_tabulated(x, nu, s.alpha, s.beta, s.c_lower, s.c_upper, s.eta4);
    }
    throw ConfigError("unknown model family '" + s.family + "'");
}

CoefficientField build_field(const FieldSpec& s, int dim) {
    if (s.kind == "identity") return make_identity_field(dim);
    if (s.kind == "rotation") return make_rotation_field(dim, s.theta0);
    if (s.kind == "bump") return make_bump_field(dim, s.kappa, s.seed);
    if (s.kind == "diagonal") {
        if (static_cast<int>(s.diagonal.size()) != dim) throw ConfigError("diagonal field needs dim entries");
        return make_diagonal_field(s.diagonal);
    }
    if (s.kind == "constant") {
        if (static_cast<int>(s.matrix.size()) != dim) throw ConfigError("constant field needs a dim x dim matrix");
        Mat A(dim, dim);
        for (int i = 0; i < dim; ++i) {
            if (static_cast<int>(s.matrix[i].size()) != dim) throw ConfigError("constant field needs a dim x dim matrix");
            for (int j = 0; j < dim; ++j) A(i, j) = s.matrix[i][j];
        }
        return make_constant_field(A);
    }
    if (s.kind == "tabulated") return load_tabulated_field(s.csv, dim);
    throw ConfigError("unknown field kind '" + s.kind + "'");
}

Pipeline build_pipeline(const ExperimentConfig& cfg) {
    Pipeline p;
    p.field = build_field(cfg.field, cfg.dim);
    // Identical specs share one model, truncation and density provider.
    std::vector<int> first(cfg.dim);
    std::vector<const LevyModel1D*> raw;
    for (int i = 0; i < cfg.dim; ++i) {
        first[i] = i;
        for (int j = 0; j < i; ++j)
            if (cfg.models[j] == cfg.models[i]) {
                first[i] = j;
                break;
            }
        p.models.push_back(first[i] == i ? std::make_shared<const LevyModel1D>(build_model(cfg.models[i]))
                                         : p.models[first[i]]);
        raw.push_back(p.models.back().get());
    }
    check_mode(cfg.mode, raw);
    double amin = 2.0, bmax = 0.0;
    for (const auto* m : raw) {
        amin = std::min(amin, m->alpha);
        bmax = std::max(bmax, m->beta);
    }
    p.delta = cfg.delta > 0.0 ? cfg.delta : choose_delta(cfg.epsilon, DeltaInputs{amin, bmax, cfg.dim, p.field.eta1, cfg.delta0});
    for (int i = 0; i < cfg.dim; ++i) {
        if (first[i] != i) {
            p.truncated.push_back(p.truncated[first[i]]);
            p.providers.push_back(p.providers[first[i]]);
            continue;
        }
        p.truncated.push_back(std::make_shared<const TruncatedModel1D>(truncate(p.models[i], p.delta, cfg.delta0)));
        p.providers.push_back(std::make_shared<DensityProvider>(p.truncated.back(), cfg.density));
    }
    p.kernel = std::make_shared<const FrozenKernel>(p.field, p.providers, 1e-4, cfg.tau);
    return p;
}

std::vector<Vec> probe_points(const ExperimentConfig& cfg) {
    std::vector<Vec> out;
    if (cfg.probes.empty()) {
        const double base[5][2] = {{0.0, 0.0}, {0.25, -0.1}, {-0.3, 0.2}, {0.5, 0.3}, {-0.1, -0.45}};
        for (const auto& b : base) {
            Vec x = Vec::Zero(cfg.dim);
            x[0] = b[0];
            x[1] = b[1];
            out.push_back(x);
        }
        return out;
    }
    for (const auto& p : cfg.probes) out.push_back(Eigen::Map<const Eigen::VectorXd>(p.data(), cfg.dim));
    return out;
}

std::vector<std::pair<Vec, Vec>> holder_pairs(const ExperimentConfig& cfg, double scale) {
    std::vector<std::pair<Vec, Vec>> out;
    for (const auto& b : cfg.holder.base_points) {
        if (static_cast<int>(b.size()) != cfg.dim) throw ConfigError("holder base points must have dim coordinates");
        const Vec x = Eigen::Map<const Eigen::VectorXd>(b.data(), cfg.dim);
        for (const auto& d : cfg.holder.directions) {
            if (static_cast<int>(d.size()) != cfg.dim) throw ConfigError("holder directions must have dim coordinates");
            Vec u = Eigen::Map<const Eigen::VectorXd>(d.data(), cfg.dim);
            if (u.norm() == 0.0) throw ConfigError("holder direction must be nonzero");
            u /= u.norm();
            for (double r : cfg.holder.separations) out.emplace_back(x - 0.5 * scale * r * u, x + 0.5 * scale * r * u);
        }
    }
    return out;
}

}  // namespace lf
