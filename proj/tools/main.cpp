#include "levyfeller/config.hpp"
#include "levyfeller/csv.hpp"
#include "levyfeller/density1d.hpp"
#include "levyfeller/montecarlo.hpp"
#include "levyfeller/parametrix.hpp"
#include "levyfeller/semigroup.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace lf;

namespace {

enum Exit { Ok = 0, Invalid = 1, Diverged = 2, Io = 3 };

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

/// Output directory with a manifest listing every file written.
class Run {
public:
    Run(std::string command, const ExperimentConfig& cfg, const std::string& config_path, const std::string& out)
        : command_(std::move(command)), dir_(out), start_(std::chrono::steady_clock::now()) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
        manifest_["command"] = command_;
        manifest_["config"] = config_path;
        manifest_["config_hash"] = config_hash(cfg);
        manifest_["seed"] = cfg.mc.seed;
        manifest_["threads"] = omp_get_max_threads();
        manifest_["started"] = timestamp();
        auto& v = manifest_["versions"];
        v["levyfeller"] = "1.0.0";
        v["compiler"] = __VERSION__;
        v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                     std::to_string(EIGEN_MINOR_VERSION);
        v["boost"] = BOOST_LIB_VERSION;
        v["fftw"] = std::string(fftw_version);
    }

    std::string path(const std::string& name) {
        files_.push_back(name);
        return (dir_ / name).string();
    }
    void timing(const std::string& what, double s) { manifest_["timings"][what] = s; }
    void note(const std::string& key, nlohmann::json v) { manifest_["results"][key] = std::move(v); }

    void finish(int status) {
        manifest_["files"] = files_;
        manifest_["status"] = status;
        manifest_["timings"]["total"] = seconds_since(start_);
        manifest_["finished"] = timestamp();
        std::ofstream out(dir_ / "manifest.json");
        if (!out) throw IoError("cannot write manifest in " + dir_.string());
        out << manifest_.dump(2) << "\n";
    }
    std::string dir() const { return dir_.string(); }

private:
    std::string command_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    nlohmann::json manifest_;
    std::vector<std::string> files_;
};

std::vector<std::string> coord_header(const char* prefix, int d) {
    std::vector<std::string> h;
    for (int i = 0; i < d; ++i) h.push_back(prefix + std::to_string(i + 1));
    return h;
}

int cmd_validate(const ExperimentConfig& cfg, const Pipeline& p, Run& run) {
    CsvWriter w(run.path("validate.csv"), {"check", "coordinate", "pass", "margin"});
    bool all = true;
    auto record = [&](const std::string& check, int coord, bool ok, double margin) {
        w.row(std::vector<std::string>{check, std::to_string(coord), ok ? "1" : "0", format_double(margin)});
        all = all && ok;
    };
    for (int i = 0; i < cfg.dim; ++i) {
        const RegularityReport reg = check_regularity(*p.models[i]);
        record("levy_density", i, reg.ok(), std::min(reg.worst_smooth_margin, reg.worst_ratio_margin));
        const ScalingReport s = verify_scaling(*p.models[i]);
        record("scaling_lower", i, !s.lower_violated, s.c_lower_candidate);
        record("scaling_upper", i, !s.upper_violated, s.c_upper_candidate);
        const TaperReport t = validate_taper(*p.truncated[i]);
        record("taper", i, t.ok(), -t.worst_jump);
    }
    const FieldReport a = validate_field(p.field, default_validation_lattice(cfg.dim));
    record("field_bound", -1, a.bound_margin >= -1e-12, a.bound_margin);
    record("field_determinant", -1, a.det_margin >= -1e-12, a.det_margin);
    record("field_lipschitz", -1, a.lip_margin >= -1e-12, a.lip_margin);
    record("field_normalization", -1, a.normalization_ok, 0.0);
    run.note("delta", p.delta);
    run.note("passed", all);
    if (!all) std::cerr << "validation failed, see " << run.dir() << "/validate.csv\n";
    return all ? Ok : Invalid;
}

int cmd_density(const ExperimentConfig& cfg, const Pipeline& p, Run& run) {
    CsvWriter summary(run.path("density_summary.csv"),
                      {"coordinate", "t", "mass_error", "symmetry_error", "most_negative", "g0"});
    for (int i = 0; i < cfg.dim; ++i) {
        const DensityTable tab = compute_density(*p.providers[i], cfg.times, cfg.density.L);
        std::vector<std::string> head{"x"};
        for (double t : tab.times) head.push_back("g_t" + format_double(t));
        CsvWriter w(run.path("density_" + std::to_string(i + 1) + ".csv"), head);
        // At most about 4096 rows inside the lattice window.
        const double window = std::min(tab.L, cfg.lattice.half_width);
        const int first = static_cast<int>(std::ceil((tab.L - window) / tab.slices[0].dx));
        const int last = tab.n - first;
        const int stride = std::max(1, (last - first) / 4096);
        for (int k = first; k <= last && k < tab.n; k += stride) {
            std::vector<double> row{tab.slices[0].x_at(k)};
            for (const auto& s : tab.slices) row.push_back(s.g[k]);
            w.row(row);
        }
        for (const auto& s : tab.slices)
            summary.row({static_cast<double>(i + 1), s.t, s.mass_error, s.symmetry_error, s.most_negative,
                         s.value(0.0)});
    }
    return Ok;
}

int cmd_kernel(const ExperimentConfig& cfg, const Pipeline& p, Run& run) {
    Parametrix par(p.kernel, cfg.mode, cfg.mesh);
    const auto probes = probe_points(cfg);
    const double tmax = *std::max_element(cfg.times.begin(), cfg.times.end());
    auto head = coord_header("x", cfg.dim);
    for (const char* c : {"t", "mass", "frozen_mass", "min_u", "max_abs_correction", "q0_l1_scaled",
                          "q0_max_scaled"})
        head.push_back(c);
    CsvWriter w(run.path("kernel.csv"), head);
    double worst_mass = 0.0, worst_min = 0.0;
    const double alpha = p.models.front()->alpha, beta = p.models.front()->beta;
    for (const Vec& x : probes) {
        const auto t0 = std::chrono::steady_clock::now();
        const RowHistory corr = par.correction_row(x, tmax, cfg.times);
        const URowReport rep = par.u_report(corr, x, cfg.times);
        for (std::size_t k = 0; k < rep.times.size(); ++k) {
            const double t = rep.times[k];
            const RowGrid grid = par.make_grid(t, x, p.kernel->inverse().at(x), par.jump_reach());
            double qmax = 0.0;
            for (std::size_t j = 0; j < grid.size(); ++j) qmax = std::max(qmax, std::abs(par.q0(t, x, grid.point(j))));
            std::vector<double> row(x.data(), x.data() + cfg.dim);
            row.insert(row.end(), {t, rep.mass[k], rep.frozen_mass[k], rep.min_value[k], rep.max_abs_correction[k],
                                   std::pow(t, par.sigma()) * par.q0_l1(t, x),
                                   qmax * std::pow(t, (cfg.dim + beta) / alpha)});
            w.row(row);
            worst_mass = std::max(worst_mass, std::abs(rep.mass[k] - 1.0));
            worst_min = std::min(worst_min, rep.min_value[k]);
        }
        run.timing("probe_" + std::to_string(&x - probes.data()), seconds_since(t0));
    }
    run.note("worst_mass_error", worst_mass);
    run.note("most_negative", worst_min);
    if (!std::isfinite(worst_mass)) throw DivergenceError("kernel mass is not finite");
    return Ok;
}

std::vector<double> lattice_times(const ExperimentConfig& cfg, const std::vector<double>& times) {
    std::vector<double> out;
    for (double t : times) {
        const double n = std::round(t / cfg.lattice.step);
        if (std::abs(n * cfg.lattice.step - t) > 1e-12 * std::max(1.0, t))
            throw ConfigError("time " + format_double(t) + " is not a multiple of lattice.step");
        out.push_back(n * cfg.lattice.step);
    }
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_semigroup(const ExperimentConfig& cfg, const Pipeline& p, Run& run) {
    const auto t0 = std::chrono::steady_clock::now();
    LatticeSemigroup sg(p.kernel, cfg.lattice);
    run.timing("build", seconds_since(t0));
    const auto probes = probe_points(cfg);
    const auto times = lattice_times(cfg, cfg.times);
    auto head = std::vector<std::string>{"function", "t"};
    for (auto& h : coord_header("x", cfg.dim)) head.push_back(h);
    head.push_back("value");
    CsvWriter w(run.path("semigroup.csv"), head);
    for (const auto& spec : cfg.functions) {
        const TestFunction f = make_test_function(spec.name, cfg.dim, spec.params);
        const auto t1 = std::chrono::steady_clock::now();
        const auto states = sg.march(f, times);
        for (const auto& s : states)
            for (const Vec& x : probes) {
                std::vector<std::string> row{f.name, format_double(s.t)};
                for (int i = 0; i < cfg.dim; ++i) row.push_back(format_double(x[i]));
                const double v = sg.value_at(s, f, x);
                if (!std::isfinite(v)) throw DivergenceError("non-finite semigroup value for " + f.name);
                row.push_back(format_double(v));
                w.row(row);
            }
        run.timing("march_" + f.name, seconds_since(t1));
    }
    return Ok;
}

int cmd_mc_compare(const ExperimentConfig& cfg, const Pipeline& p, Run& run) {
    LatticeSemigroup sg(p.kernel, cfg.lattice);
    EulerSimulator sim(p.field, p.models, cfg.mc, p.delta);
    const auto probes = probe_points(cfg);
    const auto times = lattice_times(cfg, cfg.mc_times);
    auto head = std::vector<std::string>{"function", "t"};
    for (auto& h : coord_header("x", cfg.dim)) head.push_back(h);
    for (const char* c : {"lattice", "mc_mean", "mc_stderr", "model_tol", "diff", "z", "pass"}) head.push_back(c);
    CsvWriter w(run.path("mc_compare.csv"), head);
    bool all = true;
    for (const auto& spec : cfg.functions) {
        const TestFunction f = make_test_function(spec.name, cfg.dim, spec.params);
        const auto states = sg.march(f, times);
        for (const auto& s : states)
            for (const Vec& x : probes) {
                const double v = sg.value_at(s, f, x);
                const MCEstimate est = sim.estimate_Ptf(x, f.f, s.t);
                // 3 (stderr + tol) = 3 stderr + 2e-3 |f|.
                const double tol = 2e-3 * f.sup_norm / 3.0;
                const ZReport z = compare(v, est, tol);
                all = all && z.pass;
                std::vector<std::string> row{f.name, format_double(s.t)};
                for (int i = 0; i < cfg.dim; ++i) row.push_back(format_double(x[i]));
                for (double c : {v, est.mean, est.stderr_, tol, z.diff, z.z}) row.push_back(format_double(c));
                row.push_back(z.pass ? "1" : "0");
                w.row(row);
            }
    }
    run.note("all_pass", all);
    return all ? Ok : Diverged;
}

int cmd_holder_scan(const ExperimentConfig& cfg, const Pipeline& p, Run& run) {
    LatticeSemigroup sg(p.kernel, cfg.lattice);
    const double alpha = p.models.front()->alpha;
    const double gamma = cfg.holder.gamma_fraction * alpha;
    const TestFunction f = make_test_function(cfg.holder.function, cfg.dim, cfg.holder.function_params);
    const auto times = lattice_times(cfg, cfg.holder.times);
    const HolderReport full = sg.holder_estimate(f, times, holder_pairs(cfg, 1.0), gamma);
    const HolderReport half = sg.holder_estimate(f, times, holder_pairs(cfg, 0.5), gamma);
    CsvWriter w(run.path("holder.csv"), {"t", "R_t", "R_t_half_separation", "halving_ratio"});
    for (std::size_t k = 0; k < full.times.size(); ++k)
        w.row({full.times[k], full.ratio[k], half.ratio[k], half.ratio[k] / full.ratio[k]});
    CsvWriter fit(run.path("holder_fit.csv"), {"fit", "slope", "target", "relative_error"});
    fit.row(std::vector<std::string>{"holder", format_double(full.slope), format_double(full.target),
                                     format_double(std::abs(full.slope - full.target) / std::abs(full.target))});
    const TestFunction bump = unit_mass_bump(Vec::Zero(cfg.dim), cfg.smoothing.width);
    const SmoothingReport sm = sg.smoothing_estimate(bump, lattice_times(cfg, cfg.smoothing.times), cfg.smoothing.gamma);
    fit.row(std::vector<std::string>{"smoothing", format_double(sm.slope), format_double(sm.exponent),
                                     format_double((sm.slope - sm.exponent) / std::abs(sm.exponent))});
    CsvWriter s(run.path("smoothing.csv"), {"t", "sup"});
    for (std::size_t k = 0; k < sm.times.size(); ++k) s.row({sm.times[k], sm.sup[k]});
    return Ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parametrix construction of Levy-driven SDE transition densities and semigroups"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    int threads = 0;
    std::optional<std::uint64_t> seed;
    std::optional<double> rtol;
    app.add_option("--config", config_path, "experiment config (YAML)")->required();
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--threads", threads, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "Monte Carlo seed (overrides config)");
    app.add_option("--rtol", rtol, "relative tolerance (overrides config)")->check(CLI::PositiveNumber);

    using Handler = int (*)(const ExperimentConfig&, const Pipeline&, Run&);
    const std::vector<std::tuple<std::string, std::string, Handler>> commands{
        {"validate", "check model, truncation and field assumptions", cmd_validate},
        {"density", "1-D truncated densities", cmd_density},
        {"kernel", "parametrix kernel rows at the probes", cmd_kernel},
        {"semigroup", "lattice semigroup at the probes", cmd_semigroup},
        {"mc-compare", "lattice semigroup against Monte Carlo", cmd_mc_compare},
        {"holder-scan", "Holder ratio and smoothing fits", cmd_holder_scan}};
    for (const auto& [name, help, h] : commands) app.add_subcommand(name, help)->fallthrough();
    CLI11_PARSE(app, argc, argv);

    if (threads > 0) omp_set_num_threads(threads);
    Handler handler = nullptr;
    std::string name;
    for (const auto& [n, help, h] : commands)
        if (app.got_subcommand(n)) {
            handler = h;
            name = n;
        }

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        if (seed) cfg.mc.seed = *seed;
        if (rtol) cfg.rtol = *rtol;
        if (!out_dir.empty()) cfg.output = out_dir;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return Invalid;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return Io;
    }

    try {
        Run run(name, cfg, config_path, cfg.output);
        int status = Ok;
        try {
            const auto t0 = std::chrono::steady_clock::now();
            const Pipeline p = build_pipeline(cfg);
            run.timing("pipeline", seconds_since(t0));
            status = handler(cfg, p, run);
        } catch (const ConfigError& e) {
            std::cerr << name << ": config error: " << e.what() << "\n";
            status = Invalid;
        } catch (const std::invalid_argument& e) {
            std::cerr << name << ": invalid input: " << e.what() << "\n";
            status = Invalid;
        } catch (const DivergenceError& e) {
            std::cerr << name << ": divergence: " << e.what() << "\n";
            status = Diverged;
        } catch (const ResolutionError& e) {
            std::cerr << name << ": resolution: " << e.what() << "\n";
            status = Diverged;
        }
        run.finish(status);
        return status;
    } catch (const IoError& e) {
        std::cerr << name << ": i/o error: " << e.what() << "\n";
        return Io;
    } catch (const std::exception& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return Diverged;
    }
}
