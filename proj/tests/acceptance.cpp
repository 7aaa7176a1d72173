// Desk-scale acceptance suite. One line per criterion: "criterion N PASS|FAIL <name>: <details>".
// Usage: acceptance [N ...]; with no arguments every criterion runs.

#include "levyfeller/config.hpp"
#include "levyfeller/density1d.hpp"
#include "levyfeller/montecarlo.hpp"
#include "levyfeller/parametrix.hpp"
#include "levyfeller/semigroup.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

using namespace lf;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kMassTol1D = 1e-6;
constexpr double kEvenTol1D = 1e-10;
constexpr double kCkTol1D = 1e-6;
constexpr double kSlopeTol = 0.02;
constexpr double kQ0ScaledTol = 1e-8;
constexpr double kConstCorrTol = 1e-6;
constexpr double kQ0StabilityFactor = 3.0;
constexpr double kKernelMassTol = 1e-3;
constexpr double kKernelMinTol = -1e-6;
constexpr double kUnitTol = 1e-3;
constexpr double kSemigroupCkTol = 5e-3;
constexpr double kGeneratorTol = 5e-3;
constexpr double kHolderSlopeTol = 0.15;
constexpr double kHolderHalvingFactor = 2.0;
constexpr double kSmoothingSlack = 0.15;
constexpr double kMcModelTol = 2e-3;

struct Line {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

const ExperimentConfig& desk_config() {
    static const ExperimentConfig cfg = load_config(LF_DEFAULT_CONFIG);
    return cfg;
}

const Pipeline& desk() {
    static const Pipeline p = build_pipeline(desk_config());
    return p;
}

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Line c1_density_mass() {
    const std::vector<double> times{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5};
    double worst_mass = 0.0, worst_even = 0.0;
    for (int i = 0; i < desk_config().dim; ++i)
        for (double t : times) {
            const auto s = desk().providers[i]->slice(t);
            double mass = 0.0;
            for (double g : s->g) mass += g;
            worst_mass = std::max(worst_mass, std::abs(mass * s->dx - 1.0));
            for (int k = 1; k < s->n; ++k) worst_even = std::max(worst_even, std::abs(s->g[k] - s->g[s->n - k]));
        }
    return {worst_mass <= kMassTol1D && worst_even <= kEvenTol1D,
            fmt("max |mass-1| = %.2e (tol %.0e), max |g(x)-g(-x)| = %.2e (tol %.0e)", worst_mass, kMassTol1D,
                worst_even, kEvenTol1D)};
}

Line c2_chapman_kolmogorov() {
    const std::vector<std::pair<double, double>> pairs{{0.05, 0.05}, {0.1, 0.2}, {0.2, 0.25}, {0.25, 0.25}};
    double worst = 0.0;
    bool ok = true;
    for (const auto& [t, s] : pairs) {
        double sup = 0.0;
        const double e = chapman_kolmogorov_error(*desk().providers[0], t, s, &sup);
        worst = std::max(worst, e / (1.0 + sup));
        ok = ok && e <= kCkTol1D * (1.0 + sup);
    }
    return {ok, fmt("max ||g_{t+s} - g_t*g_s|| / (1 + ||g_{t+s}||) = %.2e (tol %.0e)", worst, kCkTol1D)};
}

Line c3_scaling() {
    const auto times = log_grid(1e-3, 1.0, 13);
    std::string d;
    bool ok = true;
    for (double a : {0.8, 1.2, 1.6}) {
        const LevyModel1D m = make_stable(a);
        std::vector<double> hi;
        for (double t : times) hi.push_back(h_inverse(m, 1.0 / t));
        const double slope = loglog_slope(times, hi);
        const double rel = std::abs(slope * a - 1.0);
        ok = ok && rel <= kSlopeTol;
        d += fmt("alpha=%.1f slope=%.5f (1/alpha=%.5f) ", a, slope, 1.0 / a);
    }
    return {ok, d + fmt("tol %.0f%%", kSlopeTol * 100)};
}

Line c4_equivalence() {
    const std::vector<std::pair<std::string, LevyModel1D>> models{
        {"stable(0.5)", make_stable(0.5)},
        {"stable(1.0)", make_stable(1.0)},
        {"stable(1.5)", make_stable(1.5)},
        {"relativistic(1.0,1.0)", make_relativistic(1.0, 1.0)},
        {"relativistic(1.5,0.5)", make_relativistic(1.5, 0.5)},
        {"truncated_stable(1.0)", make_truncated_stable(1.0)},
        {"truncated_stable(1.5)", make_truncated_stable(1.5)}};
    const auto rs = log_grid(1e-3, 1e3, 64);
    const double lo = 2.0 / (std::numbers::pi * std::numbers::pi);
    double worst_lo = INFINITY, worst_hi = INFINITY;
    for (const auto& [name, m] : models)
        for (double r : rs) {
            const double h = concentration_h(m, r), psi = m.psi(1.0 / r);
            worst_lo = std::min(worst_lo, psi / (lo * h));
            worst_hi = std::min(worst_hi, 2.0 * h / psi);
        }
    return {worst_lo >= 1.0 && worst_hi >= 1.0,
            fmt("%zu models x 64 radii: min psi/((2/pi^2)h) = %.4f, min 2h/psi = %.4f (both must be >= 1)",
                models.size(), worst_lo, worst_hi)};
}

Line c5_constant_coefficients() {
    Mat A0(2, 2);
    A0 << 1.0, 0.3, 0.2, 1.06;
    const auto kernel = std::make_shared<const FrozenKernel>(make_constant_field(A0), desk().providers, 1e-4, 1.0);
    Parametrix par(kernel, AssumptionMode::Z1, desk_config().mesh);
    const Vec x = vec2(0.5, 0.3);
    const std::vector<double> times{0.05, 0.1, 0.25};
    const double alpha = desk().models[0]->alpha, beta = desk().models[0]->beta;
    double q_scaled = 0.0;
    for (double t : times) {
        const RowGrid g = par.make_grid(t, x, kernel->inverse().at(x), par.jump_reach());
        for (std::size_t k = 0; k < g.size(); ++k)
            q_scaled = std::max(q_scaled, std::abs(par.q0(t, x, g.point(k))) * std::pow(t, (2.0 + beta) / alpha));
    }
    const RowHistory corr = par.correction_row(x, 0.25, {0.05, 0.1});
    const URowReport rep = par.u_report(corr, x, times);
    double rel = 0.0;
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
        const double pmax = kernel->density(rep.times[k], Vec::Zero(2), x);
        rel = std::max(rel, rep.max_abs_correction[k] / pmax);
    }
    return {q_scaled <= kQ0ScaledTol && rel <= kConstCorrTol,
            fmt("max |q0| t^((d+beta)/alpha) = %.2e (tol %.0e), max |u-p|/|p| = %.2e (tol %.0e)", q_scaled,
                kQ0ScaledTol, rel, kConstCorrTol)};
}

Line c6_picard_decay() {
    Parametrix par(desk().kernel, desk_config().mode, desk_config().mesh);
    const Vec x = vec2(0.5, 0.3);
    std::vector<double> scaled;
    for (double t : {0.1, 0.2, 0.4}) scaled.push_back(std::pow(t, par.sigma()) * par.q0_l1(t, x));
    const double spread = *std::max_element(scaled.begin(), scaled.end()) /
                          *std::min_element(scaled.begin(), scaled.end());
    const auto rows = par.picard_rows(x, 0.25, 5);
    const PicardReport rep = par.picard_report(rows, 0.25);
    bool decreasing = rep.ratios.size() >= 5;
    std::string r;
    for (std::size_t n = 0; n < std::min<std::size_t>(5, rep.ratios.size()); ++n) {
        r += fmt("%.3e ", rep.ratios[n]);
        if (n > 0) decreasing = decreasing && rep.ratios[n] < rep.ratios[n - 1];
    }
    return {decreasing && spread <= kQ0StabilityFactor,
            fmt("ratios n=0..4: %s(strictly decreasing: %s); t^sigma int|q0| at t=0.1,0.2,0.4: %.3e %.3e %.3e, "
                "spread %.2fx (tol %.0fx)",
                r.c_str(), decreasing ? "yes" : "no", scaled[0], scaled[1], scaled[2], spread, kQ0StabilityFactor)};
}

Line c7_kernel_mass() {
    Parametrix par(desk().kernel, desk_config().mode, desk_config().mesh);
    const std::vector<double> times{0.05, 0.1, 0.25};
    double worst_mass = 0.0, worst_min = INFINITY;
    for (const Vec& x : probe_points(desk_config())) {
        const RowHistory corr = par.correction_row(x, 0.25, {0.05, 0.1});
        const URowReport rep = par.u_report(corr, x, times);
        for (std::size_t k = 0; k < rep.times.size(); ++k) {
            worst_mass = std::max(worst_mass, std::abs(rep.mass[k] - 1.0));
            worst_min = std::min(worst_min, rep.min_value[k]);
        }
    }
    return {worst_mass <= kKernelMassTol && worst_min >= kKernelMinTol,
            fmt("5 probes x 3 times: max |int u - 1| = %.2e (tol %.0e), min u = %.2e (tol %.0e)", worst_mass,
                kKernelMassTol, worst_min, kKernelMinTol)};
}

Line c8_semigroup_identities() {
    const auto& cfg = desk_config();
    const LatticeSemigroup sg(desk().kernel, cfg.lattice);
    const auto probes = probe_points(cfg);
    const TestFunction one = constant_function(1.0);
    double unit = 0.0;
    for (double v : sg.T_apply(one, 0.25, probes)) unit = std::max(unit, std::abs(v - 1.0));

    const TestFunction f = gauss_bump(Vec::Zero(2), 0.25);
    bool exact0 = true;
    const auto s0 = sg.march(f, {0.0});
    for (const Vec& x : probes) exact0 = exact0 && sg.value_at(s0.front(), f, x) == f.f(x);
    const LatticeFunction sampled = sample(sg.lattice(), f.f, f.far);
    exact0 = exact0 && s0.front().values.v == sampled.v;

    // T_{t+s} f against T_t (T_s f) with T_s taken from a run at half the time step.
    SemigroupOptions fine = cfg.lattice;
    fine.step = cfg.lattice.step / 2.0;
    const LatticeSemigroup sg_fine(desk().kernel, fine);
    const double s = 0.125, t = 0.125;
    const auto inner = sg_fine.march(f, {s});
    const auto outer = sg.march(inner.front().values, {t});
    const auto direct = sg.march(f, {s + t});
    double ck = 0.0;
    for (const Vec& x : probes)
        ck = std::max(ck, std::abs(sg.frozen_row_apply(x, outer.front().before_last) -
                                   sg.value_at(direct.front(), f, x)));
    ck /= f.sup_norm;
    return {unit <= kUnitTol && exact0 && ck <= kSemigroupCkTol,
            fmt("max |T_t 1 - 1| = %.2e (tol %.0e), T_0 f == f: %s, max |T_{t+s}f - T_t T_s f| / |f| = %.2e (tol "
                "%.0e)",
                unit, kUnitTol, exact0 ? "yes" : "no", ck, kSemigroupCkTol)};
}

Line c9_generator() {
    const auto& cfg = desk_config();
    const LatticeSemigroup sg(desk().kernel, cfg.lattice);
    const TestFunction f = gauss_bump(vec2(0.1, 0.05), 0.25);
    auto probes = probe_points(cfg);
    probes.resize(3);
    const double t = 0.25;
    const GeneratorReport rep = sg.generator_residual(f, t, probes, cfg.rtol);
    const double allowed = kGeneratorTol * (1.0 + t) * rep.k_norm;
    const double worst = *std::max_element(rep.residual.begin(), rep.residual.end());
    return {worst <= allowed, fmt("t=%.3g: max residual = %.2e, allowed %.2e (= %.0e (1+t) ||Kf|| with ||Kf|| = %.3f)",
                                  t, worst, allowed, kGeneratorTol, rep.k_norm)};
}

Line c10_holder() {
    const auto& cfg = desk_config();
    const LatticeSemigroup sg(desk().kernel, cfg.lattice);
    const double gamma = cfg.holder.gamma_fraction * desk().models[0]->alpha;
    const TestFunction f = make_test_function(cfg.holder.function, cfg.dim, cfg.holder.function_params);
    const HolderReport full = sg.holder_estimate(f, cfg.holder.times, holder_pairs(cfg, 1.0), gamma);
    const HolderReport half = sg.holder_estimate(f, cfg.holder.times, holder_pairs(cfg, 0.5), gamma);
    const double rel = std::abs(full.slope - full.target) / std::abs(full.target);
    double worst = 1.0;
    for (std::size_t k = 0; k < full.ratio.size(); ++k) {
        const double q = half.ratio[k] / full.ratio[k];
        worst = std::max(worst, std::max(q, 1.0 / q));
    }
    return {full.ratio.size() == 6 && rel <= kHolderSlopeTol && worst <= kHolderHalvingFactor,
            fmt("%zu times: slope %.4f vs target %.4f (rel %.3f, tol %.2f); worst halving factor %.3f (tol %.0fx)",
                full.ratio.size(), full.slope, full.target, rel, kHolderSlopeTol, worst, kHolderHalvingFactor)};
}

Line c11_smoothing() {
    const auto& cfg = desk_config();
    const LatticeSemigroup sg(desk().kernel, cfg.lattice);
    const TestFunction f = unit_mass_bump(Vec::Zero(2), cfg.smoothing.width);
    const SmoothingReport rep = sg.smoothing_estimate(f, cfg.smoothing.times, cfg.smoothing.gamma);
    // The fitted decay may not be slower than the exponent by more than the slack.
    const double limit = (1.0 - kSmoothingSlack) * rep.exponent;
    return {rep.slope <= limit && rep.monotone,
            fmt("gamma=%.2f: fitted slope %.4f, exponent %.4f, must be <= %.4f; sup decreasing: %s", rep.gamma,
                rep.slope, rep.exponent, limit, rep.monotone ? "yes" : "no")};
}

Line c12_monte_carlo() {
    const auto& cfg = desk_config();
    const LatticeSemigroup sg(desk().kernel, cfg.lattice);
    SimConfig mc = cfg.mc;
    mc.n_paths = 1000000;
    const EulerSimulator sim(desk().field, desk().models, mc, desk().delta);
    const TestFunction f = make_test_function(cfg.functions[0].name, cfg.dim, cfg.functions[0].params);
    const double t = 0.25;
    const auto state = sg.march(f, {t});
    double worst_z = 0.0;
    bool ok = true;
    for (const Vec& x : probe_points(cfg)) {
        const double v = sg.value_at(state.front(), f, x);
        const MCEstimate est = sim.estimate_Ptf(x, f.f, t);
        const ZReport z = compare(v, est, kMcModelTol * f.sup_norm / 3.0);
        ok = ok && std::abs(v - est.mean) <= 3.0 * est.stderr_ + kMcModelTol * f.sup_norm;
        worst_z = std::max(worst_z, std::abs(z.z));
    }

    // With A = I the solution is the driving process itself.
    SimConfig iid = cfg.mc;
    iid.n_paths = 1000000;
    iid.n_steps = 16;
    const EulerSimulator free(make_identity_field(2), desk().models, iid, desk().delta);
    const auto ends = free.endpoints(Vec::Zero(2), 1.0);
    std::string chi;
    bool chi_ok = true;
    for (int i = 0; i < 2; ++i) {
        std::vector<double> xs;
        xs.reserve(ends.size());
        for (const auto& e : ends) xs.push_back(e[i]);
        const auto& m = *desk().models[i];
        const ChiSquareReport r =
            chi_square_vs_cdf(xs, [&](double y) { return untruncated_cdf(m, 1.0, y); }, -6.0, 6.0, 48);
        chi_ok = chi_ok && r.pass;
        chi += fmt("coord %d chi2=%.1f dof=%d crit=%.1f; ", i + 1, r.statistic, r.dof, r.critical);
    }
    return {ok && chi_ok, fmt("5 probes, 1e6 paths: max |z| = %.2f (pass iff |diff| <= 3 stderr + %.0e |f|); A=I: %s",
                              worst_z, kMcModelTol, chi.c_str())};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Line c13_determinism() {
    const fs::path root = fs::temp_directory_path() / fmt("lf_determinism_%d", static_cast<int>(std::rand() % 100000));
    fs::create_directories(root);
    const fs::path cfg = root / "small.yaml";
    std::ofstream(cfg) << "dim: 2\nmode: Z1\nmodels:\n  - family: truncated_stable\n    alpha: 1.0\n"
                          "field:\n  kind: rotation\n  theta0: 0.5\ndelta: 0.025\n"
                          "lattice:\n  half_width: 2.0\n  spacing: 0.0625\n  step: 0.03125\n"
                          "times: [0.0625, 0.125]\ntest_functions:\n  - name: gauss_bump\n    width: 0.25\n"
                          "probes:\n  - [0.0, 0.2]\n  - [0.4, 0.0]\n"
                          "montecarlo:\n  n_paths: 20000\n  n_steps: 32\n  seed: 99\n  times: [0.125]\n";
    const std::vector<std::string> cmds{"density", "semigroup", "mc-compare"};
    bool ok = true;
    int files = 0;
    for (const auto& cmd : cmds) {
        for (int run = 0; run < 2; ++run) {
            const std::string line = fmt("\"%s\" %s --config \"%s\" --out \"%s\" --threads %d > /dev/null 2>&1",
                                         LF_CLI_PATH, cmd.c_str(), cfg.c_str(),
                                         (root / fmt("%s_%d", cmd.c_str(), run)).c_str(), run == 0 ? 1 : 3);
            const int rc = std::system(line.c_str());
            ok = ok && (rc == 0 || (cmd == "mc-compare" && WEXITSTATUS(rc) == 2));
        }
        for (const auto& e : fs::directory_iterator(root / fmt("%s_0", cmd.c_str()))) {
            if (e.path().extension() != ".csv") continue;
            const fs::path other = root / fmt("%s_1", cmd.c_str()) / e.path().filename();
            ok = ok && fs::exists(other) && slurp(e.path()) == slurp(other);
            ++files;
        }
    }
    fs::remove_all(root);
    return {ok && files >= 4, fmt("%d CSV files from density/semigroup/mc-compare, two runs with 1 and 3 threads: %s",
                                  files, ok ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<std::string, std::function<Line()>>> criteria{
        {1, {"1-D density mass and symmetry", c1_density_mass}},
        {2, {"1-D Chapman-Kolmogorov", c2_chapman_kolmogorov}},
        {3, {"scaling recovery", c3_scaling}},
        {4, {"equivalence band", c4_equivalence}},
        {5, {"constant-coefficient exactness", c5_constant_coefficients}},
        {6, {"Picard decay", c6_picard_decay}},
        {7, {"kernel mass and positivity", c7_kernel_mass}},
        {8, {"semigroup identities", c8_semigroup_identities}},
        {9, {"generator consistency", c9_generator}},
        {10, {"Holder scaling", c10_holder}},
        {11, {"smoothing", c11_smoothing}},
        {12, {"Monte Carlo cross-check", c12_monte_carlo}},
        {13, {"determinism", c13_determinism}}};
    std::vector<int> run;
    for (int i = 1; i < argc; ++i) run.push_back(std::atoi(argv[i]));
    if (run.empty())
        for (const auto& [k, v] : criteria) run.push_back(k);
    int failed = 0;
    for (int k : run) {
        const auto it = criteria.find(k);
        if (it == criteria.end()) {
            std::printf("criterion %d FAIL unknown criterion\n", k);
            ++failed;
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Line line;
        try {
            line = it->second.second();
        } catch (const std::exception& e) {
            line = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d %s %s: %s [%.1f s]\n", k, line.pass ? "PASS" : "FAIL", it->second.first.c_str(),
                    line.detail.c_str(), secs);
        std::fflush(stdout);
        failed += line.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
