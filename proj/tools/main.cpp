#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "rch/dynamics.hpp"
#include "rch/oracle.hpp"
#include "rch/profile.hpp"
#include "rch/scenarios.hpp"
#include "rch/verify.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rch;

namespace {

int g_log_level = 1;  // 0=error 1=warn 2=info 3=debug, via RCH_LOG

void init_log_level() {
    const char* env = std::getenv("RCH_LOG");
    if (!env) return;
    const std::string v(env);
    if (v == "error") g_log_level = 0;
    else if (v == "warn") g_log_level = 1;
    else if (v == "info") g_log_level = 2;
    else if (v == "debug") g_log_level = 3;
}

void log_at(int lvl, const std::string& msg) {
    static const char* tags[] = {"error", "warn", "info", "debug"};
    if (lvl <= g_log_level) std::cerr << "[rch:" << tags[lvl] << "] " << msg << "\n";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
    log_at(2, "wrote " + p.string());
}

struct Formats {
    bool csv = true, jsn = true, svg = false;
};

Formats parse_formats(const std::string& s) {
    Formats f{false, false, false};
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "csv") f.csv = true;
        else if (tok == "json") f.jsn = true;
        else if (tok == "svg") f.svg = true;
        else if (!tok.empty()) throw CLI::ValidationError("--formats", "unknown format " + tok);
    }
    if (!f.csv && !f.jsn && !f.svg) throw CLI::ValidationError("--formats", "empty format set");
    return f;
}

std::string samples_csv(const std::vector<double>& xs, const std::vector<double>& us) {
    std::ostringstream os;
    os << "x,u\n";
    for (std::size_t k = 0; k < xs.size(); ++k)
        os << fmt(xs[k]) << ',' << fmt(us[k]) << '\n';
    return os.str();
}

std::vector<double> profile_grid(const Profile& p, int n = 1601, double margin = 10.0) {
    std::vector<double> xs(n);
    const double lo = p.Q.front() - margin, hi = p.Q.back() + margin;
    for (int k = 0; k < n; ++k) xs[k] = lo + (hi - lo) * k / (n - 1);
    return xs;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& scenario_name, const std::string& config_path,
                 const std::string& out_dir, const std::string& formats_str, double t_end_ovr,
                 double dt_ovr, double rtol_ovr, const std::string& snapshots_str,
                 unsigned /*seed*/) {
    ScenarioSpec spec;
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) {
            log_at(0, "config not readable: " + config_path);
            return 2;
        }
        std::stringstream ss;
        ss << is.rdbuf();
        spec = scenario_from_json(ss.str());
    } else {
        auto found = find_scenario(scenario_name);
        if (!found) {
            log_at(0, "unknown scenario: " + scenario_name);
            return 2;
        }
        spec = *found;
    }
    if (t_end_ovr > 0.0) spec.t_end = t_end_ovr;
    if (dt_ovr > 0.0) spec.integrator.scheme = RK4Fixed{dt_ovr};
    if (rtol_ovr > 0.0) spec.integrator.scheme = RK45Adaptive{rtol_ovr, rtol_ovr * 1e-2};

    const Formats fmts = parse_formats(formats_str);
    const std::vector<double> snap_times = parse_list(snapshots_str);
    spec.integrator.record_times = snap_times;
    spec.integrator.t_end = spec.t_end;

    fs::create_directories(out_dir);
    const fs::path base = fs::path(out_dir) / spec.name;

    Trajectory traj;
    try {
        traj = run_scenario(spec);
    } catch (const NewtonDiverged& e) {
        log_at(0, e.what());
        return 3;
    }
    if (traj.termination.kind == TerminationKind::SolverFailure) {
        log_at(0, "solver failure at t=" + std::to_string(traj.termination.t) + ": " +
                      traj.termination.message);
        return 3;
    }

    if (fmts.csv) {
        std::ostringstream os;
        write_trajectory_csv(os, traj);
        write_file(base.string() + "_trajectory.csv", os.str());
    }
    if (fmts.jsn) write_file(base.string() + "_termination.json", termination_to_json(traj));

    if (fmts.svg) {
        const int N = traj.states.front().size();
        std::vector<svgplot::Series> qs_series(N);
        static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
        for (int i = 0; i < N; ++i) {
            qs_series[i].color = colors[i % 4];
            qs_series[i].label = "Q" + std::to_string(i + 1);
            for (const PeakonState& st : traj.states) {
                qs_series[i].x.push_back(st.t);
                qs_series[i].y.push_back(st.Q[i]);
            }
        }
        write_file(base.string() + "_trajectory.svg",
                   svgplot::render(qs_series, spec.name + ": peak trajectories", "t", "Q"));
    }

    // snapshot profiles at the requested times
    const QuadratureSettings qs = spec.integrator.profile.quad;
    for (double ts : snap_times) {
        const PeakonState* at = nullptr;
        for (const PeakonState& st : traj.states)
            if (std::abs(st.t - ts) <= 1e-9 * std::max(1.0, std::abs(ts))) at = &st;
        if (!at) {
            log_at(1, "snapshot time " + std::to_string(ts) + " not reached, skipped");
            continue;
        }
        const Profile p = solve_profile(*at, Exponent(spec.r), nullptr, spec.integrator.profile);
        const std::vector<double> xs = profile_grid(p);
        const std::vector<double> us = sample(p, xs, qs);
        std::ostringstream tag;
        tag << base.string() << "_snapshot_t" << ts;
        if (fmts.csv) write_file(tag.str() + ".csv", samples_csv(xs, us));
        if (fmts.svg) {
            svgplot::Series s;
            s.x = xs;
            s.y = us;
            write_file(tag.str() + ".svg",
                       svgplot::render({s}, spec.name + " at t=" + std::to_string(ts), "x",
                                       "u(x)"));
        }
    }
    return 0;
}

// ----------------------------------------------------------------- profile

int cmd_profile(double r, const std::string& q_str, const std::string& uhat_str,
                const std::string& p_str, const std::string& grid_str,
                const std::string& out_dir, const std::string& formats_str) {
    const Formats fmts = parse_formats(formats_str);
    const std::vector<double> Q = parse_list(q_str);
    if (Q.empty()) {
        log_at(0, "--Q is required");
        return 2;
    }
    Profile prof{Exponent(r), {}, {}, {}, {}, 0};
    try {
        if (!uhat_str.empty()) {
            const std::vector<double> uh = parse_list(uhat_str);
            prof = heights_to_profile(Q, uh, Exponent(r));
        } else if (!p_str.empty()) {
            const std::vector<double> P = parse_list(p_str);
            prof = solve_profile(PeakonState(0.0, Q, P), Exponent(r));
        } else {
            log_at(0, "need --uhat or --P");
            return 2;
        }
    } catch (const NewtonDiverged& e) {
        log_at(0, e.what());
        return 3;
    }

    double lo = prof.Q.front() - 10.0, hi = prof.Q.back() + 10.0;
    int n = 1601;
    if (!grid_str.empty()) {
        double a, b;
        int m;
        if (std::sscanf(grid_str.c_str(), "%lf:%lf:%d", &a, &b, &m) != 3 || m < 2) {
            log_at(0, "--grid must be lo:hi:n");
            return 2;
        }
        lo = a;
        hi = b;
        n = m;
    }
    std::vector<double> xs(n);
    for (int k = 0; k < n; ++k) xs[k] = lo + (hi - lo) * k / (n - 1);
    const std::vector<double> us = sample(prof, xs);

    fs::create_directories(out_dir);
    const fs::path base = fs::path(out_dir) / "profile";
    if (fmts.csv) write_file(base.string() + "_samples.csv", samples_csv(xs, us));
    if (fmts.jsn) write_file(base.string() + ".json", profile_to_json(prof));
    if (fmts.svg) {
        svgplot::Series s;
        s.x = xs;
        s.y = us;
        write_file(base.string() + ".svg", svgplot::render({s}, "reconstructed profile", "x", "u(x)"));
    }
    return 0;
}

// ------------------------------------------------------------------ verify

json check_entry(const std::string& name, double value, double threshold,
                 bool expected_fail = false) {
    json j;
    j["name"] = name;
    j["value"] = value;
    j["threshold"] = threshold;
    j["pass"] = value <= threshold;
    if (expected_fail) j["expected_fail"] = true;
    return j;
}

json run_r1_suite() {
    json checks = json::array();
    const R1ClosedFormReport rep = check_r1_closed_forms();
    checks.push_back(check_entry("r1-x1-constant", rep.x1_residual, 1e-14));
    checks.push_back(check_entry("r1-x2-closed-form", rep.x2_residual, 1e-8));
    // the printed X3 form does not solve its reduced ODE (see NOTES); the
    // corrected separable solution does
    checks.push_back(check_entry("r1-x3-stated-form", rep.x3_stated_residual, 1e-6, true));
    checks.push_back(check_entry("r1-x3-derived-form", rep.x3_derived_residual, 1e-6));

    for (double r : {2.0, 5.0}) {
        std::vector<double> grid;
        for (double xi = -3.0; xi <= 3.0; xi += 0.037)
            if (std::abs(xi) > 1e-3) grid.push_back(xi);
        checks.push_back(check_entry("travelling-reduction-r" + std::to_string(int(r)),
                                     check_travelling_reduction(1.0, Exponent(r), grid),
                                     1e-10));
    }

    // steady solution of the r=2 reduced ODE, integrated independently, then
    // the first integral evaluated from samples alone
    {
        const double h = 1e-5;
        double f = 1.2, f1 = 0.4, f2 = -0.3;
        std::vector<double> samples;
        auto f3 = [](double f_, double f1_, double f2_) {
            return f1_ * (3.0 * f_ - 2.0 * f2_) / f_;
        };
        int step = 0;
        const int keep = 100;  // sample spacing 1e-3
        for (double x = 0.0; x <= 1.0 + 1e-12; x += h, ++step) {
            if (step % keep == 0) samples.push_back(f);
            // classic RK4 on the third-order steady reduction
            const double k1f = f1, k1g = f2, k1h = f3(f, f1, f2);
            const double k2f = f1 + 0.5 * h * k1g, k2g = f2 + 0.5 * h * k1h,
                         k2h = f3(f + 0.5 * h * k1f, f1 + 0.5 * h * k1g, f2 + 0.5 * h * k1h);
            const double k3f = f1 + 0.5 * h * k2g, k3g = f2 + 0.5 * h * k2h,
                         k3h = f3(f + 0.5 * h * k2f, f1 + 0.5 * h * k2g, f2 + 0.5 * h * k2h);
            const double k4f = f1 + h * k3g, k4g = f2 + h * k3h,
                         k4h = f3(f + h * k3f, f1 + h * k3g, f2 + h * k3h);
            f += h / 6.0 * (k1f + 2 * k2f + 2 * k3f + k4f);
            f1 += h / 6.0 * (k1g + 2 * k2g + 2 * k3g + k4g);
            f2 += h / 6.0 * (k1h + 2 * k2h + 2 * k3h + k4h);
        }
        checks.push_back(check_entry("x2-first-integral-spread",
                                     check_x2_first_integral(samples, 1e-3, Exponent(2.0)),
                                     1e-6));
        // negative control: a Gaussian is not a steady solution
        std::vector<double> gauss;
        for (double x = -0.5; x <= 0.5 + 1e-12; x += 1e-3)
            gauss.push_back(2.0 * std::exp(-x * x * 2.0) + 0.5);
        const double spread = check_x2_first_integral(gauss, 1e-3, Exponent(2.0));
        json neg;
        neg["name"] = "x2-first-integral-negative-control";
        neg["value"] = spread;
        neg["threshold_min"] = 1e-2;
        neg["pass"] = spread > 1e-2;
        checks.push_back(neg);
    }
    return checks;
}

json run_symmetry_suite() {
    json checks = json::array();
    ScenarioSpec spec = *find_scenario("overtaking-r4");
    spec.t_end = 10.0;
    spec.integrator.t_end = 10.0;
    spec.integrator.output_stride = 1 << 30;
    for (int k = 1; k <= 40; ++k) spec.integrator.record_times.push_back(0.25 * k);
    const Trajectory traj = run_scenario(spec);
    const ScalingOrbitErrors err =
        check_scaling_orbit(traj, 2.0, Exponent(spec.r), spec.integrator);
    checks.push_back(check_entry("scaling-orbit-supQ", err.sup_Q, 1e-5));
    checks.push_back(check_entry("scaling-orbit-supP", err.sup_P, 1e-5));
    return checks;
}

json run_oracle_suite(unsigned seed) {
    json checks = json::array();
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uh(0.5, 2.0), gap(1.5, 4.0), q0(-2.0, 2.0);
    const double rs[] = {2.0, 3.0, 4.5, 6.0};
    double worst_sup = 0.0, worst_vf = 0.0, worst_H = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Exponent r(rs[k % 4]);
        const double qa = q0(rng), qb = qa + gap(rng);
        const double ua = uh(rng), ub = uh(rng);
        const std::vector<double> Q{qa, qb}, UH{ua, ub};
        const Profile prof = heights_to_profile(Q, UH, r);

        // quadrature segment vs collocation, sup over interior nodes
        const Mesh1D mesh(4096);
        const std::vector<double> coll = collocation_solve(ua, ub, qb - qa, r, mesh);
        std::vector<double> xs(coll.size());
        for (std::size_t i = 0; i < xs.size(); ++i)
            xs[i] = qa + (qb - qa) * double(i) / (xs.size() - 1);
        const std::vector<double> quadr = sample(prof, xs);
        for (std::size_t i = 0; i < xs.size(); ++i)
            worst_sup = std::max(worst_sup, std::abs(coll[i] - quadr[i]));

        // vector field vs FD gradients of H
        const PeakonState st(0.0, Q, momenta_from_profile(prof));
        const VectorField vf = vector_field(st, r);
        const auto [qd, pd] = hamiltonian_fd_vector_field(st, r);
        for (int i = 0; i < 2; ++i) {
            const double sc = std::max({1.0, std::abs(vf.Qdot[i]), std::abs(vf.Pdot[i])});
            worst_vf = std::max(worst_vf, std::abs(vf.Qdot[i] - qd[i]) / sc);
            worst_vf = std::max(worst_vf, std::abs(vf.Pdot[i] - pd[i]) / sc);
        }

        // energy vs the variational Hamiltonian
        const double Hq = energy(prof).H;
        const HamiltonianGradients hg = variational_hamiltonian(st, r, mesh);
        worst_H = std::max(worst_H, std::abs(Hq - hg.H) / std::abs(Hq));
    }
    checks.push_back(check_entry("collocation-vs-quadrature-sup", worst_sup, 1e-6));
    checks.push_back(check_entry("vector-field-vs-fd-oracle", worst_vf, 1e-4));
    checks.push_back(check_entry("energy-vs-variational-H", worst_H, 1e-5));
    return checks;
}

json run_weakform_suite(const std::string& scenario) {
    json checks = json::array();
    ScenarioSpec spec = *find_scenario(scenario.empty() ? "overtaking-r2" : scenario);
    const double t_mid = 3.0, dt = 1e-3;
    spec.t_end = t_mid + 2.0 * dt;
    spec.integrator.t_end = spec.t_end;
    spec.integrator.record_times = {t_mid - dt, t_mid, t_mid + dt};
    spec.integrator.output_stride = 1 << 30;
    const Trajectory traj = run_scenario(spec);

    const PeakonState* sn[3] = {nullptr, nullptr, nullptr};
    for (const PeakonState& st : traj.states)
        for (int j = 0; j < 3; ++j)
            if (std::abs(st.t - (t_mid + (j - 1) * dt)) < 1e-9) sn[j] = &st;
    if (!sn[0] || !sn[1] || !sn[2]) throw std::runtime_error("weakform: snapshots missing");

    const Exponent r(spec.r);
    Profile p0 = solve_profile(*sn[0], r), p1 = solve_profile(*sn[1], r),
            p2 = solve_profile(*sn[2], r);
    const WeakSnapshot win[3] = {{sn[0], &p0}, {sn[1], &p1}, {sn[2], &p2}};
    const TestFunctionFamily fam = TestFunctionFamily::gaussians(
        p1.Q.front() - 4.0, p1.Q.back() + 4.0, 20, 1.5);
    const std::vector<double> res = weak_residual(win, fam);
    double worst = 0.0;
    for (double v : res) worst = std::max(worst, std::abs(v));
    const double scale = energy(p1).H;
    checks.push_back(check_entry("weak-residual-max-scaled", worst / scale, 1e-4));
    return checks;
}

int cmd_verify(const std::string& suite, unsigned seed, const std::string& scenario) {
    json rep;
    rep["suite"] = suite;
    json checks = json::array();
    auto extend = [&](const json& more) {
        for (const auto& c : more) checks.push_back(c);
    };
    if (suite == "r1-forms" || suite == "all") extend(run_r1_suite());
    if (suite == "symmetry" || suite == "all") extend(run_symmetry_suite());
    if (suite == "oracle" || suite == "all") extend(run_oracle_suite(seed));
    if (suite == "weakform" || suite == "all") extend(run_weakform_suite(scenario));
    if (checks.empty()) {
        log_at(0, "unknown suite: " + suite);
        return 2;
    }

    bool all_pass = true;
    for (const auto& c : checks)
        if (!c["pass"].get<bool>() && !c.value("expected_fail", false)) all_pass = false;
    rep["checks"] = std::move(checks);
    rep["pass"] = all_pass;
    std::cout << rep.dump(2) << "\n";
    return all_pass ? 0 : 1;
}

// ------------------------------------------------------------------- sweep

int cmd_sweep(const std::string& kind, const std::string& r_str, const std::string& out_dir) {
    const std::vector<double> rv = parse_list(r_str);
    if (rv.empty()) {
        log_at(0, "--r list required");
        return 2;
    }
    std::vector<SweepRow> rows;
    std::string value_name;
    if (kind == "collision-time") {
        rows = collision_time_sweep(rv);
        value_name = "t_collision";
    } else if (kind == "phase-shift") {
        rows = phase_shift_sweep(rv);
        value_name = "phase_shift";
    } else {
        log_at(0, "unknown sweep kind: " + kind);
        return 2;
    }
    std::ostringstream os;
    os << "r," << value_name << "\n";
    for (const SweepRow& row : rows) os << fmt(row.r) << ',' << fmt(row.value) << '\n';
    std::cout << os.str();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / (kind + ".csv"), os.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    init_log_level();
    CLI::App app{"singular multi-peakon simulator for the W^{1,r} shallow-water family"};
    app.require_subcommand(1);

    // simulate
    std::string scenario, config, out_dir = ".", formats = "csv,json", snapshots;
    double t_end = -1.0, dt = -1.0, rtol = -1.0;
    unsigned seed = 0;
    auto* sim = app.add_subcommand("simulate", "run a scenario and write trajectory outputs");
    sim->add_option("--scenario", scenario, "builtin scenario name");
    sim->add_option("--config", config, "scenario config JSON");
    sim->add_option("--out", out_dir, "output directory");
    sim->add_option("--formats", formats, "comma list of csv,json,svg");
    sim->add_option("--t-end", t_end, "override horizon");
    sim->add_option("--dt", dt, "fixed RK4 step (switches scheme)");
    sim->add_option("--rtol", rtol, "adaptive relative tolerance");
    sim->add_option("--snapshots", snapshots, "comma list of snapshot times");
    sim->add_option("--seed", seed, "seed recorded for reproducibility");

    // profile
    double pr_r = 2.0;
    std::string pr_q, pr_uhat, pr_p, pr_grid, pr_out = ".", pr_formats = "csv,json";
    auto* prof = app.add_subcommand("profile", "reconstruct and dump one profile");
    prof->add_option("--r", pr_r, "exponent r >= 2")->required();
    prof->add_option("--Q", pr_q, "comma list of peak positions")->required();
    prof->add_option("--uhat", pr_uhat, "comma list of peak heights");
    prof->add_option("--P", pr_p, "comma list of momenta");
    prof->add_option("--grid", pr_grid, "sample grid lo:hi:n");
    prof->add_option("--out", pr_out, "output directory");
    prof->add_option("--formats", pr_formats, "comma list of csv,json,svg");

    // verify
    std::string suite = "all", v_scenario;
    unsigned v_seed = 7;
    auto* ver = app.add_subcommand("verify", "run verification suites, print a JSON report");
    ver->add_option("--suite", suite, "r1-forms|symmetry|oracle|weakform|all");
    ver->add_option("--seed", v_seed, "seed for randomized checks");
    ver->add_option("--scenario", v_scenario, "scenario for the weak-form suite");

    // sweep
    std::string sw_kind, sw_r = "2,4,6", sw_out;
    auto* sw = app.add_subcommand("sweep", "collision-time / phase-shift sweeps over r");
    sw->add_option("--kind", sw_kind, "collision-time|phase-shift")->required();
    sw->add_option("--r", sw_r, "comma list of exponents");
    sw->add_option("--out", sw_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(scenario, config, out_dir, formats, t_end, dt, rtol,
                                snapshots, seed);
        if (prof->parsed())
            return cmd_profile(pr_r, pr_q, pr_uhat, pr_p, pr_grid, pr_out, pr_formats);
        if (ver->parsed()) return cmd_verify(suite, v_seed, v_scenario);
        if (sw->parsed()) return cmd_sweep(sw_kind, sw_r, sw_out);
    } catch (const NewtonDiverged& e) {
        log_at(0, e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        log_at(0, e.what());
        return 2;
    } catch (const std::exception& e) {
        log_at(0, e.what());
        return 1;
    }
    return 2;
}
