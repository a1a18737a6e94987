#include "rch/scenarios.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "rch/profile.hpp"

namespace rch {

namespace {

ScenarioSpec make_spec(std::string name, double r, std::vector<double> Q0,
                       std::vector<double> u0, double t_end) {
    ScenarioSpec s;
    s.name = std::move(name);
    s.r = r;
    s.Q0 = std::move(Q0);
    s.uhat0 = std::move(u0);
    s.t_end = t_end;
    s.integrator.scheme = RK45Adaptive{1e-8, 1e-10};
    s.integrator.t_end = t_end;
    return s;
}

}  // namespace

std::vector<ScenarioSpec> builtin_scenarios() {
    std::vector<ScenarioSpec> all;
    for (double r : {2.0, 4.0, 6.0})
        all.push_back(make_spec("overtaking-r" + std::to_string(int(r)), r, {1.0, 6.0},
                                {1.5, 1.0}, 20.0));
    for (double r : {2.0, 4.0, 6.0, 8.0})
        all.push_back(make_spec("antisym-r" + std::to_string(int(r)), r, {1.0, 11.0},
                                {1.0, -1.0}, 60.0));
    all.push_back(make_spec("threepoint-r4", 4.0, {1.0, 3.0, 6.0}, {3.0, 1.2, 1.0}, 90.0));
    return all;
}

std::optional<ScenarioSpec> find_scenario(const std::string& name) {
    for (ScenarioSpec& s : builtin_scenarios())
        if (s.name == name) return std::move(s);
    return std::nullopt;
}

PeakonState initial_state(const ScenarioSpec& spec) {
    const Exponent r(spec.r);
    const Profile p = heights_to_profile(spec.Q0, spec.uhat0, r, spec.integrator.profile);
    return PeakonState(0.0, spec.Q0, momenta_from_profile(p));
}

Trajectory run_scenario(const ScenarioSpec& spec) {
    IntegratorSettings set = spec.integrator;
    set.t_end = spec.t_end;
    return integrate(initial_state(spec), Exponent(spec.r), set);
}

std::vector<SweepRow> collision_time_sweep(std::span<const double> r_values,
                                           const ScenarioSpec* base) {
    ScenarioSpec proto =
        base ? *base : *find_scenario("antisym-r2");
    if (proto.Q0.size() != 2 || proto.uhat0.size() != 2 ||
        proto.uhat0[0] != -proto.uhat0[1] || !(proto.uhat0[0] > 0.0))
        throw std::invalid_argument(
            "collision_time_sweep: requires the two-peak antisymmetric family");

    std::vector<SweepRow> rows;
    for (double r : r_values) {
        ScenarioSpec s = proto;
        s.r = r;
        const Trajectory traj = run_scenario(s);
        if (traj.termination.kind != TerminationKind::CollisionDetected)
            throw std::runtime_error("collision_time_sweep: no collision before t_end for r=" +
                                     std::to_string(r));
        rows.push_back({r, traj.termination.t_collision_estimate.value_or(traj.termination.t)});
    }
    return rows;
}

namespace {

struct LineFit {
    double slope = 0.0, intercept = 0.0, max_resid = 0.0;
};

LineFit fit_line(std::span<const double> t, std::span<const double> y) {
    const std::size_t n = t.size();
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = 0; k < n; ++k) {
        st += t[k];
        sy += y[k];
        stt += t[k] * t[k];
        sty += t[k] * y[k];
    }
    LineFit f;
    const double det = n * stt - st * st;
    f.slope = (n * sty - st * sy) / det;
    f.intercept = (sy * stt - st * sty) / det;
    for (std::size_t k = 0; k < n; ++k)
        f.max_resid = std::max(f.max_resid, std::abs(y[k] - f.slope * t[k] - f.intercept));
    return f;
}

}  // namespace

double phase_shift_of(const Trajectory& traj) {
    if (traj.states.size() < 16)
        throw std::invalid_argument("phase_shift_of: too few outputs");
    const int N = traj.states.front().size();
    if (N != 2) throw std::invalid_argument("phase_shift_of: needs a two-peak run");

    const double t0 = traj.states.front().t, T = traj.states.back().t;
    // time of closest approach separates the incoming and outgoing windows
    double t_c = t0, gmin = std::numeric_limits<double>::infinity();
    for (const PeakonState& st : traj.states)
        if (st.min_gap() < gmin) {
            gmin = st.min_gap();
            t_c = st.t;
        }

    std::vector<double> tp, yp, tq, yq;
    for (const PeakonState& st : traj.states) {
        if (st.t <= t0 + 0.15 * (T - t0)) {
            tp.push_back(st.t);
            yp.push_back(st.Q[0]);  // fast mode comes in on the left peak
        }
        if (st.t >= T - 0.15 * (T - t0)) {
            tq.push_back(st.t);
            yq.push_back(st.Q[1]);  // and leaves on the right peak
        }
    }
    if (tp.size() < 4 || tq.size() < 4)
        throw FitNotLinear("phase_shift_of: fit windows underpopulated");
    const LineFit pre = fit_line(tp, yp), post = fit_line(tq, yq);
    const double span_pre = std::abs(pre.slope) * (tp.back() - tp.front());
    const double span_post = std::abs(post.slope) * (tq.back() - tq.front());
    if (pre.max_resid > 2e-3 * std::max(1.0, span_pre) ||
        post.max_resid > 2e-3 * std::max(1.0, span_post))
        throw FitNotLinear("phase_shift_of: windows not asymptotically linear; run longer");

    return (post.slope * t_c + post.intercept) - (pre.slope * t_c + pre.intercept);
}

namespace {

// The canned initial gap is well inside the interaction zone, so the
// incoming asymptote is recovered by running the (reversible) flow backward
// from the initial state: (Q, P, t) -> (Q, -P, -t).
Trajectory two_sided_run(const ScenarioSpec& spec, double t_back) {
    const PeakonState s0 = initial_state(spec);
    IntegratorSettings set = spec.integrator;
    set.t_end = spec.t_end;
    set.record_times.clear();
    for (double t = 0.25; t < spec.t_end; t += 0.25) set.record_times.push_back(t);
    const Trajectory fwd = integrate(s0, Exponent(spec.r), set);

    std::vector<double> Pr(s0.P);
    for (double& p : Pr) p = -p;
    set.t_end = t_back;
    set.record_times.clear();
    for (double t = 0.25; t < t_back; t += 0.25) set.record_times.push_back(t);
    const Trajectory bwd = integrate(PeakonState(0.0, s0.Q, Pr), Exponent(spec.r), set);

    Trajectory out;
    for (std::size_t k = bwd.states.size(); k-- > 1;) {
        const PeakonState& st = bwd.states[k];
        std::vector<double> P(st.P);
        for (double& p : P) p = -p;
        out.states.emplace_back(-st.t, st.Q, std::move(P));
        Diagnostics d = bwd.diagnostics[k];
        for (int& sg : d.p_signs) sg = -sg;
        out.diagnostics.push_back(std::move(d));
        std::vector<double> uh(bwd.uhats[k]);
        for (double& u : uh) u = -u;
        out.uhats.push_back(std::move(uh));
    }
    out.states.insert(out.states.end(), fwd.states.begin(), fwd.states.end());
    out.diagnostics.insert(out.diagnostics.end(), fwd.diagnostics.begin(),
                           fwd.diagnostics.end());
    out.uhats.insert(out.uhats.end(), fwd.uhats.begin(), fwd.uhats.end());
    out.termination = fwd.termination;
    return out;
}

}  // namespace

std::vector<SweepRow> phase_shift_sweep(std::span<const double> r_values,
                                        const ScenarioSpec* base) {
    ScenarioSpec proto = base ? *base : *find_scenario("overtaking-r2");
    if (proto.Q0.size() != 2 || proto.uhat0.size() != 2)
        throw std::invalid_argument("phase_shift_sweep: requires the two-peak overtaking family");
    if (std::abs(proto.uhat0[0] - proto.uhat0[1]) <=
        1e-9 * std::max(std::abs(proto.uhat0[0]), std::abs(proto.uhat0[1])))
        throw std::invalid_argument(
            "phase_shift_sweep: equal initial speeds, no overtaking occurs");

    std::vector<SweepRow> rows;
    for (double r : r_values) {
        ScenarioSpec s = proto;
        s.r = r;
        rows.push_back({r, phase_shift_of(two_sided_run(s, 15.0))});
    }
    return rows;
}

std::string scenario_to_json(const ScenarioSpec& spec, int indent) {
    nlohmann::json j;
    j["spec_version"] = 1;
    j["name"] = spec.name;
    j["r"] = spec.r;
    j["Q0"] = spec.Q0;
    j["uhat0"] = spec.uhat0;
    j["t_end"] = spec.t_end;
    nlohmann::json ji;
    if (std::holds_alternative<RK45Adaptive>(spec.integrator.scheme)) {
        const auto& a = std::get<RK45Adaptive>(spec.integrator.scheme);
        ji["scheme"] = "rk45";
        ji["rtol"] = a.rtol;
        ji["atol"] = a.atol;
    } else {
        ji["scheme"] = "rk4";
        ji["dt"] = std::get<RK4Fixed>(spec.integrator.scheme).dt;
    }
    ji["min_gap_stop"] = spec.integrator.min_gap_stop;
    ji["output_stride"] = spec.integrator.output_stride;
    ji["dt_init"] = spec.integrator.dt_init;
    j["integrator"] = std::move(ji);
    return j.dump(indent);
}

ScenarioSpec scenario_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    static const char* known[] = {"spec_version", "name", "r", "Q0", "uhat0", "t_end",
                                  "integrator"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
                return it.key() == k;
            }) == std::end(known))
            throw std::invalid_argument("scenario_from_json: unknown key '" + it.key() + "'");
    if (!j.contains("spec_version") || j.at("spec_version").get<int>() != 1)
        throw std::invalid_argument("scenario_from_json: missing or unsupported spec_version");

    ScenarioSpec s;
    s.name = j.value("name", "custom");
    s.r = j.at("r").get<double>();
    s.Q0 = j.at("Q0").get<std::vector<double>>();
    s.uhat0 = j.at("uhat0").get<std::vector<double>>();
    s.t_end = j.at("t_end").get<double>();
    s.integrator.t_end = s.t_end;
    if (j.contains("integrator")) {
        const auto& ji = j.at("integrator");
        const std::string scheme = ji.value("scheme", "rk45");
        if (scheme == "rk45")
            s.integrator.scheme = RK45Adaptive{ji.value("rtol", 1e-8), ji.value("atol", 1e-10)};
        else if (scheme == "rk4")
            s.integrator.scheme = RK4Fixed{ji.value("dt", 1e-2)};
        else
            throw std::invalid_argument("scenario_from_json: unknown scheme " + scheme);
        s.integrator.min_gap_stop = ji.value("min_gap_stop", 1e-3);
        s.integrator.output_stride = ji.value("output_stride", 1);
        s.integrator.dt_init = ji.value("dt_init", 1e-3);
    }
    if (s.Q0.size() != s.uhat0.size() || s.Q0.empty())
        throw std::invalid_argument("scenario_from_json: Q0/uhat0 size mismatch");
    return s;
}

}  // namespace rch
