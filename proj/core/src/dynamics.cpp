#include "rch/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

namespace rch {

const char* termination_name(TerminationKind k) {
    switch (k) {
        case TerminationKind::ReachedEnd: return "ReachedEnd";
        case TerminationKind::CollisionDetected: return "CollisionDetected";
        case TerminationKind::SolverFailure: return "SolverFailure";
    }
    return "unknown";
}

VectorField vector_field(const PeakonState& state, Exponent r, const Profile* warm,
                         const ProfileSolveSettings& s) {
    Profile p = solve_profile(state, r, warm, s);
    const int N = state.size();
    VectorField vf{std::vector<double>(N), std::vector<double>(N), std::move(p)};
    for (int i = 0; i < N; ++i) {
        vf.Qdot[i] = vf.profile.uhat[i];
        vf.Pdot[i] = (vf.profile.K[i] - vf.profile.K[i + 1]) / r.value();
    }
    return vf;
}

namespace {

struct StepFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class System {
public:
    System(int N, double t0, Exponent r, const ProfileSolveSettings& s)
        : N_(N), t0_(t0), r_(r), s_(s) {}

    PeakonState to_state(double t, const std::vector<double>& y) const {
        return PeakonState(t, {y.begin(), y.begin() + N_}, {y.begin() + N_, y.end()});
    }

    // dy/dt; throws StepFailure when the state is invalid or the profile
    // solve diverges (adaptive callers shrink the step in response).
    std::vector<double> operator()(double t, const std::vector<double>& y, Profile* out) {
        try {
            const PeakonState st = to_state(t, y);
            const VectorField vf = vector_field(st, r_, warm_ ? &*warm_ : nullptr, s_);
            std::vector<double> dy(2 * N_);
            for (int i = 0; i < N_; ++i) {
                dy[i] = vf.Qdot[i];
                dy[N_ + i] = vf.Pdot[i];
            }
            if (out) *out = vf.profile;
            return dy;
        } catch (const std::exception& e) {
            throw StepFailure(e.what());
        }
    }

    void set_warm(Profile p) { warm_ = std::move(p); }

private:
    int N_;
    double t0_;
    Exponent r_;
    const ProfileSolveSettings& s_;
    std::optional<Profile> warm_;
};

struct Recorder {
    Trajectory traj;
    const QuadratureSettings& qs;

    void record(const PeakonState& st, const Profile& p) {
        if (!traj.states.empty() && traj.states.back().t == st.t) return;
        traj.states.push_back(st);
        traj.diagnostics.push_back(energy(p, qs));
        traj.uhats.push_back(p.uhat);
    }
};

double min_gap_of(const std::vector<double>& y, int N) {
    double g = std::numeric_limits<double>::infinity();
    for (int i = 1; i < N; ++i) g = std::min(g, y[i] - y[i - 1]);
    return g;
}

std::optional<double> collision_estimate(const Trajectory& traj) {
    const std::size_t n = traj.states.size();
    if (n < 2) return std::nullopt;
    const double t0 = traj.states[n - 2].t, t1 = traj.states[n - 1].t;
    const double g0 = traj.states[n - 2].min_gap(), g1 = traj.states[n - 1].min_gap();
    if (!(g0 > g1)) return t1;
    return t1 + g1 * (t1 - t0) / (g0 - g1);
}

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                 e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

}  // namespace

Trajectory integrate(const PeakonState& state0, Exponent r, const IntegratorSettings& set) {
    r.require_singular("integrate");
    const int N = state0.size();
    const int dim = 2 * N;
    if (!(set.t_end > state0.t))
        throw std::invalid_argument("integrate: t_end must exceed the initial time");

    System sys(N, state0.t, r, set.profile);
    Recorder rec{Trajectory{}, set.profile.quad};

    std::vector<double> y(dim);
    for (int i = 0; i < N; ++i) {
        y[i] = state0.Q[i];
        y[N + i] = state0.P[i];
    }
    double t = state0.t;

    std::vector<double> stops(set.record_times.begin(), set.record_times.end());
    std::sort(stops.begin(), stops.end());
    std::size_t next_stop = 0;
    while (next_stop < stops.size() && stops[next_stop] <= t) ++next_stop;

    auto finish = [&](TerminationKind k, double tf, std::optional<double> tc,
                      std::string msg) {
        rec.traj.termination = {k, tf, tc, std::move(msg)};
        return std::move(rec.traj);
    };

    Profile p0{r, {}, {}, {}, {}, 0};
    std::vector<double> k1;
    try {
        k1 = sys(t, y, &p0);
    } catch (const StepFailure& e) {
        return finish(TerminationKind::SolverFailure, t, std::nullopt, e.what());
    }
    sys.set_warm(p0);
    rec.record(sys.to_state(t, y), p0);

    const bool adaptive = std::holds_alternative<RK45Adaptive>(set.scheme);
    const RK45Adaptive ad =
        adaptive ? std::get<RK45Adaptive>(set.scheme) : RK45Adaptive{};
    const double dt_fixed = adaptive ? 0.0 : std::get<RK4Fixed>(set.scheme).dt;
    double h_prop = adaptive ? set.dt_init : dt_fixed;

    std::vector<double> k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim);
    std::vector<double> ytmp(dim), ynew(dim);
    long accepted = 0;

    while (t < set.t_end - 1e-14 * std::max(1.0, std::abs(set.t_end))) {
        double stop = set.t_end;
        if (next_stop < stops.size()) stop = std::min(stop, stops[next_stop]);
        const bool clamped = t + h_prop >= stop - 1e-14 * std::max(1.0, std::abs(stop));
        double h = clamped ? stop - t : h_prop;

        bool accept = false;
        Profile pnew{r, {}, {}, {}, {}, 0};
        try {
            if (adaptive) {
                auto axpy = [&](std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
                    for (int i = 0; i < dim; ++i) {
                        double acc = 0.0;
                        for (const auto& [c, v] : terms) acc += c * (*v)[i];
                        ytmp[i] = y[i] + h * acc;
                    }
                };
                axpy({{a21, &k1}});
                k2 = sys(t + c2 * h, ytmp, nullptr);
                axpy({{a31, &k1}, {a32, &k2}});
                k3 = sys(t + c3 * h, ytmp, nullptr);
                axpy({{a41, &k1}, {a42, &k2}, {a43, &k3}});
                k4 = sys(t + c4 * h, ytmp, nullptr);
                axpy({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
                k5 = sys(t + c5 * h, ytmp, nullptr);
                axpy({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
                k6 = sys(t + h, ytmp, nullptr);
                for (int i = 0; i < dim; ++i)
                    ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                                          b5 * k5[i] + b6 * k6[i]);
                k7 = sys(t + h, ynew, &pnew);

                double err = 0.0;
                for (int i = 0; i < dim; ++i) {
                    const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                           e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
                    const double sc =
                        ad.atol + ad.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                    err = std::max(err, std::abs(ei) / sc);
                }
                if (err <= 1.0) {
                    accept = true;
                    double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
                    fac = std::clamp(fac, 0.2, 5.0);
                    double next = h * fac;
                    if (clamped) next = std::max(next, h_prop);
                    h_prop = next;
                    k1 = k7;  // first-same-as-last
                } else {
                    double fac = std::clamp(0.9 * std::pow(err, -0.2), 0.1, 1.0);
                    h_prop = h * fac;
                    if (h_prop < set.dt_min)
                        return finish(TerminationKind::SolverFailure, t, std::nullopt,
                                      "adaptive step underflow");
                    continue;
                }
            } else {
                // classic RK4
                auto axpy1 = [&](double c, const std::vector<double>& v) {
                    for (int i = 0; i < dim; ++i) ytmp[i] = y[i] + h * c * v[i];
                };
                axpy1(0.5, k1);
                k2 = sys(t + 0.5 * h, ytmp, nullptr);
                axpy1(0.5, k2);
                k3 = sys(t + 0.5 * h, ytmp, nullptr);
                axpy1(1.0, k3);
                k4 = sys(t + h, ytmp, nullptr);
                for (int i = 0; i < dim; ++i)
                    ynew[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                k1 = sys(t + h, ynew, &pnew);
                accept = true;
            }
        } catch (const StepFailure& e) {
            if (adaptive) {
                h_prop = h * 0.25;
                if (h_prop < set.dt_min)
                    return finish(TerminationKind::SolverFailure, t, std::nullopt, e.what());
                continue;
            }
            return finish(TerminationKind::SolverFailure, t, std::nullopt, e.what());
        }

        if (!accept) continue;
        y = ynew;
        t = clamped ? stop : t + h;
        ++accepted;
        sys.set_warm(pnew);
        if (set.dt_max > 0.0) h_prop = std::min(h_prop, set.dt_max);

        const double gap = min_gap_of(y, N);
        const bool at_stop_time = clamped;
        if (at_stop_time && next_stop < stops.size() && stop == stops[next_stop]) ++next_stop;

        const bool due =
            at_stop_time || set.output_stride <= 1 || accepted % set.output_stride == 0;
        if (due || gap < set.min_gap_stop) rec.record(sys.to_state(t, y), pnew);

        if (gap < set.min_gap_stop)
            return finish(TerminationKind::CollisionDetected, t, collision_estimate(rec.traj),
                          "min gap " + std::to_string(gap) + " below stop threshold");
        if (!(gap > 0.0))
            return finish(TerminationKind::SolverFailure, t, std::nullopt,
                          "ordering violated");
    }
    // make sure the final state is recorded
    try {
        Profile pf{r, {}, {}, {}, {}, 0};
        (void)sys(t, y, &pf);
        rec.record(sys.to_state(t, y), pf);
    } catch (const StepFailure&) {
    }
    return finish(TerminationKind::ReachedEnd, t, std::nullopt, "");
}

ConservationReport conservation_report(const Trajectory& traj) {
    if (traj.states.empty())
        throw std::invalid_argument("conservation_report: empty trajectory");
    const int N = traj.states.front().size();
    ConservationReport rep;
    rep.sign_preserved.assign(N, true);
    rep.min_gap = std::numeric_limits<double>::infinity();

    const double H0 = traj.diagnostics.front().H;
    std::vector<int> sign0(N, 0);
    for (int i = 0; i < N; ++i) sign0[i] = traj.diagnostics.front().p_signs[i];

    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const Diagnostics& d = traj.diagnostics[k];
        if (H0 != 0.0)
            rep.max_rel_H_drift = std::max(rep.max_rel_H_drift, std::abs(d.H - H0) / std::abs(H0));
        rep.min_gap = std::min(rep.min_gap, traj.states[k].min_gap());
        const auto& Q = traj.states[k].Q;
        for (int i = 1; i < N; ++i)
            if (!(Q[i - 1] < Q[i])) rep.ordering_ok = false;
        for (int i = 0; i < N; ++i) {
            const int sg = d.p_signs[i];
            if (sign0[i] == 0) sign0[i] = sg;
            else if (sg != 0 && sg != sign0[i]) rep.sign_preserved[i] = false;
        }
    }
    return rep;
}

namespace {
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    if (traj.states.empty()) return;
    const int N = traj.states.front().size();
    os << "t";
    for (int i = 1; i <= N; ++i) os << ",Q" << i;
    for (int i = 1; i <= N; ++i) os << ",P" << i;
    for (int i = 1; i <= N; ++i) os << ",uhat" << i;
    os << ",H,min_gap\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const PeakonState& st = traj.states[k];
        os << fmt(st.t);
        for (int i = 0; i < N; ++i) os << ',' << fmt(st.Q[i]);
        for (int i = 0; i < N; ++i) os << ',' << fmt(st.P[i]);
        for (int i = 0; i < N; ++i) os << ',' << fmt(traj.uhats[k][i]);
        os << ',' << fmt(traj.diagnostics[k].H) << ',' << fmt(st.min_gap()) << '\n';
    }
}

std::string termination_to_json(const Trajectory& traj, int indent) {
    nlohmann::json j;
    j["termination"] = termination_name(traj.termination.kind);
    j["t"] = traj.termination.t;
    if (traj.termination.t_collision_estimate)
        j["t_collision_estimate"] = *traj.termination.t_collision_estimate;
    if (!traj.termination.message.empty()) j["message"] = traj.termination.message;
    j["n_outputs"] = traj.states.size();
    return j.dump(indent);
}

}  // namespace rch
