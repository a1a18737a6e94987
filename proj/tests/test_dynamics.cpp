#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rch/dynamics.hpp"
#include "rch/profile.hpp"

using namespace rch;

namespace {

PeakonState from_heights(std::vector<double> Q, std::vector<double> uh, double r) {
    const Profile p = heights_to_profile(Q, uh, Exponent(r));
    return PeakonState(0.0, std::move(Q), momenta_from_profile(p));
}

}  // namespace

TEST_CASE("vector field of a single peak: constant momentum, unit transport") {
    for (double r : {2.0, 4.0, 6.0}) {
        const PeakonState st(0.0, {1.0}, {momentum_from_height(1.0, Exponent(r))});
        const VectorField vf = vector_field(st, Exponent(r));
        CHECK(vf.Qdot[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(vf.Pdot[0] == 0.0);
    }
}

TEST_CASE("head-on pair drives P_1 up and P_2 down") {
    const PeakonState st = from_heights({1.0, 11.0}, {1.0, -1.0}, 2.0);
    const VectorField vf = vector_field(st, Exponent(2.0));
    CHECK(vf.Pdot[0] > 0.0);
    CHECK(vf.Pdot[1] < 0.0);
    CHECK(vf.Pdot[0] == doctest::Approx(-vf.Pdot[1]).epsilon(1e-10));
}

TEST_CASE("travelling wave is exact under RK4") {
    for (double r : {2.0, 6.0}) {
        const double P0 = momentum_from_height(1.0, Exponent(r));
        IntegratorSettings set;
        set.scheme = RK4Fixed{1e-2};
        set.t_end = 10.0;
        set.output_stride = 50;
        const Trajectory traj = integrate(PeakonState(0.0, {0.0}, {P0}), Exponent(r), set);
        REQUIRE(traj.termination.kind == TerminationKind::ReachedEnd);
        for (const PeakonState& st : traj.states) {
            CHECK(std::abs(st.Q[0] - st.t) <= 1e-6);
            CHECK(std::abs(st.P[0] - P0) <= 1e-10);
        }
        CHECK(traj.states.back().t == doctest::Approx(10.0));
    }
}

TEST_CASE("head-on collision is detected in finite time") {
    const PeakonState st = from_heights({1.0, 11.0}, {1.0, -1.0}, 2.0);
    IntegratorSettings set;
    set.scheme = RK45Adaptive{1e-8, 1e-10};
    set.t_end = 60.0;
    set.output_stride = 4;
    const Trajectory traj = integrate(st, Exponent(2.0), set);
    CHECK(traj.termination.kind == TerminationKind::CollisionDetected);
    REQUIRE(traj.termination.t_collision_estimate.has_value());
    const double tc = *traj.termination.t_collision_estimate;
    CHECK(tc > 0.0);
    CHECK(tc < 60.0);
    CHECK(tc >= traj.termination.t);
    // mirror symmetry: Q1 + Q2 stays put, P1 = -P2
    for (const PeakonState& s : traj.states) {
        CHECK(s.Q[0] + s.Q[1] == doctest::Approx(12.0).epsilon(1e-7));
        CHECK(s.P[0] == doctest::Approx(-s.P[1]).epsilon(1e-6));
    }
}

TEST_CASE("overtaking run conserves H, signs, ordering, and exchanges speeds") {
    const PeakonState st = from_heights({1.0, 6.0}, {1.5, 1.0}, 2.0);
    IntegratorSettings set;
    set.scheme = RK45Adaptive{1e-8, 1e-10};
    set.t_end = 9.0;
    const Trajectory traj = integrate(st, Exponent(2.0), set);
    REQUIRE(traj.termination.kind == TerminationKind::ReachedEnd);

    const ConservationReport rep = conservation_report(traj);
    CHECK(rep.max_rel_H_drift <= 1e-6);
    CHECK(rep.ordering_ok);
    CHECK(rep.sign_preserved[0]);
    CHECK(rep.sign_preserved[1]);
    CHECK(rep.min_gap > 0.0);

    // near the end of the window the right peak carries the faster speed
    const std::vector<double>& uh_end = traj.uhats.back();
    CHECK(uh_end[1] > uh_end[0]);
}

TEST_CASE("momentum flip reverses the flow back to the initial state") {
    const PeakonState st = from_heights({1.0, 6.0}, {1.5, 1.0}, 2.0);
    IntegratorSettings set;
    set.scheme = RK4Fixed{1e-3};
    set.t_end = 2.0;
    set.output_stride = 1 << 30;
    const Trajectory fwd = integrate(st, Exponent(2.0), set);
    const PeakonState& end = fwd.states.back();

    std::vector<double> Pr(end.P);
    for (double& p : Pr) p = -p;
    const Trajectory bwd = integrate(PeakonState(0.0, end.Q, Pr), Exponent(2.0), set);
    const PeakonState& back = bwd.states.back();
    for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(back.Q[i] - st.Q[i]) <= 1e-5);
        CHECK(std::abs(-back.P[i] - st.P[i]) <= 1e-5);
    }
}

TEST_CASE("record_times are hit exactly") {
    const PeakonState st = from_heights({1.0, 6.0}, {1.5, 1.0}, 4.0);
    IntegratorSettings set;
    set.scheme = RK45Adaptive{1e-8, 1e-10};
    set.t_end = 1.0;
    set.output_stride = 1 << 30;
    set.record_times = {0.25, 0.5, 0.75};
    const Trajectory traj = integrate(st, Exponent(4.0), set);
    REQUIRE(traj.states.size() == 5);  // initial + 3 stops + final
    CHECK(traj.states[1].t == 0.25);
    CHECK(traj.states[2].t == 0.5);
    CHECK(traj.states[3].t == 0.75);
    CHECK(traj.states[4].t == 1.0);
}

TEST_CASE("trajectory CSV schema and determinism") {
    const PeakonState st = from_heights({1.0, 6.0}, {1.5, 1.0}, 2.0);
    IntegratorSettings set;
    set.scheme = RK45Adaptive{1e-8, 1e-10};
    set.t_end = 1.0;
    auto run_csv = [&]() {
        const Trajectory traj = integrate(st, Exponent(2.0), set);
        std::ostringstream os;
        write_trajectory_csv(os, traj);
        return os.str();
    };
    const std::string a = run_csv(), b = run_csv();
    CHECK(a == b);  // identical inputs, bitwise identical outputs
    CHECK(a.rfind("t,Q1,Q2,P1,P2,uhat1,uhat2,H,min_gap\n", 0) == 0);

    const Trajectory traj = integrate(st, Exponent(2.0), set);
    const std::string sidecar = termination_to_json(traj);
    CHECK(sidecar.find("ReachedEnd") != std::string::npos);
}

TEST_CASE("single-peak CSV reports an infinite min gap") {
    IntegratorSettings set;
    set.scheme = RK4Fixed{1e-2};
    set.t_end = 0.1;
    const Trajectory traj =
        integrate(PeakonState(0.0, {0.0}, {2.0}), Exponent(2.0), set);
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    CHECK(os.str().find("inf") != std::string::npos);
}
