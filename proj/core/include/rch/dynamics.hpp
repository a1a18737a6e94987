#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "rch/profile.hpp"
#include "rch/types.hpp"

namespace rch {

struct RK4Fixed {
    double dt = 1e-2;
};

struct RK45Adaptive {
    double rtol = 1e-8;
    double atol = 1e-10;
};

struct IntegratorSettings {
    std::variant<RK4Fixed, RK45Adaptive> scheme = RK45Adaptive{};
    double t_end = 10.0;
    double min_gap_stop = 1e-3;     ///< stop and report a collision below this gap
    int output_stride = 1;          ///< record every n-th accepted step
    std::vector<double> record_times;  ///< additional exact output times (sorted)
    double dt_init = 1e-3;
    double dt_min = 1e-9;           ///< adaptive floor; reaching it is a solver failure
    double dt_max = 0.0;            ///< 0 disables the cap
    ProfileSolveSettings profile{};
};

enum class TerminationKind { ReachedEnd, CollisionDetected, SolverFailure };

const char* termination_name(TerminationKind k);

struct Termination {
    TerminationKind kind = TerminationKind::ReachedEnd;
    double t = 0.0;
    std::optional<double> t_collision_estimate;
    std::string message;
};

/// Time series of states plus per-output diagnostics and peak heights.
struct Trajectory {
    std::vector<PeakonState> states;
    std::vector<Diagnostics> diagnostics;
    std::vector<std::vector<double>> uhats;
    Termination termination;
};

struct VectorField {
    std::vector<double> Qdot;
    std::vector<double> Pdot;
    Profile profile;  ///< the solved profile, for warm starts and diagnostics
};

/// Canonical right-hand side: Qdot_i is the peak height uhat_i, Pdot_i is
/// the jump of |u_x|^r/r across the peak, i.e. (K_{i-1} - K_i)/r with the
/// interval constants K_0 = K_N = 0.
VectorField vector_field(const PeakonState& state, Exponent r, const Profile* warm = nullptr,
                         const ProfileSolveSettings& s = {});

/// Advance the canonical system, warm starting every profile solve from the
/// previously accepted step. Stops early on collision (min gap) or when the
/// profile solve fails; adaptive runs also stop if dt falls under dt_min.
Trajectory integrate(const PeakonState& state0, Exponent r, const IntegratorSettings& settings);

struct ConservationReport {
    double max_rel_H_drift = 0.0;
    std::vector<bool> sign_preserved;  ///< per peak: sign(P_i) never flipped
    bool ordering_ok = true;           ///< Q strictly increasing at all outputs
    double min_gap = 0.0;
};

ConservationReport conservation_report(const Trajectory& traj);

/// CSV schema: t,Q1..QN,P1..PN,uhat1..uhatN,H,min_gap - one row per output.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Termination metadata sidecar for the CSV.
std::string termination_to_json(const Trajectory& traj, int indent = 2);

}  // namespace rch
