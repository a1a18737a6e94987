#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rch/dynamics.hpp"
#include "rch/types.hpp"

namespace rch {

/// Named experiment: exponent, initial peak positions and heights, horizon,
/// integrator settings. Initial momenta always come from the fully coupled
/// profile of the initial heights, not from the isolated-peakon formula.
struct ScenarioSpec {
    std::string name;
    double r = 2.0;
    std::vector<double> Q0;
    std::vector<double> uhat0;
    double t_end = 20.0;
    IntegratorSettings integrator{};
};

/// The canned experiments: overtaking-r{2,4,6} (Q0=[1,6], uhat0=[1.5,1]),
/// antisym-r{2,4,6,8} (Q0=[1,11], uhat0=[1,-1]), threepoint-r4
/// (Q0=[1,3,6], uhat0=[3,1.2,1], t_end=90).
std::vector<ScenarioSpec> builtin_scenarios();

std::optional<ScenarioSpec> find_scenario(const std::string& name);

/// Initial canonical state of a scenario (heights -> coupled momenta).
PeakonState initial_state(const ScenarioSpec& spec);

Trajectory run_scenario(const ScenarioSpec& spec);

struct SweepRow {
    double r;
    double value;
};

/// Head-on collision times of the antisymmetric family, one row per r.
/// The base spec (default: builtin antisym) must be a two-peak
/// antisymmetric configuration.
std::vector<SweepRow> collision_time_sweep(std::span<const double> r_values,
                                           const ScenarioSpec* base = nullptr);

/// Asymptotic trajectory offset of the fast mode in the overtaking family,
/// from pre-/post-interaction linear fits. Throws FitNotLinear when the
/// post-interaction window is not linear enough (run longer).
std::vector<SweepRow> phase_shift_sweep(std::span<const double> r_values,
                                        const ScenarioSpec* base = nullptr);

/// Phase shift of a single overtaking run (exposed for tests and the CLI).
double phase_shift_of(const Trajectory& traj);

/// JSON config round trip (strict schema, spec_version 1).
std::string scenario_to_json(const ScenarioSpec& spec, int indent = 2);
ScenarioSpec scenario_from_json(const std::string& text);

}  // namespace rch
