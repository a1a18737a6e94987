#pragma once

#include <span>
#include <string>
#include <vector>

#include "rch/quadrature.hpp"
#include "rch/types.hpp"

namespace rch {

struct ProfileSolveSettings {
    double newton_tol = 1e-11;      ///< residual inf-norm
    int max_newton_iters = 50;
    double fd_eps = 1e-7;           ///< Jacobian finite-difference step scale
    double damping_factor = 0.5;    ///< backtracking factor
    int max_halvings = 25;
    QuadratureSettings quad{};
};

/// Decide the branch of one inter-peak interval from its endpoint heights
/// and width. Total function: a sign change forces SinhLike, an exponential
/// fit within relative 1e-10 gives ExpInterior, otherwise the gap against
/// the K -> 0 length decides between SinhLike and CoshLike.
BranchClass classify_interval(double u_a, double u_b, double dQ, Exponent r);

/// Build the full profile from peak positions and heights: classify each
/// interior interval, solve the 1D length relation for its K, attach the
/// decaying tails, and fill the one-sided slopes.
Profile heights_to_profile(std::span<const double> Q, std::span<const double> uhat,
                           Exponent r, const ProfileSolveSettings& s = {});

/// Momenta from the derivative jumps: P_i = -(|u_x|^{r-2}u_x jump)/(r-1).
std::vector<double> momenta_from_profile(const Profile& p);

/// The (P,Q) -> u map: damped Newton on the stacked unknowns
/// (uhat_1..uhat_N, K_1..K_{N-1}) with the N jump equations and N-1 interval
/// length equations as residual. Warm starting from a nearby profile is
/// strongly recommended inside time stepping.
Profile solve_profile(const PeakonState& state, Exponent r, const Profile* warm = nullptr,
                      const ProfileSolveSettings& s = {});

/// Pointwise evaluation at sorted-or-not sample locations.
std::vector<double> sample(const Profile& p, std::span<const double> xs,
                           const QuadratureSettings& qs = {});

/// Lagrangian, Hamiltonian and per-state diagnostics of a profile. Tails
/// contribute |uhat|^r/(r(r-1)) each to L in closed form; interior segments
/// are integrated in the height variable.
Diagnostics energy(const Profile& p, const QuadratureSettings& qs = {});

/// JSON round trip used by the CLI `profile` subcommand and test fixtures.
std::string profile_to_json(const Profile& p, int indent = 2);
Profile profile_from_json(const std::string& text);

}  // namespace rch
