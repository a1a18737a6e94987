#pragma once

#include <utility>
#include <vector>

#include "rch/profile.hpp"
#include "rch/types.hpp"

namespace rch {

/// Uniform partition used by the cross-validation solvers.
struct Mesh1D {
    int n_cells = 4096;
    Mesh1D() = default;
    explicit Mesh1D(int n) : n_cells(n) {
        if (n < 8) throw std::invalid_argument("Mesh1D: need at least 8 cells");
    }
};

/// Independent slow solver for the interior two-point problem
///   |u|^{r-2} u = (|u_x|^{r-2} u_x)_x / (r-1)   on (0, dQ),
/// with Dirichlet data, discretized by the conservative second-order
/// finite-difference flux scheme and solved with damped Newton. Returns the
/// n_cells+1 nodal values. Only used to cross-check the quadrature pipeline.
std::vector<double> collocation_solve(double u_left, double u_right, double dQ, Exponent r,
                                      Mesh1D mesh);

struct HamiltonianGradients {
    double H = 0.0;
    std::vector<double> dH_dQ;
    std::vector<double> dH_dP;
};

/// Hamiltonian via the unit-interval variational route: each inter-peak
/// interval is mapped to [0,1], the profile is a piecewise-linear minimizer
/// of the energy minus the momentum pairing, and the exponential tails enter
/// through their closed-form energies. Gradients are central differences
/// that re-solve the constraint at every probe (step 1e-5).
HamiltonianGradients variational_hamiltonian(const PeakonState& state, Exponent r,
                                             Mesh1D mesh);

/// Ground truth for the closed-form vector field: central differences of
/// H(P,Q) = energy(solve_profile(state)) give (dQ/dt, dP/dt) = (dH/dP, -dH/dQ).
std::pair<std::vector<double>, std::vector<double>> hamiltonian_fd_vector_field(
    const PeakonState& state, Exponent r, const ProfileSolveSettings& s = {},
    double fd_step = 1e-5);

}  // namespace rch
