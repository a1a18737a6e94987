#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rch {

/// Raised when peak positions are not strictly increasing.
struct OrderingViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when a bracketed solve cannot find a sign change. Usually signals
/// that an interval was classified on the wrong branch and the caller must
/// fall back to the other one.
struct NoBracket : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Adaptive quadrature failed to reach the requested tolerance.
struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Damped Newton ran out of iterations or line-search halvings.
struct NewtonDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A least-squares trajectory fit was not linear enough to be meaningful.
struct FitNotLinear : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The exponent r of the W^{1,r} energy. r >= 2 is required everywhere the
/// singular-solution machinery runs; r = 1 appears only in the closed-form
/// checkers of the verify module.
class Exponent {
public:
    explicit Exponent(double r) : r_(r) {
        if (!std::isfinite(r) || r < 1.0)
            throw std::invalid_argument("Exponent: r must be finite and >= 1, got " +
                                        std::to_string(r));
    }

    double value() const { return r_; }

    /// Throw unless r >= 2 (profile/dynamics/oracle reject smaller r).
    void require_singular(const char* who) const {
        if (r_ < 2.0)
            throw std::domain_error(std::string(who) + ": requires r >= 2, got " +
                                    std::to_string(r_));
    }

private:
    double r_;
};

/// |s|^beta * sgn(s). Odd in s, signed_pow(0, beta) = 0 for beta > 0.
/// beta = 0 with s = 0 is a domain error (0^0 has no consistent limit here).
double signed_pow(double s, double beta);

/// Momentum of an isolated peakon of height uhat: P = 2/(r-1) * |uhat|^{r-1} sgn(uhat).
double momentum_from_height(double uhat, Exponent r);

/// Exact inverse of momentum_from_height.
double height_from_momentum(double p, Exponent r);

/// Canonical phase-space point: time, strictly increasing peak positions Q,
/// and conjugate momenta P.
struct PeakonState {
    double t = 0.0;
    std::vector<double> Q;
    std::vector<double> P;

    PeakonState(double t_, std::vector<double> Q_, std::vector<double> P_);

    int size() const { return static_cast<int>(Q.size()); }

    /// Smallest gap Q_{i+1} - Q_i; +inf for a single peak.
    double min_gap() const;
};

enum class BranchKind {
    ExpTailLeft,   ///< x < Q_1, u = uhat_1 e^{x-Q_1}
    ExpTailRight,  ///< x > Q_N, u = uhat_N e^{Q_N-x}
    ExpInterior,   ///< K = 0 between peaks, u = a e^{+/-x}
    SinhLike,      ///< K < 0: strictly monotone, may cross zero
    CoshLike       ///< K > 0: no zero; turning point if it lies inside the interval
};

/// Branch classification of one inter-peak interval. exp_sign is only
/// meaningful for ExpInterior: +1 for growth, -1 for decay.
struct BranchClass {
    BranchKind kind;
    int exp_sign = 0;
};

const char* branch_name(BranchKind k);

/// One interval of a reconstructed profile. On the segment the first
/// integral |u|^r - |u_x|^r = K holds pointwise; the branch tag records how
/// the implicit relation is traversed. Tails use +/-inf endpoints with u -> 0.
struct Segment {
    double x_left = 0.0;
    double x_right = 0.0;
    double u_left = 0.0;   ///< height at x_left (0 for the far end of a tail)
    double u_right = 0.0;
    double slope_left = 0.0;   ///< one-sided u_x at x_left, from inside the segment
    double slope_right = 0.0;
    double K = 0.0;
    BranchKind branch = BranchKind::SinhLike;
    int exp_sign = 0;
    std::optional<double> turning_x;  ///< CoshLike with interior turning point only
    std::optional<double> turning_u;  ///< signed minimum-magnitude value there
};

/// Full reconstructed wave u(x; P, Q): two tails, N-1 interior segments, and
/// the peak heights uhat_i = u(Q_i). K has N+1 entries with K_0 = K_N = 0.
struct Profile {
    Exponent r;
    std::vector<double> Q;
    std::vector<double> uhat;
    std::vector<Segment> segments;
    std::vector<double> K;
    int newton_iters = 0;  ///< iterations spent by the (P,Q) -> uhat solve, 0 if built from heights

    int size() const { return static_cast<int>(Q.size()); }
};

/// Conserved-quantity snapshot for one state. H = (r-1) L always holds for a
/// profile built from the same data (Legendre relation).
struct Diagnostics {
    double H = 0.0;
    double L = 0.0;
    double min_gap = 0.0;
    std::vector<int> p_signs;
};

}  // namespace rch
