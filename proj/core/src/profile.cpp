#include "rch/profile.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rch {

namespace {

constexpr double kExpFitRelTol = 1e-10;
constexpr double kMinGap = 1e-12;

inline int sgn(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

// The Newton residual must be evaluable below newton_tol, so the interval
// quadratures run tighter than the caller-facing settings.
ProfileSolveSettings tightened(const ProfileSolveSettings& s) {
    ProfileSolveSettings t = s;
    t.quad.abs_tol = std::min(s.quad.abs_tol, 1e-2 * s.newton_tol);
    t.quad.rel_tol = std::min(s.quad.rel_tol, 1e-2 * s.newton_tol);
    return t;
}


// Interval solve bookkeeping: a K > 0 interval only has an interior turning
// point when the gap exceeds the turning-at-endpoint length.
enum class PieceShape { Monotone, TwoPiece };

double slope_mag(double uhat, double K, double r) {
    return std::pow(std::max(std::pow(std::abs(uhat), r) - K, 0.0), 1.0 / r);
}

struct IntervalGeometry {
    double length = std::numeric_limits<double>::quiet_NaN();
    double slope_left = 0.0;   // u_x just right of the left peak
    double slope_right = 0.0;  // u_x just left of the right peak
    // Analytic partials. The g-entries are the jump-row weights
    // |s|^{r-2} ds/dx, which have cancellation-free closed forms; the length
    // derivatives wrt the endpoint heights are the integrand at the endpoint.
    double gsl_dua = 0.0, gsl_dK = 0.0;
    double gsr_dub = 0.0, gsr_dK = 0.0;
    double dlen_dua = 0.0, dlen_dub = 0.0;
    bool feasible = false;
};

// Length, one-sided slopes and analytic partials of one interior interval
// under constant K. K is clamped into the domain of the requested shape;
// configurations too far outside stay infeasible and the Newton line search
// backs off.
IntervalGeometry interval_geometry(double u_a, double u_b, double K, PieceShape shape,
                                   Exponent rr, const QuadratureSettings& qs) {
    const double r = rr.value();
    IntervalGeometry g;
    const bool same_sign = sgn(u_a) * sgn(u_b) > 0;
    const double m_floor = 1e-10 * std::max({std::abs(u_a), std::abs(u_b), 0.1});

    if (shape == PieceShape::TwoPiece) {
        if (!same_sign) return g;
        const double k_cap = std::pow(std::min(std::abs(u_a), std::abs(u_b)), r);
        if (K > k_cap * (1.0 + 1e-6) || K < -1e-6 * k_cap) return g;
        const double Ke = std::clamp(K, k_cap * 1e-14, k_cap * (1.0 - 1e-15));
        g.length = length_integral_pos(u_a, u_b, Ke, rr, qs);
        const int s = sgn(u_a);
        const double ma = std::max(slope_mag(u_a, Ke, r), m_floor);
        const double mb = std::max(slope_mag(u_b, Ke, r), m_floor);
        g.slope_left = -s * slope_mag(u_a, Ke, r);
        g.slope_right = s * slope_mag(u_b, Ke, r);
        g.gsl_dua = -s * signed_pow(u_a, r - 1.0) / ma;
        g.gsl_dK = s / (r * ma);
        g.gsr_dub = s * signed_pow(u_b, r - 1.0) / mb;
        g.gsr_dK = -s / (r * mb);
        g.dlen_dua = sgn(u_a) / ma;
        g.dlen_dub = sgn(u_b) / mb;
        g.feasible = true;
        return g;
    }

    double Ke = K;
    if (same_sign) {
        const double k_cap = std::pow(std::min(std::abs(u_a), std::abs(u_b)), r);
        if (K > k_cap * (1.0 + 1e-6)) return g;
        Ke = std::min(K, k_cap * (1.0 - 1e-15));
    } else {
        // sign change (or zero endpoint): the branch only exists for K < 0.
        // The integrand resolves structure at |u| ~ |K|^{1/r}, so the floor
        // keeps that scale within the subdivision budget.
        const double k_floor =
            std::pow(1e-13 * std::max({std::abs(u_a), std::abs(u_b), 0.1}), r);
        Ke = std::min(K, -k_floor);
    }
    g.length = length_monotone(u_a, u_b, Ke, rr, qs);
    const int dir = sgn(u_b - u_a);
    const double ma = std::max(slope_mag(u_a, Ke, r), m_floor);
    const double mb = std::max(slope_mag(u_b, Ke, r), m_floor);
    g.slope_left = dir * slope_mag(u_a, Ke, r);
    g.slope_right = dir * slope_mag(u_b, Ke, r);
    g.gsl_dua = dir * signed_pow(u_a, r - 1.0) / ma;
    g.gsl_dK = -dir / (r * ma);
    g.gsr_dub = dir * signed_pow(u_b, r - 1.0) / mb;
    g.gsr_dK = -dir / (r * mb);
    if (same_sign) {
        const bool a_is_min = std::abs(u_a) <= std::abs(u_b);
        g.dlen_dua = sgn(u_a) * (a_is_min ? -1.0 : 1.0) / ma;
        g.dlen_dub = sgn(u_b) * (a_is_min ? 1.0 : -1.0) / mb;
    } else {
        g.dlen_dua = sgn(u_a) / ma;
        g.dlen_dub = sgn(u_b) / mb;
    }
    g.feasible = true;
    return g;
}

Segment make_interior_segment(double x_a, double x_b, double u_a, double u_b, double K,
                              PieceShape shape, bool exact_exp, int exp_sign, Exponent rr,
                              const QuadratureSettings& qs) {
    const double r = rr.value();
    Segment seg;
    seg.x_left = x_a;
    seg.x_right = x_b;
    seg.u_left = u_a;
    seg.u_right = u_b;
    seg.K = K;

    if (exact_exp) {
        seg.branch = BranchKind::ExpInterior;
        seg.K = 0.0;
        seg.exp_sign = exp_sign;
        seg.slope_left = exp_sign * u_a;
        seg.slope_right = exp_sign * u_b;
        return seg;
    }
    if (shape == PieceShape::TwoPiece) {
        seg.branch = BranchKind::CoshLike;
        const int s = sgn(u_a);
        const double tau = std::pow(K, 1.0 / r);
        seg.slope_left = -s * slope_mag(u_a, K, r);
        seg.slope_right = s * slope_mag(u_b, K, r);
        seg.turning_x = x_a + kernels::length(tau, std::abs(u_a), K, r, qs);
        seg.turning_u = s * tau;
        return seg;
    }
    seg.branch = K < 0.0 ? BranchKind::SinhLike
                         : (K > 0.0 ? BranchKind::CoshLike : BranchKind::ExpInterior);
    if (seg.branch == BranchKind::ExpInterior)
        seg.exp_sign = std::abs(u_b) > std::abs(u_a) ? 1 : -1;
    const int dir = sgn(u_b - u_a);
    seg.slope_left = dir * slope_mag(u_a, K, r);
    seg.slope_right = dir * slope_mag(u_b, K, r);
    return seg;
}

Segment make_tail(bool left, double Qend, double uhat) {
    Segment seg;
    if (left) {
        seg.x_left = -std::numeric_limits<double>::infinity();
        seg.x_right = Qend;
        seg.u_left = 0.0;
        seg.u_right = uhat;
        seg.slope_left = 0.0;
        seg.slope_right = uhat;
        seg.branch = BranchKind::ExpTailLeft;
    } else {
        seg.x_left = Qend;
        seg.x_right = std::numeric_limits<double>::infinity();
        seg.u_left = uhat;
        seg.u_right = 0.0;
        seg.slope_left = -uhat;
        seg.slope_right = 0.0;
        seg.branch = BranchKind::ExpTailRight;
    }
    seg.K = 0.0;
    return seg;
}

Profile assemble_profile(Exponent r, std::vector<double> Q, std::vector<double> uhat,
                         std::vector<double> K_interior, const std::vector<PieceShape>& shapes,
                         const std::vector<BranchClass>& classes,
                         const QuadratureSettings& qs) {
    const int N = static_cast<int>(Q.size());
    Profile p{r, std::move(Q), std::move(uhat), {}, {}, 0};
    p.K.assign(N + 1, 0.0);
    p.segments.reserve(N + 1);
    p.segments.push_back(make_tail(true, p.Q.front(), p.uhat.front()));
    for (int j = 0; j + 1 < N; ++j) {
        p.K[j + 1] = K_interior[j];
        const bool exact_exp = classes[j].kind == BranchKind::ExpInterior;
        p.segments.push_back(make_interior_segment(p.Q[j], p.Q[j + 1], p.uhat[j],
                                                   p.uhat[j + 1], K_interior[j], shapes[j],
                                                   exact_exp, classes[j].exp_sign, r, qs));
    }
    p.segments.push_back(make_tail(false, p.Q.back(), p.uhat.back()));
    return p;
}

// Dense Gaussian elimination with partial pivoting; systems here are tiny
// (2N-1 unknowns).
bool solve_dense(std::vector<double>& A, std::vector<double>& b, int n) {
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int i = c + 1; i < n; ++i)
            if (std::abs(A[i * n + c]) > std::abs(A[piv * n + c])) piv = i;
        if (std::abs(A[piv * n + c]) < 1e-300) return false;
        if (piv != c) {
            for (int k = 0; k < n; ++k) std::swap(A[c * n + k], A[piv * n + k]);
            std::swap(b[c], b[piv]);
        }
        for (int i = c + 1; i < n; ++i) {
            const double f = A[i * n + c] / A[c * n + c];
            if (f == 0.0) continue;
            for (int k = c; k < n; ++k) A[i * n + k] -= f * A[c * n + k];
            b[i] -= f * b[c];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= A[i * n + k] * b[k];
        b[i] = s / A[i * n + i];
    }
    return true;
}

}  // namespace

BranchClass classify_interval(double u_a, double u_b, double dQ, Exponent r) {
    r.require_singular("classify_interval");
    if (!(dQ > 0.0)) throw std::invalid_argument("classify_interval: dQ must be > 0");
    if (sgn(u_a) * sgn(u_b) <= 0) return {BranchKind::SinhLike};

    const double a = std::abs(u_a), b = std::abs(u_b);
    const double grow = a * std::exp(dQ);
    if (std::abs(b - grow) <= kExpFitRelTol * std::max(b, grow))
        return {BranchKind::ExpInterior, 1};
    const double decay = a * std::exp(-dQ);
    if (std::abs(b - decay) <= kExpFitRelTol * std::max(b, decay))
        return {BranchKind::ExpInterior, -1};

    const double lnr = std::abs(std::log(b / a));
    return {dQ < lnr ? BranchKind::SinhLike : BranchKind::CoshLike};
}

Profile heights_to_profile(std::span<const double> Q, std::span<const double> uhat,
                           Exponent r, const ProfileSolveSettings& s_in) {
    r.require_singular("heights_to_profile");
    const ProfileSolveSettings s = tightened(s_in);
    const int N = static_cast<int>(Q.size());
    if (N < 1 || uhat.size() != Q.size())
        throw std::invalid_argument("heights_to_profile: bad Q/uhat sizes");
    for (int i = 1; i < N; ++i)
        if (!(Q[i] - Q[i - 1] > kMinGap))
            throw OrderingViolation("heights_to_profile: Q not increasing (or gap degenerate)");

    std::vector<double> K(N > 1 ? N - 1 : 0, 0.0);
    std::vector<PieceShape> shapes(K.size(), PieceShape::Monotone);
    std::vector<BranchClass> classes(K.size());
    for (int j = 0; j + 1 < N; ++j) {
        const double dQ = Q[j + 1] - Q[j];
        classes[j] = classify_interval(uhat[j], uhat[j + 1], dQ, r);
        switch (classes[j].kind) {
            case BranchKind::SinhLike:
                K[j] = solve_K_sinh(uhat[j], uhat[j + 1], dQ, r, s.quad);
                break;
            case BranchKind::ExpInterior:
                K[j] = 0.0;
                break;
            default: {
                const double len_cap = max_monotone_length(uhat[j], uhat[j + 1], r, s.quad);
                if (dQ > len_cap) {
                    K[j] = solve_K_cosh(uhat[j], uhat[j + 1], dQ, r, s.quad);
                    shapes[j] = PieceShape::TwoPiece;
                } else {
                    K[j] = solve_K_monotone_pos(uhat[j], uhat[j + 1], dQ, r, s.quad);
                }
            }
        }
    }
    return assemble_profile(r, {Q.begin(), Q.end()}, {uhat.begin(), uhat.end()}, std::move(K),
                            shapes, classes, s.quad);
}

std::vector<double> momenta_from_profile(const Profile& p) {
    const double r = p.r.value();
    std::vector<double> P(p.size());
    for (int i = 0; i < p.size(); ++i) {
        const double s_left = p.segments[i].slope_right;
        const double s_right = p.segments[i + 1].slope_left;
        P[i] = -(signed_pow(s_right, r - 1.0) - signed_pow(s_left, r - 1.0)) / (r - 1.0);
    }
    return P;
}

namespace {

struct SolveWorkspace {
    const PeakonState& st;
    Exponent r;
    const ProfileSolveSettings& s;
    int N;
    std::vector<double> dQ;

    std::vector<PieceShape> shapes;
    std::vector<BranchClass> classes;

    int dim() const { return 2 * N - 1; }

    void reclassify(const std::vector<double>& x, std::vector<double>& K_state) {
        for (int j = 0; j + 1 < N; ++j) {
            const double u_a = x[j], u_b = x[j + 1];
            classes[j] = classify_interval(u_a, u_b, dQ[j], r);
            PieceShape want = PieceShape::Monotone;
            if (classes[j].kind == BranchKind::CoshLike &&
                dQ[j] > max_monotone_length(u_a, u_b, r, s.quad))
                want = PieceShape::TwoPiece;
            if (want != shapes[j]) {
                shapes[j] = want;
                // Project K into the domain of the new shape so that the next
                // residual evaluation is feasible.
                if (want == PieceShape::TwoPiece) {
                    const double cap = std::pow(std::min(std::abs(u_a), std::abs(u_b)),
                                                r.value());
                    K_state[N + j] = std::clamp(K_state[N + j], 1e-3 * cap,
                                                cap * (1.0 - 1e-12));
                }
            }
        }
    }

    // Residual: N jump equations then N-1 length equations. NaN marks an
    // infeasible configuration. With J != nullptr the Jacobian is filled:
    // all entries analytic except d(length)/dK, which stays a scale-aware
    // central difference of the quadrature (the one genuinely
    // quadrature-defined sensitivity).
    std::vector<double> residual(const std::vector<double>& x,
                                 std::vector<double>* J = nullptr) const {
        const double rv = r.value();
        const int n = dim();
        std::vector<double> F(n, std::numeric_limits<double>::quiet_NaN());
        if (J) std::fill(J->begin(), J->end(), 0.0);
        std::vector<double> sl(N, 0.0), sr(N, 0.0);  // one-sided slopes at each peak
        sl[0] = x[0];                                // left tail: u_x = u
        sr[N - 1] = -x[N - 1];                       // right tail: u_x = -u
        std::vector<IntervalGeometry> geo(std::max(N - 1, 0));
        for (int j = 0; j + 1 < N; ++j) {
            try {
                geo[j] = interval_geometry(x[j], x[j + 1], x[N + j], shapes[j], r, s.quad);
            } catch (const std::exception&) {
                return F;  // infeasible probe, let the line search back off
            }
            if (!geo[j].feasible || !std::isfinite(geo[j].length)) return F;
            sr[j] = geo[j].slope_left;
            sl[j + 1] = geo[j].slope_right;
            F[N + j] = geo[j].length - dQ[j];
        }
        for (int i = 0; i < N; ++i)
            F[i] = -(signed_pow(sr[i], rv - 1.0) - signed_pow(sl[i], rv - 1.0)) / (rv - 1.0) -
                   st.P[i];
        if (!J) return F;

        auto at = [&](int row, int col) -> double& { return (*J)[row * n + col]; };
        for (int i = 0; i < N; ++i) {
            // d(jump_i)/dx = -(gR - gL), with the tail slopes u and -u at the ends
            const double gR_du = i + 1 < N ? geo[i].gsl_dua
                                           : -std::pow(std::abs(x[i]), rv - 2.0);
            const double gL_du = i > 0 ? geo[i - 1].gsr_dub
                                       : std::pow(std::abs(x[i]), rv - 2.0);
            at(i, i) = -(gR_du - gL_du);
            if (i + 1 < N) at(i, N + i) = -geo[i].gsl_dK;
            if (i > 0) at(i, N + i - 1) = geo[i - 1].gsr_dK;
        }
        for (int j = 0; j + 1 < N; ++j) {
            at(N + j, j) = geo[j].dlen_dua;
            at(N + j, j + 1) = geo[j].dlen_dub;
            // quadrature-defined entry: central difference with a step that
            // stays relative to |K| on the log-sensitive branches
            const bool same_sign = x[j] * x[j + 1] > 0.0;
            const double k_cap =
                std::pow(std::min(std::abs(x[j]), std::abs(x[j + 1])), rv);
            double h;
            if (same_sign && shapes[j] == PieceShape::Monotone)
                h = s.fd_eps * std::max(std::abs(x[N + j]), std::max(k_cap, 1e-12));
            else
                h = s.fd_eps * std::max(std::abs(x[N + j]), 1e-300);
            double lp = std::numeric_limits<double>::quiet_NaN(), lm = lp;
            try {
                lp = interval_geometry(x[j], x[j + 1], x[N + j] + h, shapes[j], r, s.quad)
                         .length;
            } catch (const std::exception&) {
            }
            try {
                lm = interval_geometry(x[j], x[j + 1], x[N + j] - h, shapes[j], r, s.quad)
                         .length;
            } catch (const std::exception&) {
            }
            if (std::isfinite(lp) && std::isfinite(lm))
                at(N + j, N + j) = (lp - lm) / (2.0 * h);
            else if (std::isfinite(lp))
                at(N + j, N + j) = (lp - geo[j].length) / h;
            else if (std::isfinite(lm))
                at(N + j, N + j) = (geo[j].length - lm) / h;
        }
        return F;
    }
};

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace

Profile solve_profile(const PeakonState& state, Exponent r, const Profile* warm,
                      const ProfileSolveSettings& s_in) {
    r.require_singular("solve_profile");
    const int N = state.size();
    for (int i = 1; i < N; ++i)
        if (!(state.Q[i] - state.Q[i - 1] > kMinGap))
            throw OrderingViolation("solve_profile: degenerate gap");

    const ProfileSolveSettings s = tightened(s_in);
    SolveWorkspace ws{state, r, s, N, {}, {}, {}};
    ws.dQ.resize(std::max(N - 1, 0));
    for (int j = 0; j + 1 < N; ++j) ws.dQ[j] = state.Q[j + 1] - state.Q[j];
    ws.shapes.assign(std::max(N - 1, 0), PieceShape::Monotone);
    ws.classes.assign(std::max(N - 1, 0), BranchClass{BranchKind::SinhLike});

    // Unknowns: uhat_1..uhat_N, K_1..K_{N-1}. The interval constants span
    // many orders of magnitude (K ~ exp(-r gap) for well-separated peaks),
    // so the cold start solves the 1D bracketed length relation per interval
    // and the Jacobian probes for K columns scale with |K| where the length
    // depends on it logarithmically.
    const int n = ws.dim();
    std::vector<double> x(n);
    const bool have_warm = warm && warm->size() == N && warm->r.value() == r.value();
    auto cold_init = [&]() {
        for (int i = 0; i < N; ++i) x[i] = height_from_momentum(state.P[i], r);
        for (int j = 0; j + 1 < N; ++j) {
            const BranchClass c = classify_interval(x[j], x[j + 1], ws.dQ[j], r);
            try {
                switch (c.kind) {
                    case BranchKind::SinhLike:
                        x[N + j] = solve_K_sinh(x[j], x[j + 1], ws.dQ[j], r, s.quad);
                        break;
                    case BranchKind::ExpInterior:
                        x[N + j] = 0.0;
                        break;
                    default: {
                        const double cap = max_monotone_length(x[j], x[j + 1], r, s.quad);
                        x[N + j] =
                            ws.dQ[j] > cap
                                ? solve_K_cosh(x[j], x[j + 1], ws.dQ[j], r, s.quad)
                                : solve_K_monotone_pos(x[j], x[j + 1], ws.dQ[j], r, s.quad);
                    }
                }
            } catch (const NoBracket&) {
                x[N + j] = 0.0;
            }
        }
    };

    // Nested fallback: eliminate each K_j by its 1D bracketed length solve
    // and run Newton on the peak heights alone. The flat (uhat, K) system is
    // singular when a turning point crosses an interval endpoint (L(K) folds
    // at K = min|uhat|^r with infinite slope); the nested composition is
    // regular there because the 1D dispatch re-picks the branch.
    auto solve_interval_K = [&](double ua, double ub, double dq,
                                PieceShape& shape) -> double {
        const BranchClass c = classify_interval(ua, ub, dq, r);
        shape = PieceShape::Monotone;
        switch (c.kind) {
            case BranchKind::SinhLike:
                return solve_K_sinh(ua, ub, dq, r, s.quad);
            case BranchKind::ExpInterior:
                return 0.0;
            default: {
                const double len_cap = max_monotone_length(ua, ub, r, s.quad);
                if (dq > len_cap) {
                    shape = PieceShape::TwoPiece;
                    return solve_K_cosh(ua, ub, dq, r, s.quad);
                }
                return solve_K_monotone_pos(ua, ub, dq, r, s.quad);
            }
        }
    };

    auto nested_solve = [&]() -> Profile {
        std::vector<double> y(x.begin(), x.begin() + N);
        std::vector<PieceShape> shapes(std::max(N - 1, 0), PieceShape::Monotone);
        std::vector<double> Ks(std::max(N - 1, 0), 0.0);
        auto jumps = [&](const std::vector<double>& yy, std::vector<double>& R) -> bool {
            const double rv = r.value();
            std::vector<double> sl(N, 0.0), sr(N, 0.0);
            sl[0] = yy[0];
            sr[N - 1] = -yy[N - 1];
            for (int j = 0; j + 1 < N; ++j) {
                try {
                    Ks[j] = solve_interval_K(yy[j], yy[j + 1], ws.dQ[j], shapes[j]);
                    const IntervalGeometry g =
                        interval_geometry(yy[j], yy[j + 1], Ks[j], shapes[j], r, s.quad);
                    if (!g.feasible) return false;
                    sr[j] = g.slope_left;
                    sl[j + 1] = g.slope_right;
                } catch (const std::exception&) {
                    return false;
                }
            }
            for (int i = 0; i < N; ++i)
                R[i] = -(signed_pow(sr[i], rv - 1.0) - signed_pow(sl[i], rv - 1.0)) /
                           (rv - 1.0) -
                       state.P[i];
            return true;
        };

        std::vector<double> R(N), Rt(N);
        if (!jumps(y, R)) throw NewtonDiverged("nested: infeasible start");
        for (int iter = 0; iter < s.max_newton_iters; ++iter) {
            const double nrm = inf_norm(R);
            if (nrm <= s.newton_tol) {
                std::vector<BranchClass> classes(std::max(N - 1, 0));
                for (int j = 0; j + 1 < N; ++j)
                    classes[j] = classify_interval(y[j], y[j + 1], ws.dQ[j], r);
                Profile p = assemble_profile(r, state.Q, y, Ks, shapes, classes, s.quad);
                p.newton_iters = iter;
                return p;
            }
            std::vector<double> J(N * N, 0.0);
            bool ok = true;
            for (int k = 0; k < N && ok; ++k) {
                const double h = s.fd_eps * std::max(1.0, std::abs(y[k]));
                std::vector<double> yp = y, ym = y;
                yp[k] += h;
                ym[k] -= h;
                std::vector<double> Rp(N), Rm(N);
                ok = jumps(yp, Rp) && jumps(ym, Rm);
                if (!ok) break;
                for (int i = 0; i < N; ++i) J[i * N + k] = (Rp[i] - Rm[i]) / (2.0 * h);
            }
            std::vector<double> step(R);
            for (double& v : step) v = -v;
            if (!ok || !solve_dense(J, step, N))
                throw NewtonDiverged("nested: jacobian failure");
            double lambda = 1.0;
            bool accepted = false;
            for (int hh = 0; hh <= s.max_halvings; ++hh) {
                std::vector<double> yt(N);
                for (int i = 0; i < N; ++i) yt[i] = y[i] + lambda * step[i];
                if (jumps(yt, Rt) && inf_norm(Rt) < nrm) {
                    y = yt;
                    R = Rt;
                    accepted = true;
                    break;
                }
                lambda *= s.damping_factor;
            }
            if (!accepted) throw NewtonDiverged("nested: line search stalled");
        }
        throw NewtonDiverged("nested: no convergence");
    };

    std::string last_error = "no attempts";
    enum class Attempt { FlatPrimary, Nested, FlatCold };
    const Attempt plan[3] = {Attempt::FlatPrimary, Attempt::Nested, Attempt::FlatCold};
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (plan[attempt] == Attempt::Nested) {
            try {
                return nested_solve();
            } catch (const NewtonDiverged& e) {
                last_error = e.what();
                continue;
            }
        }
        if (plan[attempt] == Attempt::FlatPrimary && have_warm) {
            for (int i = 0; i < N; ++i) x[i] = warm->uhat[i];
            for (int j = 0; j + 1 < N; ++j) x[N + j] = warm->K[j + 1];
        } else {
            cold_init();
        }
        // a short budget on the first try: a healthy warm start converges in
        // a handful of iterations and the nested fallback handles the rest
        const int iter_budget = plan[attempt] == Attempt::FlatPrimary
                                    ? std::min(s.max_newton_iters, 15)
                                    : s.max_newton_iters;

        bool failed = false;
        for (int iter = 0; iter < iter_budget && !failed; ++iter) {
            ws.reclassify(x, x);
            std::vector<double> J(n * n, 0.0);
            std::vector<double> F = ws.residual(x, &J);
            const double nrm = inf_norm(F);
            if (nrm <= s.newton_tol) {
                Profile p = assemble_profile(r, state.Q, {x.begin(), x.begin() + N},
                                             {x.begin() + N, x.end()}, ws.shapes,
                                             ws.classes, s.quad);
                p.newton_iters = iter;
                return p;
            }
            if (!std::isfinite(nrm)) {
                last_error = "infeasible iterate";
                failed = true;
                break;
            }
            std::vector<double> step(F);
            for (double& v : step) v = -v;
            if (!solve_dense(J, step, n)) {
                last_error = "singular Jacobian";
                failed = true;
                break;
            }

            double lambda = 1.0;
            bool accepted = false;
            for (int h = 0; h <= s.max_halvings; ++h) {
                std::vector<double> xt(n);
                for (int i = 0; i < n; ++i) xt[i] = x[i] + lambda * step[i];
                if (inf_norm(ws.residual(xt)) < nrm) {
                    x = std::move(xt);
                    accepted = true;
                    break;
                }
                lambda *= s.damping_factor;
            }
            if (!accepted) {
                if (std::getenv("RCH_DEBUG_SOLVE")) {
                    std::fprintf(stderr, "[solve_profile] stall t=%g iter=%d nrm=%.3e\n x:",
                                 state.t, iter, nrm);
                    for (int k = 0; k < n; ++k) std::fprintf(stderr, " %.17g", x[k]);
                    std::fprintf(stderr, "\n F:");
                    for (int k = 0; k < n; ++k) std::fprintf(stderr, " %.3e", F[k]);
                    std::fprintf(stderr, "\n step:");
                    for (int k = 0; k < n; ++k) std::fprintf(stderr, " %.3e", step[k]);
                    std::fprintf(stderr, "\n shapes:");
                    for (std::size_t k = 0; k < ws.shapes.size(); ++k)
                        std::fprintf(stderr, " %s",
                                     ws.shapes[k] == PieceShape::TwoPiece ? "two" : "mono");
                    std::fprintf(stderr, "\n");
                }
                last_error = "line search stalled";
                failed = true;
            }
        }
        if (!failed) last_error = "iteration budget exhausted";
    }
    throw NewtonDiverged("solve_profile: " + last_error + " at t=" + std::to_string(state.t));
}

std::vector<double> sample(const Profile& p, std::span<const double> xs,
                           const QuadratureSettings& qs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) {
        // Segment lookup; peaks themselves return the stored heights.
        const auto it = std::lower_bound(p.Q.begin(), p.Q.end(), x);
        if (it != p.Q.end() && *it == x) {
            out.push_back(p.uhat[it - p.Q.begin()]);
            continue;
        }
        const int seg = static_cast<int>(it - p.Q.begin());
        out.push_back(invert_point(p.segments[seg], x, p.r, qs));
    }
    return out;
}

Diagnostics energy(const Profile& p, const QuadratureSettings& qs) {
    const double r = p.r.value();
    double Eu = 0.0, Ex = 0.0;
    // Both tail integrals evaluate to |uhat|^r / r (u and u_x coincide there
    // up to sign).
    Eu += (std::pow(std::abs(p.uhat.front()), r) + std::pow(std::abs(p.uhat.back()), r)) / r;
    Ex = Eu;
    for (int j = 1; j + 1 < static_cast<int>(p.segments.size()) + 0; ++j) {
        const Segment& seg = p.segments[j];
        if (seg.branch == BranchKind::ExpTailLeft || seg.branch == BranchKind::ExpTailRight)
            continue;
        for (const MonotonePiece& piece : segment_pieces(seg, p.r, qs)) {
            const double lo = std::min(piece.w_at_lo, piece.w_at_hi);
            const double hi = std::max(piece.w_at_lo, piece.w_at_hi);
            Eu += kernels::u_pow(lo, hi, seg.K, r, qs);
            Ex += kernels::ux_pow(lo, hi, seg.K, r, qs);
        }
    }
    Diagnostics d;
    d.L = (Eu + Ex / (r - 1.0)) / r;
    d.H = (r - 1.0) * d.L;
    d.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < p.Q.size(); ++i)
        d.min_gap = std::min(d.min_gap, p.Q[i] - p.Q[i - 1]);
    for (double P : momenta_from_profile(p))
        d.p_signs.push_back(std::abs(P) < 1e-14 ? 0 : (P > 0 ? 1 : -1));
    return d;
}

std::string profile_to_json(const Profile& p, int indent) {
    nlohmann::json j;
    j["r"] = p.r.value();
    j["Q"] = p.Q;
    j["uhat"] = p.uhat;
    j["K"] = p.K;
    j["P"] = momenta_from_profile(p);
    j["newton_iters"] = p.newton_iters;
    nlohmann::json segs = nlohmann::json::array();
    for (const Segment& s : p.segments) {
        nlohmann::json js;
        js["branch"] = branch_name(s.branch);
        js["x_left"] = std::isfinite(s.x_left) ? nlohmann::json(s.x_left) : nlohmann::json();
        js["x_right"] = std::isfinite(s.x_right) ? nlohmann::json(s.x_right) : nlohmann::json();
        js["u_left"] = s.u_left;
        js["u_right"] = s.u_right;
        js["slope_left"] = s.slope_left;
        js["slope_right"] = s.slope_right;
        js["K"] = s.K;
        if (s.exp_sign != 0) js["exp_sign"] = s.exp_sign;
        if (s.turning_x) js["turning_x"] = *s.turning_x;
        if (s.turning_u) js["turning_u"] = *s.turning_u;
        segs.push_back(std::move(js));
    }
    j["segments"] = std::move(segs);
    return j.dump(indent);
}

Profile profile_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    Profile p{Exponent(j.at("r").get<double>()),
              j.at("Q").get<std::vector<double>>(),
              j.at("uhat").get<std::vector<double>>(),
              {},
              j.at("K").get<std::vector<double>>(),
              j.value("newton_iters", 0)};
    for (const auto& js : j.at("segments")) {
        Segment s;
        const std::string b = js.at("branch").get<std::string>();
        for (BranchKind k : {BranchKind::ExpTailLeft, BranchKind::ExpTailRight,
                             BranchKind::ExpInterior, BranchKind::SinhLike,
                             BranchKind::CoshLike})
            if (b == branch_name(k)) s.branch = k;
        s.x_left = js.at("x_left").is_null() ? -std::numeric_limits<double>::infinity()
                                             : js.at("x_left").get<double>();
        s.x_right = js.at("x_right").is_null() ? std::numeric_limits<double>::infinity()
                                               : js.at("x_right").get<double>();
        s.u_left = js.at("u_left").get<double>();
        s.u_right = js.at("u_right").get<double>();
        s.slope_left = js.at("slope_left").get<double>();
        s.slope_right = js.at("slope_right").get<double>();
        s.K = js.at("K").get<double>();
        s.exp_sign = js.value("exp_sign", 0);
        if (js.contains("turning_x")) s.turning_x = js.at("turning_x").get<double>();
        if (js.contains("turning_u")) s.turning_u = js.at("turning_u").get<double>();
        p.segments.push_back(std::move(s));
    }
    return p;
}

}  // namespace rch
