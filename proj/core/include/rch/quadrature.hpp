#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "rch/types.hpp"

namespace rch {

struct QuadratureSettings {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_subdivisions = 60;  ///< max bisection depth of one panel
};

namespace detail {

// Gauss 7 / Kronrod 15 rule, positive abscissae (QUADPACK values).
inline constexpr std::array<double, 8> gk15_x = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
inline constexpr std::array<double, 8> gk15_wk = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr std::array<double, 4> gk15_wg = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <class F>
inline std::pair<double, double> gk15_panel(F& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double hl = 0.5 * (b - a);
    double fv[15];
    fv[7] = f(mid);
    for (int i = 0; i < 7; ++i) {
        const double dx = hl * gk15_x[i];
        fv[i] = f(mid - dx);
        fv[14 - i] = f(mid + dx);
    }
    double ik = gk15_wk[7] * fv[7];
    double ig = gk15_wg[3] * fv[7];
    double resabs = gk15_wk[7] * std::abs(fv[7]);
    for (int i = 0; i < 7; ++i) {
        const double fs = fv[i] + fv[14 - i];
        ik += gk15_wk[i] * fs;
        if (i % 2 == 1) ig += gk15_wg[i / 2] * fs;
        resabs += gk15_wk[i] * (std::abs(fv[i]) + std::abs(fv[14 - i]));
    }
    // QUADPACK-style conservative error: scale |K15-G7| by the deviation
    // integral so near-cancellation does not fool the estimate.
    const double mean = 0.5 * ik;
    double resasc = gk15_wk[7] * std::abs(fv[7] - mean);
    for (int i = 0; i < 7; ++i)
        resasc += gk15_wk[i] * (std::abs(fv[i] - mean) + std::abs(fv[14 - i] - mean));
    ik *= hl;
    ig *= hl;
    resabs *= std::abs(hl);
    resasc *= std::abs(hl);
    double err = std::abs(ik - ig);
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    const double round_floor = 50.0 * 2.220446049250313e-16 * resabs;
    return {ik, std::max(err, round_floor)};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod 7/15 with worst-panel-first bisection.
template <class F>
double integrate_adaptive(F&& f, double a, double b, const QuadratureSettings& qs = {}) {
    if (a == b) return 0.0;
    double sgn = 1.0;
    if (a > b) {
        std::swap(a, b);
        sgn = -1.0;
    }

    struct Panel {
        double a, b, value, error;
        int depth;
    };
    auto [v0, e0] = detail::gk15_panel(f, a, b);
    std::vector<Panel> panels{{a, b, v0, e0, 0}};
    panels.reserve(64);

    const std::size_t max_panels = 4096;
    for (;;) {
        double total = 0.0, err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < panels.size(); ++i) {
            total += panels[i].value;
            err += panels[i].error;
            if (panels[i].error > panels[worst].error) worst = i;
        }
        const double tol = std::max(qs.abs_tol, qs.rel_tol * std::abs(total));
        if (err <= tol) return sgn * total;
        if (panels.size() >= max_panels || panels[worst].depth >= qs.max_subdivisions)
            throw QuadratureError("integrate_adaptive: tolerance not reached");

        const Panel p = panels[worst];
        const double m = 0.5 * (p.a + p.b);
        auto [vl, el] = detail::gk15_panel(f, p.a, m);
        auto [vr, er] = detail::gk15_panel(f, m, p.b);
        panels[worst] = {p.a, m, vl, el, p.depth + 1};
        panels.push_back({m, p.b, vr, er, p.depth + 1});
    }
}

/// Quadratures in the height variable w = |u| over [a, b] with 0 <= a <= b,
/// on a branch with constant K (so K <= a^r).  For K > 0 the weak endpoint
/// singularity at w = K^{1/r} is removed by the change of variables
/// v^r = w^r - K (plus v = z^2 to keep the integrand smooth for r < 3).
namespace kernels {

/// dx accumulated while |u| sweeps [a, b]:  int (w^r - K)^{-1/r} dw.
double length(double a, double b, double K, double r, const QuadratureSettings& qs);

/// int |u|^r dx over the same sweep:  int w^r (w^r - K)^{-1/r} dw.
double u_pow(double a, double b, double K, double r, const QuadratureSettings& qs);

/// int |u_x|^r dx over the same sweep:  int (w^r - K)^{(r-1)/r} dw.
double ux_pow(double a, double b, double K, double r, const QuadratureSettings& qs);

/// Antiderivative of |u|^{r-1} in x along a monotone piece, as a function of
/// the local height:  Psi(w) = (w^r - K)^{(r-1)/r} / (r-1), exact.
double psi_prim(double w, double K, double r);

}  // namespace kernels

/// Monotone-in-x piece of a segment: |u| runs from w(x_lo) to w(x_hi) without
/// a turning point or zero crossing inside, with constant sign sign_u.
struct MonotonePiece {
    double x_lo, x_hi;
    double w_at_lo, w_at_hi;  ///< |u| at x_lo and x_hi
    int sign_u;
};

/// Decompose an interior segment into its 1 or 2 monotone pieces (split at
/// the zero crossing of a sign-changing sinh segment, or at the turning
/// point of a cosh segment). Tails are not accepted here.
std::vector<MonotonePiece> segment_pieces(const Segment& seg, Exponent r,
                                          const QuadratureSettings& qs = {});

/// Positive arc length between heights u_a and u_b along the monotone branch
/// (the K <= 0 quadrature; also valid for 0 < K <= min|u|^r with same-sign
/// endpoints, which is the turning-point-outside-the-interval fallback).
double length_monotone(double u_a, double u_b, double K, Exponent r,
                       const QuadratureSettings& qs = {});

/// Monotone length in the limit K -> min(|u_a|,|u_b|)^r, i.e. the longest a
/// monotone same-sign segment between these heights can be.
double max_monotone_length(double u_a, double u_b, Exponent r,
                           const QuadratureSettings& qs = {});

/// Arc length between heights on a K <= 0 branch. For K = 0 and same-sign
/// endpoints this is |ln(u_b/u_a)| exactly.
double length_integral_neg(double u_a, double u_b, double K, Exponent r,
                           const QuadratureSettings& qs = {});

/// Two-piece arc length through the turning value K^{1/r} (descend from
/// |u_a|, ascend to |u_b|), K > 0, same-sign endpoints.
double length_integral_pos(double u_a, double u_b, double K, Exponent r,
                           const QuadratureSettings& qs = {});

/// Invert the implicit length relation for K < 0 (sinh-like) intervals:
/// find K with length(u_a -> u_b; K) = dQ. Throws NoBracket when dQ exceeds
/// the K -> 0- limiting length (the interval is an exp or cosh branch).
double solve_K_sinh(double u_a, double u_b, double dQ, Exponent r,
                    const QuadratureSettings& qs = {});

/// Invert the two-piece relation for K > 0 intervals with an interior
/// turning point. Throws NoBracket when dQ is below the turning-at-endpoint
/// length (the interval is monotone and the caller falls back to the
/// monotone quadrature).
double solve_K_cosh(double u_a, double u_b, double dQ, Exponent r,
                    const QuadratureSettings& qs = {});

/// Monotone fallback for same-sign intervals whose gap sits between the
/// exponential fit and the turning-at-endpoint length: K in (0, min|u|^r).
double solve_K_monotone_pos(double u_a, double u_b, double dQ, Exponent r,
                            const QuadratureSettings& qs = {});

/// Solve for |u| a distance dx (>= 0) into a monotone piece that starts at
/// height w_start and runs toward w_end under constant K.
double invert_on_piece(double w_start, double w_end, double K, double r, double dx,
                       const QuadratureSettings& qs);

/// Evaluate u(x) inside a segment by inverting the length relation (tails
/// and exponential interiors use their closed forms).
double invert_point(const Segment& seg, double x, Exponent r,
                    const QuadratureSettings& qs = {});

}  // namespace rch
