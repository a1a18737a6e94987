#include "rch/quadrature.hpp"

#include <cmath>
#include <limits>

#include "rch/rootfind.hpp"

namespace rch {

namespace {

inline int sgn(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

// Clamped (w^r - K)^{1/r}. When w sits at the turning value the difference
// w^r - K is pure rounding noise (order eps*K); snap it to zero so the
// transformed integration bound does not jitter.
inline double v_of(double w, double K, double r) {
    double q = std::pow(w, r) - K;
    if (K > 0.0 && q < 8.0 * 2.220446049250313e-16 * K) q = 0.0;
    return std::pow(std::max(q, 0.0), 1.0 / r);
}

}  // namespace

namespace kernels {

double length(double a, double b, double K, double r, const QuadratureSettings& qs) {
    if (!(a <= b)) throw std::invalid_argument("kernels::length: need a <= b");
    if (a == b) return 0.0;
    if (K == 0.0) {
        if (a <= 0.0) throw std::domain_error("kernels::length: divergent at w=0 for K=0");
        return std::log(b / a);
    }
    if (K < 0.0) {
        const double e = -1.0 / r;
        return integrate_adaptive([&](double w) { return std::pow(std::pow(w, r) - K, e); },
                                  a, b, qs);
    }
    // K > 0: v^r = w^r - K, then v = z^2 so the integrand stays smooth at the
    // turning value for every real r >= 2.
    const double za = std::sqrt(v_of(a, K, r));
    const double zb = std::sqrt(v_of(b, K, r));
    const double pz = 2.0 * r - 3.0;
    const double e = -(r - 1.0) / r;
    return integrate_adaptive(
        [&](double z) { return 2.0 * std::pow(z, pz) * std::pow(std::pow(z, 2.0 * r) + K, e); },
        za, zb, qs);
}

double u_pow(double a, double b, double K, double r, const QuadratureSettings& qs) {
    if (!(a <= b)) throw std::invalid_argument("kernels::u_pow: need a <= b");
    if (a == b) return 0.0;
    if (K == 0.0) return (std::pow(b, r) - std::pow(a, r)) / r;
    if (K < 0.0) {
        const double e = -1.0 / r;
        return integrate_adaptive(
            [&](double w) {
                const double wr = std::pow(w, r);
                return wr * std::pow(wr - K, e);
            },
            a, b, qs);
    }
    const double za = std::sqrt(v_of(a, K, r));
    const double zb = std::sqrt(v_of(b, K, r));
    const double pz = 2.0 * r - 3.0;
    const double e = 1.0 / r;
    return integrate_adaptive(
        [&](double z) { return 2.0 * std::pow(z, pz) * std::pow(std::pow(z, 2.0 * r) + K, e); },
        za, zb, qs);
}

double ux_pow(double a, double b, double K, double r, const QuadratureSettings& qs) {
    if (!(a <= b)) throw std::invalid_argument("kernels::ux_pow: need a <= b");
    if (a == b) return 0.0;
    if (K == 0.0) return (std::pow(b, r) - std::pow(a, r)) / r;
    if (K < 0.0) {
        const double e = (r - 1.0) / r;
        return integrate_adaptive([&](double w) { return std::pow(std::pow(w, r) - K, e); },
                                  a, b, qs);
    }
    const double za = std::sqrt(v_of(a, K, r));
    const double zb = std::sqrt(v_of(b, K, r));
    const double pz = 4.0 * r - 3.0;
    const double e = (1.0 - r) / r;
    return integrate_adaptive(
        [&](double z) { return 2.0 * std::pow(z, pz) * std::pow(std::pow(z, 2.0 * r) + K, e); },
        za, zb, qs);
}

double psi_prim(double w, double K, double r) {
    return std::pow(std::max(std::pow(std::abs(w), r) - K, 0.0), (r - 1.0) / r) / (r - 1.0);
}

}  // namespace kernels

double length_monotone(double u_a, double u_b, double K, Exponent rr,
                       const QuadratureSettings& qs) {
    const double r = rr.value();
    const double a = std::abs(u_a), b = std::abs(u_b);
    if (sgn(u_a) * sgn(u_b) < 0) {
        if (K >= 0.0)
            throw std::domain_error("length_monotone: sign change requires K < 0");
        return kernels::length(0.0, a, K, r, qs) + kernels::length(0.0, b, K, r, qs);
    }
    if (u_a == 0.0 || u_b == 0.0) {
        if (K >= 0.0)
            throw std::domain_error("length_monotone: zero endpoint requires K < 0");
        return kernels::length(0.0, std::max(a, b), K, r, qs);
    }
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (K > std::pow(lo, r))
        throw std::domain_error("length_monotone: K above min endpoint power");
    return kernels::length(lo, hi, K, r, qs);
}

double max_monotone_length(double u_a, double u_b, Exponent rr, const QuadratureSettings& qs) {
    const double r = rr.value();
    if (sgn(u_a) * sgn(u_b) <= 0)
        return std::numeric_limits<double>::infinity();
    const double lo = std::min(std::abs(u_a), std::abs(u_b));
    const double hi = std::max(std::abs(u_a), std::abs(u_b));
    if (lo == hi) return 0.0;
    return kernels::length(lo, hi, std::pow(lo, r), r, qs);
}

double length_integral_neg(double u_a, double u_b, double K, Exponent rr,
                           const QuadratureSettings& qs) {
    if (K > 0.0) throw std::domain_error("length_integral_neg: K must be <= 0");
    if (u_a == u_b) throw std::invalid_argument("length_integral_neg: u_a == u_b");
    return length_monotone(u_a, u_b, K, rr, qs);
}

double length_integral_pos(double u_a, double u_b, double K, Exponent rr,
                           const QuadratureSettings& qs) {
    const double r = rr.value();
    if (!(K > 0.0)) throw std::domain_error("length_integral_pos: K must be > 0");
    if (sgn(u_a) * sgn(u_b) <= 0)
        throw std::domain_error("length_integral_pos: endpoints must share a nonzero sign");
    const double a = std::abs(u_a), b = std::abs(u_b);
    if (std::pow(std::min(a, b), r) < K * (1.0 - 1e-12))
        throw std::domain_error("length_integral_pos: turning value above an endpoint");
    const double tau = std::pow(K, 1.0 / r);
    return kernels::length(std::min(tau, a), a, K, r, qs) +
           kernels::length(std::min(tau, b), b, K, r, qs);
}

namespace {

// Bracketed root solve in s = ln|K|, shared by the three K inversions.
template <class LengthOf>
double solve_log_bracketed(LengthOf&& len_of_s, double dQ, double s_lo, double s_hi,
                           const QuadratureSettings& qs) {
    auto g = [&](double s) { return len_of_s(s) - dQ; };
    double ga = g(s_lo), gb = g(s_hi);
    if (ga == 0.0) return s_lo;
    if (gb == 0.0) return s_hi;
    if ((ga > 0.0) == (gb > 0.0))
        throw NoBracket("solve_K: no sign change on the expanded bracket");
    RootOptions opt;
    opt.xtol = 1e-13;
    opt.ftol = qs.abs_tol;
    return brent_root(g, s_lo, s_hi, ga, gb, opt);
}

}  // namespace

double solve_K_sinh(double u_a, double u_b, double dQ, Exponent rr,
                    const QuadratureSettings& qs) {
    const double r = rr.value();
    if (!(dQ > 0.0)) throw std::invalid_argument("solve_K_sinh: dQ must be > 0");
    const bool same_sign = sgn(u_a) * sgn(u_b) > 0;
    if (same_sign) {
        // K -> 0- limit of the monotone length.
        const double sup = std::abs(std::log(std::abs(u_b) / std::abs(u_a)));
        if (dQ >= sup)
            throw NoBracket("solve_K_sinh: gap exceeds the K->0 length (exp or cosh branch)");
    }
    auto len_of_s = [&](double s) { return length_monotone(u_a, u_b, -std::exp(s), rr, qs); };

    // Length decreases as s = ln|K| grows. Expand until the bracket holds.
    double s_hi = std::log(std::max({std::abs(u_a), std::abs(u_b), 1.0})) * r;
    while (len_of_s(s_hi) > dQ) {
        s_hi += 2.0;
        if (s_hi > 700.0) throw NoBracket("solve_K_sinh: |K| overflow while bracketing");
    }
    double s_lo = s_hi - 2.0;
    while (len_of_s(s_lo) < dQ) {
        s_lo -= 2.0;
        if (s_lo < -700.0) throw NoBracket("solve_K_sinh: K underflow while bracketing");
    }
    return -std::exp(solve_log_bracketed(len_of_s, dQ, s_lo, s_hi, qs));
}

double solve_K_cosh(double u_a, double u_b, double dQ, Exponent rr,
                    const QuadratureSettings& qs) {
    const double r = rr.value();
    if (!(dQ > 0.0)) throw std::invalid_argument("solve_K_cosh: dQ must be > 0");
    if (sgn(u_a) * sgn(u_b) <= 0)
        throw std::domain_error("solve_K_cosh: endpoints must share a nonzero sign");
    const double lo = std::min(std::abs(u_a), std::abs(u_b));
    const double k_cap = std::pow(lo, r);
    const double len_at_cap = max_monotone_length(u_a, u_b, rr, qs);
    if (dQ <= len_at_cap)
        throw NoBracket("solve_K_cosh: gap below the turning-at-endpoint length");

    auto len_of_s = [&](double s) {
        return length_integral_pos(u_a, u_b, std::min(std::exp(s), k_cap), rr, qs);
    };
    // Length decreases in K, so g(s) = len - dQ goes + -> - as s grows.
    double s_hi = std::log(k_cap);
    double s_lo = s_hi - 2.0;
    while (len_of_s(s_lo) < dQ) {
        s_lo -= 2.0;
        if (s_lo < -700.0) throw NoBracket("solve_K_cosh: K underflow while bracketing");
    }
    const double s = solve_log_bracketed(len_of_s, dQ, s_lo, s_hi, qs);
    return std::min(std::exp(s), k_cap);
}

double solve_K_monotone_pos(double u_a, double u_b, double dQ, Exponent rr,
                            const QuadratureSettings& qs) {
    const double r = rr.value();
    if (!(dQ > 0.0)) throw std::invalid_argument("solve_K_monotone_pos: dQ must be > 0");
    if (sgn(u_a) * sgn(u_b) <= 0)
        throw std::domain_error("solve_K_monotone_pos: endpoints must share a nonzero sign");
    const double sup = max_monotone_length(u_a, u_b, rr, qs);
    const double inf = std::abs(std::log(std::abs(u_b) / std::abs(u_a)));
    if (!(dQ > inf) || !(dQ <= sup))
        throw NoBracket("solve_K_monotone_pos: gap outside (exp fit, turning-at-endpoint]");
    const double k_cap = std::pow(std::min(std::abs(u_a), std::abs(u_b)), r);

    auto len_of_s = [&](double s) {
        return length_monotone(u_a, u_b, std::min(std::exp(s), k_cap), rr, qs);
    };
    double s_hi = std::log(k_cap);
    double s_lo = s_hi - 2.0;
    while (len_of_s(s_lo) > dQ) {
        s_lo -= 2.0;
        if (s_lo < -700.0) throw NoBracket("solve_K_monotone_pos: K underflow while bracketing");
    }
    const double s = solve_log_bracketed(len_of_s, dQ, s_lo, s_hi, qs);
    return std::min(std::exp(s), k_cap);
}

std::vector<MonotonePiece> segment_pieces(const Segment& seg, Exponent rr,
                                          const QuadratureSettings& qs) {
    const double r = rr.value();
    if (seg.branch == BranchKind::ExpTailLeft || seg.branch == BranchKind::ExpTailRight)
        throw std::invalid_argument("segment_pieces: tails have no finite piece decomposition");

    std::vector<MonotonePiece> out;
    const double a = std::abs(seg.u_left), b = std::abs(seg.u_right);
    if (seg.branch == BranchKind::SinhLike && sgn(seg.u_left) * sgn(seg.u_right) < 0) {
        const double x0 = seg.x_left + kernels::length(0.0, a, seg.K, r, qs);
        out.push_back({seg.x_left, x0, a, 0.0, sgn(seg.u_left)});
        out.push_back({x0, seg.x_right, 0.0, b, sgn(seg.u_right)});
    } else if (seg.branch == BranchKind::CoshLike && seg.turning_x) {
        const double tau = std::pow(seg.K, 1.0 / r);
        const int s = sgn(seg.u_left);
        out.push_back({seg.x_left, *seg.turning_x, a, tau, s});
        out.push_back({*seg.turning_x, seg.x_right, tau, b, s});
    } else {
        const int s = seg.u_left != 0.0 ? sgn(seg.u_left) : sgn(seg.u_right);
        out.push_back({seg.x_left, seg.x_right, a, b, s});
    }
    return out;
}

double invert_on_piece(double w_start, double w_end, double K, double r, double dx,
                       const QuadratureSettings& qs) {
    if (dx <= 0.0) return w_start;
    const double lo = std::min(w_start, w_end), hi = std::max(w_start, w_end);
    const double full = kernels::length(lo, hi, K, r, qs);
    if (dx >= full) return w_end;

    RootOptions opt;
    opt.xtol = 1e-13 * std::max(1.0, hi);
    opt.ftol = 0.1 * qs.abs_tol;
    if (w_start <= w_end) {
        auto g = [&](double w) { return kernels::length(w_start, w, K, r, qs) - dx; };
        return brent_root(g, w_start, w_end, -dx, full - dx, opt);
    }
    auto g = [&](double w) { return kernels::length(w, w_start, K, r, qs) - dx; };
    return brent_root(g, w_end, w_start, full - dx, -dx, opt);
}

double invert_point(const Segment& seg, double x, Exponent rr, const QuadratureSettings& qs) {
    switch (seg.branch) {
        case BranchKind::ExpTailLeft:
            return seg.u_right * std::exp(x - seg.x_right);
        case BranchKind::ExpTailRight:
            return seg.u_left * std::exp(seg.x_left - x);
        case BranchKind::ExpInterior:
            return seg.u_left * std::exp(seg.exp_sign * (x - seg.x_left));
        default:
            break;
    }
    if (!(x >= seg.x_left && x <= seg.x_right))
        throw std::invalid_argument("invert_point: x outside segment");
    for (const MonotonePiece& p : segment_pieces(seg, rr, qs)) {
        if (x > p.x_hi) continue;
        const double w =
            invert_on_piece(p.w_at_lo, p.w_at_hi, seg.K, rr.value(), x - p.x_lo, qs);
        return p.sign_u * w;
    }
    // x == x_right up to rounding
    return seg.u_right;
}

}  // namespace rch
