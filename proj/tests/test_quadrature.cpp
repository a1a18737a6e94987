#include <doctest.h>

#include <cmath>
#include <random>

#include "rch/quadrature.hpp"
#include "rch/types.hpp"

using namespace rch;

namespace {

// r=2 closed forms used as oracles: with K=-1 the branch is u = sinh(x-x0)
// (length = asinh difference), with K=+1 it is u = cosh(x-x*) (length =
// acosh difference). These live only in the tests.
double sinh_length_r2(double u_a, double u_b) { return std::asinh(u_b) - std::asinh(u_a); }
double cosh_length_r2(double w) { return std::acosh(w); }

const QuadratureSettings qs{};

}  // namespace

TEST_CASE("length_integral_neg closed forms") {
    const Exponent r3(3.0);
    // K=0: integrand is 1/w
    CHECK(length_integral_neg(1.0, std::exp(1.0), 0.0, r3, qs) ==
          doctest::Approx(1.0).epsilon(1e-12));

    const Exponent r2(2.0);
    CHECK(length_integral_neg(0.0, std::sinh(1.0), -1.0, r2, qs) ==
          doctest::Approx(1.0).epsilon(1e-11));
    CHECK(length_integral_neg(-std::sinh(0.5), std::sinh(0.5), -1.0, r2, qs) ==
          doctest::Approx(1.0).epsilon(1e-11));
    // generic asinh oracle
    CHECK(length_integral_neg(0.3, 2.7, -1.0, r2, qs) ==
          doctest::Approx(sinh_length_r2(0.3, 2.7)).epsilon(1e-11));
}

TEST_CASE("length_integral_pos closed forms") {
    const Exponent r2(2.0);
    CHECK(length_integral_pos(std::cosh(1.0), std::cosh(1.0), 1.0, r2, qs) ==
          doctest::Approx(2.0).epsilon(1e-11));
    CHECK(length_integral_pos(std::cosh(1.0), 1.0, 1.0, r2, qs) ==
          doctest::Approx(1.0).epsilon(1e-11));
    // negative-sign branch: pieces 0.3 and 0.7
    CHECK(length_integral_pos(-std::cosh(0.3), -std::cosh(0.7), 1.0, r2, qs) ==
          doctest::Approx(1.0).epsilon(1e-11));
    CHECK(length_integral_pos(std::cosh(2.0), std::cosh(1.0), 1.0, r2, qs) ==
          doctest::Approx(cosh_length_r2(std::cosh(2.0)) + cosh_length_r2(std::cosh(1.0)))
              .epsilon(1e-11));
}

TEST_CASE("substituted and raw integrands agree away from the turning value") {
    // For K > 0 and endpoints away from K^{1/r} the raw integrand is regular,
    // so integrating it directly must match the substituted kernel.
    for (double r : {2.0, 3.0, 4.5, 6.0}) {
        const double K = 0.7;
        const double a = 1.4, b = 3.0;  // a^r > K comfortably
        const double direct = integrate_adaptive(
            [&](double w) { return std::pow(std::pow(w, r) - K, -1.0 / r); }, a, b, qs);
        CHECK(kernels::length(a, b, K, r, qs) == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("solve_K_sinh round trips") {
    const Exponent r2(2.0);
    CHECK(solve_K_sinh(-std::sinh(0.5), std::sinh(0.5), 1.0, r2, qs) ==
          doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(solve_K_sinh(-std::sinh(1.0), std::sinh(1.0), 2.0, r2, qs) ==
          doctest::Approx(-1.0).epsilon(1e-9));

    // |K| grows without bound as the gap shrinks
    const double k1 = solve_K_sinh(-1.0, 1.0, 0.1, r2, qs);
    const double k2 = solve_K_sinh(-1.0, 1.0, 0.01, r2, qs);
    CHECK(k1 < 0.0);
    CHECK(k2 < 100.0 * k1);

    // same-sign with a gap beyond the K->0 limit is not a sinh interval
    CHECK_THROWS_AS(solve_K_sinh(1.0, 2.0, 5.0, r2, qs), NoBracket);
}

TEST_CASE("solve_K_cosh round trips") {
    const Exponent r2(2.0);
    CHECK(solve_K_cosh(std::cosh(1.0), std::cosh(1.0), 2.0, r2, qs) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(solve_K_cosh(std::cosh(2.0), std::cosh(1.0), 3.0, r2, qs) ==
          doctest::Approx(1.0).epsilon(1e-9));
    // tiny gap with equal heights: turning value approaches the endpoint height
    const double uh = 1.7;
    const double k = solve_K_cosh(uh, uh, 1e-3, r2, qs);
    CHECK(std::sqrt(k) == doctest::Approx(uh).epsilon(1e-6));
    // gap below the turning-at-endpoint length signals misclassification
    CHECK_THROWS_AS(solve_K_cosh(std::cosh(2.0), std::cosh(1.0), 0.2, r2, qs), NoBracket);
}

TEST_CASE("solve_K round trip property across r") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uu(0.2, 3.0), ug(0.05, 3.0);
    const double rs[] = {2.0, 3.0, 4.5, 6.0};
    for (int k = 0; k < 60; ++k) {
        const Exponent r(rs[k % 4]);
        // opposite signs keep us on the sinh branch for any gap
        const double ua = -uu(rng), ub = uu(rng), dq = ug(rng);
        const double K = solve_K_sinh(ua, ub, dq, r, qs);
        CHECK(length_integral_neg(ua, ub, K, r, qs) == doctest::Approx(dq).epsilon(1e-9));
    }
}

TEST_CASE("length is monotone decreasing in |K| on the sinh branch") {
    for (double r : {2.0, 3.7, 6.0}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double mag : {0.25, 1.0, 4.0, 16.0, 64.0}) {
            const double len = length_integral_neg(-1.0, 2.0, -mag, Exponent(r), qs);
            CHECK(len < prev);
            prev = len;
        }
    }
}

TEST_CASE("lengths are invariant under height sign flips") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> uu(0.2, 2.5);
    for (double r : {2.0, 3.0, 4.5}) {
        const Exponent re(r);
        for (int k = 0; k < 20; ++k) {
            const double a = uu(rng), b = uu(rng);
            CHECK(length_integral_neg(a, a + b, -0.8, re, qs) ==
                  doctest::Approx(length_integral_neg(-a, -a - b, -0.8, re, qs))
                      .epsilon(1e-12));
            const double K = 0.9 * std::pow(std::min(a, b) + 0.2, r);
            CHECK(length_integral_pos(a + 0.2, b + 0.2, K, re, qs) ==
                  doctest::Approx(length_integral_pos(-a - 0.2, -b - 0.2, K, re, qs))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("invert_point on tails, turning points and zero crossings") {
    const Exponent r2(2.0);

    Segment tail;
    tail.branch = BranchKind::ExpTailLeft;
    tail.x_right = 0.0;
    tail.u_right = 2.0;
    tail.x_left = -std::numeric_limits<double>::infinity();
    CHECK(invert_point(tail, -1.0, r2, qs) == doctest::Approx(2.0 * std::exp(-1.0)));

    // cosh segment u = cosh(x - 1) on [0, 2]: K = 1, turning at x = 1
    Segment cosh_seg;
    cosh_seg.branch = BranchKind::CoshLike;
    cosh_seg.x_left = 0.0;
    cosh_seg.x_right = 2.0;
    cosh_seg.u_left = std::cosh(1.0);
    cosh_seg.u_right = std::cosh(1.0);
    cosh_seg.K = 1.0;
    cosh_seg.turning_x = 1.0;
    cosh_seg.turning_u = 1.0;
    CHECK(invert_point(cosh_seg, 1.0, r2, qs) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(invert_point(cosh_seg, 0.4, r2, qs) ==
          doctest::Approx(std::cosh(0.6)).epsilon(1e-10));
    CHECK(invert_point(cosh_seg, 1.7, r2, qs) ==
          doctest::Approx(std::cosh(0.7)).epsilon(1e-10));

    // sinh segment u = sinh(x - 1) on [0, 2]: K = -1, zero at x = 1
    Segment sinh_seg;
    sinh_seg.branch = BranchKind::SinhLike;
    sinh_seg.x_left = 0.0;
    sinh_seg.x_right = 2.0;
    sinh_seg.u_left = std::sinh(-1.0);
    sinh_seg.u_right = std::sinh(1.0);
    sinh_seg.K = -1.0;
    CHECK(invert_point(sinh_seg, 1.0, r2, qs) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(invert_point(sinh_seg, 1.5, r2, qs) ==
          doctest::Approx(std::sinh(0.5)).epsilon(1e-10));
    CHECK(invert_point(sinh_seg, 0.25, r2, qs) ==
          doctest::Approx(std::sinh(-0.75)).epsilon(1e-10));
}

TEST_CASE("adaptive integrator reports nonconvergence") {
    QuadratureSettings tight;
    tight.abs_tol = 1e-300;
    tight.rel_tol = 1e-300;
    tight.max_subdivisions = 2;
    CHECK_THROWS_AS(
        integrate_adaptive([](double x) { return std::sqrt(std::abs(x - 0.123)); }, 0.0, 1.0,
                           tight),
        QuadratureError);
}
