#include <doctest.h>

#include <cmath>
#include <random>

#include "rch/profile.hpp"

using namespace rch;

namespace {
const QuadratureSettings qs{};

Profile two_peak(double q0, double q1, double u0, double u1, double r) {
    const double Q[] = {q0, q1};
    const double UH[] = {u0, u1};
    return heights_to_profile(Q, UH, Exponent(r));
}
}  // namespace

TEST_CASE("classify_interval") {
    CHECK(classify_interval(1.0, -1.0, 1.0, Exponent(2.0)).kind == BranchKind::SinhLike);
    const BranchClass e = classify_interval(1.0, std::exp(1.0), 1.0, Exponent(3.0));
    CHECK(e.kind == BranchKind::ExpInterior);
    CHECK(e.exp_sign == 1);
    CHECK(classify_interval(std::cosh(1.0), std::cosh(1.0), 2.0, Exponent(2.0)).kind ==
          BranchKind::CoshLike);
    // decaying exponential fit
    const BranchClass d = classify_interval(2.0, 2.0 * std::exp(-1.5), 1.5, Exponent(4.0));
    CHECK(d.kind == BranchKind::ExpInterior);
    CHECK(d.exp_sign == -1);
    // same-sign, gap shorter than the K->0 length: sinh
    CHECK(classify_interval(1.0, 2.0, 0.3, Exponent(2.0)).kind == BranchKind::SinhLike);
    // same-sign, gap longer: cosh
    CHECK(classify_interval(1.0, 2.0, 3.0, Exponent(2.0)).kind == BranchKind::CoshLike);
}

TEST_CASE("single peakon profile") {
    const double Q[] = {0.0};
    const double UH[] = {1.0};
    const Profile p = heights_to_profile(Q, UH, Exponent(2.0));
    REQUIRE(p.segments.size() == 2);
    CHECK(p.K[0] == 0.0);
    CHECK(p.K[1] == 0.0);
    const double xs[] = {-1.0, 0.0, 2.0};
    const std::vector<double> us = sample(p, xs, qs);
    CHECK(us[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(us[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(us[2] == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("well separated equal peaks give a cosh interior with near-unit slopes") {
    const Profile p = two_peak(0.0, 10.0, 1.0, 1.0, 2.0);
    const Segment& seg = p.segments[1];
    CHECK(seg.branch == BranchKind::CoshLike);
    REQUIRE(seg.turning_x.has_value());
    CHECK(*seg.turning_x == doctest::Approx(5.0).epsilon(1e-9));
    // u = sqrt(K) cosh(x-5) on the interior: closed-form cross-check
    CHECK(std::sqrt(seg.K) == doctest::Approx(1.0 / std::cosh(5.0)).epsilon(1e-9));
    CHECK(seg.slope_left == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(seg.slope_right == doctest::Approx(1.0).epsilon(1e-4));
    const double xs[] = {5.0};
    CHECK(sample(p, xs, qs)[0] == doctest::Approx(std::sqrt(seg.K)).epsilon(1e-9));
}

TEST_CASE("antisymmetric pair is odd about the midpoint") {
    const double L = 7.0;
    for (double r : {2.0, 3.5, 6.0}) {
        const Profile p = two_peak(0.0, L, 1.0, -1.0, r);
        CHECK(p.segments[1].branch == BranchKind::SinhLike);
        CHECK(p.K[1] < 0.0);
        const double xs[] = {0.5 * L, 1.0, L - 1.0, 2.5, L - 2.5};
        const std::vector<double> us = sample(p, xs, qs);
        CHECK(us[0] == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(us[1] == doctest::Approx(-us[2]).epsilon(1e-9));
        CHECK(us[3] == doctest::Approx(-us[4]).epsilon(1e-9));
        const std::vector<double> P = momenta_from_profile(p);
        CHECK(P[0] > 0.0);
        CHECK(P[0] == doctest::Approx(-P[1]).epsilon(1e-12));
    }
}

TEST_CASE("momenta of a well-separated pair decouple into single-peakon values") {
    const Profile p = two_peak(0.0, 40.0, 1.5, 1.0, 2.0);
    const std::vector<double> P = momenta_from_profile(p);
    CHECK(P[0] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(P[1] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("solve_profile closed form for one peak") {
    const PeakonState st(0.0, {2.0}, {2.0});
    const Profile p = solve_profile(st, Exponent(2.0));
    CHECK(p.uhat[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.newton_iters == 0);  // the cold start is already exact
}

TEST_CASE("solve_profile keeps antisymmetry and K < 0") {
    const Profile base = two_peak(0.0, 6.0, 1.0, -1.0, 4.0);
    const std::vector<double> P = momenta_from_profile(base);
    const Profile p = solve_profile(PeakonState(0.0, {0.0, 6.0}, P), Exponent(4.0));
    CHECK(p.uhat[0] == doctest::Approx(-p.uhat[1]).epsilon(1e-10));
    CHECK(p.uhat[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.K[1] < 0.0);
}

TEST_CASE("solve_profile round trips for random states") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> uh(0.4, 2.2), gap(1.0, 6.0), sgn01(0.0, 1.0);
    const double rs[] = {2.0, 3.0, 4.5, 6.0};
    int idx = 0;
    for (int N : {1, 2, 3}) {
        for (int rep = 0; rep < 6; ++rep) {
            const Exponent r(rs[idx++ % 4]);
            std::vector<double> Q(N), UH(N);
            double q = -2.0;
            for (int i = 0; i < N; ++i) {
                q += gap(rng);
                Q[i] = q;
                UH[i] = uh(rng) * (sgn01(rng) < 0.25 ? -1.0 : 1.0);
            }
            const Profile built = heights_to_profile(Q, UH, r);
            const std::vector<double> P = momenta_from_profile(built);
            const Profile back = solve_profile(PeakonState(0.0, Q, P), r);
            for (int i = 0; i < N; ++i)
                CHECK(back.uhat[i] == doctest::Approx(UH[i]).epsilon(1e-9));
            const std::vector<double> P2 = momenta_from_profile(back);
            for (int i = 0; i < N; ++i)
                CHECK(P2[i] == doctest::Approx(P[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("warm started solve takes fewer iterations than cold") {
    const Profile built = two_peak(1.0, 6.0, 1.5, 1.0, 2.0);
    const std::vector<double> P = momenta_from_profile(built);
    const PeakonState st(0.0, {1.0, 6.0}, P);
    const Profile cold = solve_profile(st, Exponent(2.0));
    const Profile warm = solve_profile(st, Exponent(2.0), &cold);
    CHECK(warm.newton_iters <= cold.newton_iters);
    CHECK(warm.uhat[0] == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("energies: closed forms, Legendre relation, pairing identity") {
    // single unit peakon at r=2: both integrals equal 1
    {
        const double Q[] = {0.0};
        const double UH[] = {1.0};
        const Profile p = heights_to_profile(Q, UH, Exponent(2.0));
        const Diagnostics d = energy(p, qs);
        CHECK(d.H == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(d.L == doctest::Approx(1.0).epsilon(1e-12));
    }
    // H = 2|uhat|^r / r for one peak, any r
    for (double r : {2.0, 3.0, 4.5, 6.0}) {
        const double uhat = 1.3;
        const double Q[] = {1.0};
        const double UH[] = {uhat};
        const Diagnostics d = energy(heights_to_profile(Q, UH, Exponent(r)), qs);
        CHECK(d.H == doctest::Approx(2.0 * std::pow(uhat, r) / r).epsilon(1e-12));
        CHECK(d.H == doctest::Approx((r - 1.0) * d.L).epsilon(1e-15));
    }
    // pairing: sum P_i uhat_i = r L
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uh(0.4, 2.0), gap(1.5, 5.0);
    for (double r : {2.0, 3.0, 4.5, 6.0}) {
        const Profile p = two_peak(0.0, gap(rng), uh(rng), -uh(rng), r);
        const std::vector<double> P = momenta_from_profile(p);
        const Diagnostics d = energy(p, qs);
        const double lhs = P[0] * p.uhat[0] + P[1] * p.uhat[1];
        CHECK(lhs == doctest::Approx(r * d.L).epsilon(1e-8));
    }
}

TEST_CASE("reflection covariance: negating heights negates momenta, keeps H") {
    const Profile p = two_peak(0.0, 4.0, 1.4, 0.8, 3.0);
    const Profile m = two_peak(0.0, 4.0, -1.4, -0.8, 3.0);
    const std::vector<double> Pp = momenta_from_profile(p), Pm = momenta_from_profile(m);
    CHECK(Pp[0] == doctest::Approx(-Pm[0]).epsilon(1e-12));
    CHECK(Pp[1] == doctest::Approx(-Pm[1]).epsilon(1e-12));
    CHECK(energy(p, qs).H == doctest::Approx(energy(m, qs).H).epsilon(1e-12));
}

TEST_CASE("height-variable energy matches trapezoid quadrature of the sampled profile") {
    for (double r : {2.0, 4.5}) {
        const Profile p = two_peak(1.0, 6.0, 1.5, 1.0, r);
        const Diagnostics d = energy(p, qs);

        const int n = 1 << 14;
        const double lo = p.Q.front() - 12.0, hi = p.Q.back() + 12.0;
        std::vector<double> xs(n);
        for (int k = 0; k < n; ++k) xs[k] = lo + (hi - lo) * k / (n - 1);
        const std::vector<double> us = sample(p, xs, qs);
        // |u_x| from the first integral of the containing segment
        auto k_of = [&](double x) {
            for (std::size_t j = 1; j < p.Q.size(); ++j)
                if (x < p.Q[j]) return p.K[j];
            return 0.0;
        };
        auto integrand = [&](double x, double u) {
            const double K = x < p.Q.front() || x > p.Q.back() ? 0.0 : k_of(x);
            const double uxr = std::max(std::pow(std::abs(u), r) - K, 0.0);
            return (std::pow(std::abs(u), r) + uxr / (r - 1.0)) / r;
        };
        double acc = 0.0;
        for (int k = 0; k + 1 < n; ++k)
            acc += 0.5 * (xs[k + 1] - xs[k]) *
                   (integrand(xs[k], us[k]) + integrand(xs[k + 1], us[k + 1]));
        CHECK(acc == doctest::Approx(d.L).epsilon(1e-5));
    }
}

TEST_CASE("sampling is continuous across segment boundaries") {
    const Profile p = two_peak(1.0, 4.0, 1.2, -0.7, 4.5);
    for (double q : p.Q) {
        const double xs[] = {q - 1e-9, q + 1e-9};
        const std::vector<double> us = sample(p, xs, qs);
        const double uhat = q == p.Q.front() ? p.uhat.front() : p.uhat.back();
        CHECK(us[0] == doctest::Approx(uhat).epsilon(1e-8));
        CHECK(us[1] == doctest::Approx(uhat).epsilon(1e-8));
    }
}

TEST_CASE("profile JSON round trip") {
    const Profile p = two_peak(1.0, 6.0, 1.5, 1.0, 2.0);
    const Profile q2 = profile_from_json(profile_to_json(p));
    CHECK(q2.r.value() == p.r.value());
    const double xs[] = {-1.0, 2.5, 3.5, 7.0};
    const std::vector<double> a = sample(p, xs, qs), b = sample(q2, xs, qs);
    for (int k = 0; k < 4; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
    const std::vector<double> Pa = momenta_from_profile(p), Pb = momenta_from_profile(q2);
    CHECK(Pa[0] == doctest::Approx(Pb[0]).epsilon(1e-14));
}

TEST_CASE("degenerate gaps are rejected upstream") {
    const double Q[] = {0.0, 1e-13};
    const double UH[] = {1.0, 1.0};
    CHECK_THROWS_AS(heights_to_profile(Q, UH, Exponent(2.0)), OrderingViolation);
}
