#include "rch/types.hpp"

#include <limits>

namespace rch {

double signed_pow(double s, double beta) {
    if (beta < 0.0)
        throw std::domain_error("signed_pow: beta must be >= 0");
    if (s == 0.0) {
        if (beta == 0.0)
            throw std::domain_error("signed_pow: 0^0 is undefined");
        return 0.0;
    }
    const double mag = std::pow(std::abs(s), beta);
    return s > 0.0 ? mag : -mag;
}

double momentum_from_height(double uhat, Exponent r) {
    r.require_singular("momentum_from_height");
    return 2.0 / (r.value() - 1.0) * signed_pow(uhat, r.value() - 1.0);
}

double height_from_momentum(double p, Exponent r) {
    r.require_singular("height_from_momentum");
    if (p == 0.0) return 0.0;
    return signed_pow(0.5 * (r.value() - 1.0) * p, 1.0 / (r.value() - 1.0));
}

PeakonState::PeakonState(double t_, std::vector<double> Q_, std::vector<double> P_)
    : t(t_), Q(std::move(Q_)), P(std::move(P_)) {
    if (Q.empty())
        throw std::invalid_argument("PeakonState: need at least one peak");
    if (Q.size() != P.size())
        throw std::invalid_argument("PeakonState: Q and P length mismatch");
    for (std::size_t i = 0; i < Q.size(); ++i) {
        if (!std::isfinite(Q[i]) || !std::isfinite(P[i]))
            throw std::invalid_argument("PeakonState: non-finite entry");
        if (i > 0 && !(Q[i - 1] < Q[i]))
            throw OrderingViolation("PeakonState: Q must be strictly increasing");
    }
}

double PeakonState::min_gap() const {
    if (Q.size() < 2) return std::numeric_limits<double>::infinity();
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < Q.size(); ++i) g = std::min(g, Q[i] - Q[i - 1]);
    return g;
}

const char* branch_name(BranchKind k) {
    switch (k) {
        case BranchKind::ExpTailLeft: return "exp_tail_left";
        case BranchKind::ExpTailRight: return "exp_tail_right";
        case BranchKind::ExpInterior: return "exp_interior";
        case BranchKind::SinhLike: return "sinh_like";
        case BranchKind::CoshLike: return "cosh_like";
    }
    return "unknown";
}

}  // namespace rch
