#include "rch/oracle.hpp"
#include <cstdio>
#include <cstdlib>

#include <cmath>
#include <limits>

namespace rch {

namespace {

constexpr double kFluxEps = 1e-12;  // regularization of |u_x|^{r-2} for r > 2

// Regularized flux g(s) ~ |s|^{r-2} s and its derivative.
inline double flux(double s, double r) {
    return std::pow(s * s + kFluxEps * kFluxEps, 0.5 * (r - 2.0)) * s;
}
inline double flux_d(double s, double r) {
    const double q = s * s + kFluxEps * kFluxEps;
    return std::pow(q, 0.5 * (r - 4.0)) * ((r - 1.0) * s * s + kFluxEps * kFluxEps);
}
// Jacobian-only variant with a curvature floor; the residual keeps the
// eps-regularized flux, so the converged solution is unchanged.
inline double flux_d_newton(double s, double r) {
    return flux_d(std::max(std::abs(s), 1e-8), r);
}

void thomas_solve(std::vector<double>& sub, std::vector<double>& diag,
                  std::vector<double>& sup, std::vector<double>& rhs) {
    const int n = static_cast<int>(diag.size());
    for (int i = 1; i < n; ++i) {
        const double m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (int i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

namespace {

// Divided difference (Phi(b) - Phi(a))/(b - a) of the antiderivative of
// sp(., q), i.e. the exact cell average of sp(z(x), q) for linear z. The
// partials come from differentiating the divided difference.
struct CellAverage {
    double value, d_a, d_b;
};

CellAverage sp_cell_average(double a, double b, double q) {
    CellAverage c{};
    const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
    // The divided difference cancels when b ~ a (cells at a flux extremum);
    // the midpoint form balances that rounding against its own O((b-a)^2)
    // truncation. Cells straddling zero always keep the exact branch.
    if (std::abs(b - a) <= 1e-5 * scale) {
        const double mid = 0.5 * (a + b);
        c.value = signed_pow(mid, q);
        const double curv = std::abs(mid) > 0.0 ? q * std::pow(std::abs(mid), q - 1.0) : 0.0;
        c.d_a = 0.5 * curv;
        c.d_b = 0.5 * curv;
        return c;
    }
    // the antiderivative of sp(., q) is the even function |y|^{q+1}/(q+1)
    const double qp = q + 1.0;
    const double Phi_a = std::pow(std::abs(a), qp) / qp;
    const double Phi_b = std::pow(std::abs(b), qp) / qp;
    c.value = (Phi_b - Phi_a) / (b - a);
    c.d_a = (c.value - signed_pow(a, q)) / (b - a);
    c.d_b = (signed_pow(b, q) - c.value) / (b - a);
    return c;
}

// Banded Gaussian elimination with partial pivoting, kl = ku = 2 as laid
// out by the first-order-system discretization below.
class Banded {
public:
    Banded(int n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), w_(2 * kl + ku + 1), a_(w_ * n, 0.0) {}

    double& at(int row, int col) { return a_[col * w_ + kl_ + ku_ + row - col]; }

    bool solve(std::vector<double>& rhs) {
        const int kv = kl_ + ku_;
        for (int j = 0; j < n_; ++j) {
            int p = j;
            const int last = std::min(j + kl_, n_ - 1);
            for (int i = j + 1; i <= last; ++i)
                if (std::abs(at(i, j)) > std::abs(at(p, j))) p = i;
            if (std::abs(at(p, j)) < 1e-300) return false;
            if (p != j) {
                const int hi = std::min(j + kv, n_ - 1);
                for (int c = j; c <= hi; ++c) std::swap(at(j, c), at(p, c));
                std::swap(rhs[j], rhs[p]);
            }
            for (int i = j + 1; i <= last; ++i) {
                const double m = at(i, j) / at(j, j);
                if (m == 0.0) continue;
                const int hi = std::min(j + kv, n_ - 1);
                for (int c = j; c <= hi; ++c) at(i, c) -= m * at(j, c);
                rhs[i] -= m * rhs[j];
            }
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = rhs[i];
            const int hi = std::min(i + kv, n_ - 1);
            for (int c = i + 1; c <= hi; ++c) s -= at(i, c) * rhs[c];
            rhs[i] = s / at(i, i);
        }
        return true;
    }

private:
    int n_, kl_, ku_, w_;
    std::vector<double> a_;
};

}  // namespace

std::vector<double> collocation_solve(double u_left, double u_right, double dQ, Exponent rr,
                                      Mesh1D mesh) {
    rr.require_singular("collocation_solve");
    if (!(dQ > 0.0)) throw std::invalid_argument("collocation_solve: dQ must be > 0");
    const double r = rr.value();
    const double q = 1.0 / (r - 1.0);
    const int n = mesh.n_cells;
    const double h = dQ / n;

    // First-order-system box scheme on (u, w) with w = |u_x|^{r-2}u_x:
    //   u_{i+1} - u_i = h * avg_cell sp(w, 1/(r-1))
    //   w_{i+1} - w_i = h * (r-1) * avg_cell sp(u, r-1)
    // with both cell averages exact for piecewise-linear fields. This keeps
    // second order uniformly; the naive conservative scheme degrades to
    // O(h^{1+1/(r-1)}) at turning points, where u_x vanishes.
    std::vector<double> u(n + 1), w(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double x = dQ * i / n;
        u[i] = u_left * std::exp(-x) + u_right * std::exp(-(dQ - x));
        w[i] = signed_pow(-u_left * std::exp(-x) + u_right * std::exp(-(dQ - x)), r - 1.0);
    }
    u[0] = u_left;
    u[n] = u_right;

    // unknown layout: z = [w_0, u_1, w_1, u_2, ..., u_{n-1}, w_n], dim 2n
    const int dim = 2 * n;
    auto u_at = [&](int i) { return i == 0 ? 0 : (i == n ? 0 : 2 * i - 1); };
    auto w_at = [&](int i) { return i == 0 ? 0 : 2 * i; };

    std::vector<double> z(dim);
    z[0] = w[0];
    for (int i = 1; i < n; ++i) {
        z[2 * i - 1] = u[i];
        z[2 * i] = w[i];
    }
    z[2 * n - 1] = w[n];

    auto unpack = [&](const std::vector<double>& zz, int i, double& ui, double& wi) {
        ui = i == 0 ? u_left : (i == n ? u_right : zz[u_at(i)]);
        wi = i == 0 ? zz[0] : (i == n ? zz[2 * n - 1] : zz[w_at(i)]);
    };

    // rows: 2i -> constitutive eq of cell i, 2i+1 -> flux balance of cell i
    auto fill = [&](const std::vector<double>& zz, std::vector<double>& Fz, Banded* J,
                    double q_stage) {
        for (int i = 0; i < n; ++i) {
            double ui, wi, uj, wj;
            unpack(zz, i, ui, wi);
            unpack(zz, i + 1, uj, wj);
            const CellAverage cw = sp_cell_average(wi, wj, q_stage);
            const CellAverage cu = sp_cell_average(ui, uj, r - 1.0);
            Fz[2 * i] = (uj - ui) / h - cw.value;
            Fz[2 * i + 1] = (wj - wi) / h - (r - 1.0) * cu.value;
            if (!J) continue;
            const int col_wi = i == 0 ? 0 : w_at(i);
            const int col_wj = i + 1 == n ? 2 * n - 1 : w_at(i + 1);
            J->at(2 * i, col_wi) += -cw.d_a;
            J->at(2 * i, col_wj) += -cw.d_b;
            J->at(2 * i + 1, col_wi) += -1.0 / h;
            J->at(2 * i + 1, col_wj) += 1.0 / h;
            if (i > 0) {
                J->at(2 * i, u_at(i)) += -1.0 / h;
                J->at(2 * i + 1, u_at(i)) += -(r - 1.0) * cu.d_a;
            }
            if (i + 1 < n) {
                J->at(2 * i, u_at(i + 1)) += 1.0 / h;
                J->at(2 * i + 1, u_at(i + 1)) += -(r - 1.0) * cu.d_b;
            }
        }
    };

    std::vector<double> Fz(dim), Ft(dim);
    const double scale = std::max({1.0, std::pow(std::abs(u_left), r - 1.0),
                                   std::pow(std::abs(u_right), r - 1.0)});
    const double tol = scale * std::max(1e-12, 40.0 * 2.220446049250313e-16 / h);

    auto newton = [&](double q_stage, double stage_tol) {
        fill(z, Fz, nullptr, q_stage);
        double prev = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 200; ++iter) {
            const double nrm = inf_norm(Fz);
            if (nrm <= stage_tol) return;
            // rounding floor: accepted steps stop making real progress
            if (nrm <= 1e4 * stage_tol && nrm > 0.7 * prev) return;
            prev = nrm;
            Banded J(dim, 2, 2);
            fill(z, Fz, &J, q_stage);
            std::vector<double> step = Fz;
            for (double& v : step) v = -v;
            if (!J.solve(step)) throw NewtonDiverged("collocation_solve: singular Jacobian");

            double lambda = 1.0;
            bool ok = false;
            std::vector<double> trial(dim);
            for (int halve = 0; halve < 40; ++halve) {
                for (int i = 0; i < dim; ++i) trial[i] = z[i] + lambda * step[i];
                fill(trial, Ft, nullptr, q_stage);
                if (inf_norm(Ft) < nrm) {
                    z = trial;
                    Fz = Ft;
                    ok = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (std::getenv("RCH_DEBUG_COLL"))
                std::fprintf(stderr, "[coll] q=%.3f iter=%d nrm=%.3e ok=%d\n", q_stage, iter,
                             nrm, int(ok));
            if (!ok) {
                if (nrm <= 1e4 * stage_tol) return;  // rounding floor reached
                throw NewtonDiverged("collocation_solve: line search stalled");
            }
        }
        throw NewtonDiverged("collocation_solve: no convergence");
    };

    // The constitutive nonlinearity sp(w, 1/(r-1)) has a vertical tangent at
    // the flux zero for r > 2, which traps the plain Newton in a curved
    // valley. Continuation in the exponent walks around it; the ladder has
    // to be fairly fine or an intermediate stage lands in the valley again.
    std::vector<double> stages;
    for (double qs = 1.0; qs > q * 1.02; qs *= 0.82) stages.push_back(qs);
    stages.push_back(q);
    for (std::size_t k = 0; k < stages.size(); ++k)
        newton(stages[k], k + 1 == stages.size() ? tol : std::max(1e-6 * scale, tol));

    for (int i = 1; i < n; ++i) u[i] = z[u_at(i)];
    return u;
}

namespace {

// Discrete variational state: N-1 unit intervals of n cells each, nodal
// values shared at the junctions (which are the peaks).
struct VariationalProblem {
    double r;
    int N, n;
    std::vector<double> dQ;  // N-1 interval widths
    std::vector<double> P;

    int nodes() const { return N == 1 ? 1 : (N - 1) * n + 1; }
    int peak_node(int i) const { return i * n; }

    // Objective J[v] = Lhat[v] - sum_i P_i v(peak_i); convex in v.
    double objective(const std::vector<double>& v) const {
        double Lh = lhat(v);
        double pair_ = 0.0;
        for (int i = 0; i < N; ++i) pair_ += P[i] * v[peak_node(i)];
        return Lh - pair_;
    }

    double lhat(const std::vector<double>& v) const {
        const int M = nodes();
        double acc = (std::pow(std::abs(v[0]), r) + std::pow(std::abs(v[M - 1]), r)) /
                     (r * (r - 1.0));
        const double h = 1.0 / n;
        for (int j = 0; j + 1 < N; ++j) {
            const int base = j * n;
            double mass = 0.0, grad = 0.0;
            for (int k = 0; k < n; ++k) {
                const double w0 = std::abs(v[base + k]), w1 = std::abs(v[base + k + 1]);
                mass += 0.5 * h * (std::pow(w0, r) + std::pow(w1, r));
                grad += h * std::pow(std::abs((v[base + k + 1] - v[base + k]) / h), r);
            }
            acc += dQ[j] / r * mass + grad / (r * (r - 1.0) * std::pow(dQ[j], r - 1.0));
        }
        return acc;
    }

    void gradient(const std::vector<double>& v, std::vector<double>& g) const {
        const int M = nodes();
        g.assign(M, 0.0);
        g[0] += signed_pow(v[0], r - 1.0) / (r - 1.0);
        g[M - 1] += signed_pow(v[M - 1], r - 1.0) / (r - 1.0);
        const double h = 1.0 / n;
        for (int j = 0; j + 1 < N; ++j) {
            const int base = j * n;
            const double cg = 1.0 / (r * (r - 1.0) * std::pow(dQ[j], r - 1.0));
            for (int k = 0; k <= n; ++k) {
                const double w = (k == 0 || k == n) ? 0.5 * h : h;
                g[base + k] += dQ[j] * w * signed_pow(v[base + k], r - 1.0);
            }
            for (int k = 0; k < n; ++k) {
                const double D = (v[base + k + 1] - v[base + k]) / h;
                const double gD = cg * r * signed_pow(D, r - 1.0);
                g[base + k] -= gD;
                g[base + k + 1] += gD;
            }
        }
        for (int i = 0; i < N; ++i) g[peak_node(i)] -= P[i];
    }

    // Tridiagonal Hessian (the flux coupling only links neighbours).
    void hessian(const std::vector<double>& v, std::vector<double>& sub,
                 std::vector<double>& diag, std::vector<double>& sup) const {
        const int M = nodes();
        sub.assign(M, 0.0);
        diag.assign(M, 0.0);
        sup.assign(M, 0.0);
        auto mass_dd = [&](double x) {
            return r == 2.0 ? 1.0 : std::pow(std::abs(x), r - 2.0);
        };
        diag[0] += mass_dd(v[0]);
        diag[M - 1] += mass_dd(v[M - 1]);
        const double h = 1.0 / n;
        // The p-Laplacian curvature |D|^{r-2} vanishes wherever the iterate
        // is flat; a direction-only floor keeps Newton steps sane (the
        // gradient stays exact, so the solution is unaffected).
        const double hess_floor = 1e-8;
        for (int j = 0; j + 1 < N; ++j) {
            const int base = j * n;
            const double cg = 1.0 / (r * (r - 1.0) * std::pow(dQ[j], r - 1.0));
            for (int k = 0; k <= n; ++k) {
                const double w = (k == 0 || k == n) ? 0.5 * h : h;
                diag[base + k] += dQ[j] * w * (r - 1.0) * mass_dd(v[base + k]);
            }
            for (int k = 0; k < n; ++k) {
                const double D = (v[base + k + 1] - v[base + k]) / h;
                const double q = std::max(D * D, hess_floor * hess_floor);
                const double dd = cg * r * (r - 1.0) * std::pow(q, 0.5 * (r - 2.0)) / h;
                diag[base + k] += dd;
                diag[base + k + 1] += dd;
                sup[base + k] -= dd;
                sub[base + k + 1] -= dd;
            }
        }
    }

    std::vector<double> solve(std::vector<double> v) const {
        const int M = nodes();
        std::vector<double> g(M), sub, diag, sup;
        gradient(v, g);
        const double tol = 1e-11 * std::max(1.0, inf_norm(P));
        const bool dbg = std::getenv("RCH_DEBUG_VH") != nullptr;
        for (int iter = 0; iter < 200; ++iter) {
            const double nrm = inf_norm(g);
            if (nrm <= tol) return v;
            hessian(v, sub, diag, sup);
            std::vector<double> d = diag, s_ = sup, b = g, l = sub;
            for (double& x : b) x = -x;
            thomas_solve(l, d, s_, b);
            double lambda = 1.0;
            bool ok = false;
            std::vector<double> trial(M), gt(M);
            for (int halve = 0; halve < 40; ++halve) {
                for (int i = 0; i < M; ++i) trial[i] = v[i] + lambda * b[i];
                gradient(trial, gt);
                if (inf_norm(gt) < nrm) {
                    v = trial;
                    g = gt;
                    ok = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (dbg)
                std::fprintf(stderr, "[vh] iter=%d nrm=%.3e lambda=%.3e ok=%d\n", iter, nrm,
                             lambda, int(ok));
            if (!ok) throw NewtonDiverged("variational_hamiltonian: line search stalled");
        }
        throw NewtonDiverged("variational_hamiltonian: no convergence");
    }

    double hamiltonian(const std::vector<double>& v) const {
        double pair_ = 0.0;
        for (int i = 0; i < N; ++i) pair_ += P[i] * v[peak_node(i)];
        return pair_ - lhat(v);
    }
};

VariationalProblem make_problem(const PeakonState& st, double r, int n) {
    VariationalProblem p{r, st.size(), n, {}, st.P};
    for (int j = 0; j + 1 < st.size(); ++j) p.dQ.push_back(st.Q[j + 1] - st.Q[j]);
    return p;
}

std::vector<double> initial_guess(const VariationalProblem& p, Exponent r,
                                  const PeakonState& st) {
    std::vector<double> v(p.nodes());
    std::vector<double> uh(st.size());
    for (int i = 0; i < st.size(); ++i) uh[i] = height_from_momentum(st.P[i], r);
    if (p.N == 1) {
        v[0] = uh[0];
        return v;
    }
    // decoupled-peakon envelope: superpose the two exponential skirts, the
    // exact shape in the well-separated limit and a sane dip otherwise
    for (int j = 0; j + 1 < p.N; ++j)
        for (int k = 0; k <= p.n; ++k) {
            const double s = double(k) / p.n * p.dQ[j];
            const double left = uh[j] * std::exp(-s);
            const double right = uh[j + 1] * std::exp(-(p.dQ[j] - s));
            v[j * p.n + k] = left + right;
        }
    return v;
}

}  // namespace

HamiltonianGradients variational_hamiltonian(const PeakonState& state, Exponent r,
                                             Mesh1D mesh) {
    r.require_singular("variational_hamiltonian");
    const double step = 1e-5;
    VariationalProblem base = make_problem(state, r.value(), mesh.n_cells);
    std::vector<double> v0 = base.solve(initial_guess(base, r, state));

    HamiltonianGradients out;
    out.H = base.hamiltonian(v0);
    out.dH_dQ.assign(state.size(), 0.0);
    out.dH_dP.assign(state.size(), 0.0);

    auto H_at = [&](const PeakonState& st) {
        VariationalProblem p = make_problem(st, r.value(), mesh.n_cells);
        return p.hamiltonian(p.solve(v0));  // warm start from the base solution
    };
    for (int i = 0; i < state.size(); ++i) {
        PeakonState sp_ = state, sm = state;
        sp_.Q[i] += step;
        sm.Q[i] -= step;
        out.dH_dQ[i] = (H_at(sp_) - H_at(sm)) / (2.0 * step);
        PeakonState pp = state, pm = state;
        pp.P[i] += step;
        pm.P[i] -= step;
        out.dH_dP[i] = (H_at(pp) - H_at(pm)) / (2.0 * step);
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> hamiltonian_fd_vector_field(
    const PeakonState& state, Exponent r, const ProfileSolveSettings& s, double fd_step) {
    r.require_singular("hamiltonian_fd_vector_field");
    const Profile base = solve_profile(state, r, nullptr, s);
    auto H_at = [&](const PeakonState& st) {
        return energy(solve_profile(st, r, &base, s), s.quad).H;
    };
    const int N = state.size();
    std::vector<double> Qdot(N), Pdot(N);
    for (int i = 0; i < N; ++i) {
        PeakonState pp = state, pm = state;
        pp.P[i] += fd_step;
        pm.P[i] -= fd_step;
        Qdot[i] = (H_at(pp) - H_at(pm)) / (2.0 * fd_step);
        PeakonState qp = state, qm = state;
        qp.Q[i] += fd_step;
        qm.Q[i] -= fd_step;
        Pdot[i] = -(H_at(qp) - H_at(qm)) / (2.0 * fd_step);
    }
    return {Qdot, Pdot};
}

}  // namespace rch
