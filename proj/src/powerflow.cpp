#include "senskit/powerflow.hpp"

#include <cmath>
#include <sstream>

#include "senskit/errors.hpp"

namespace senskit {

namespace {

// Real Jacobian of S_pq(v) with respect to [e_1..e_m, f_1..f_m], rows
// [Re S_1..m, Im S_1..m]. Slack voltage is held fixed.
Eigen::MatrixXd power_jacobian(const CMatrix& ybus, const CVector& v) {
    const Eigen::Index n = v.size();
    const Eigen::Index m = n - 1;
    const CVector current = ybus * v;
    Eigen::MatrixXd jac(2 * m, 2 * m);
    const Complex j1{0.0, 1.0};
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index bi = i + 1;
        for (Eigen::Index k = 0; k < m; ++k) {
            const Eigen::Index bk = k + 1;
            const Complex cross = v(bi) * std::conj(ybus(bi, bk));
            Complex a = cross;
            Complex b = -j1 * cross;
            if (i == k) {
                a += std::conj(current(bi));
                b += j1 * std::conj(current(bi));
            }
            jac(i, k) = a.real();
            jac(i, m + k) = b.real();
            jac(m + i, k) = a.imag();
            jac(m + i, m + k) = b.imag();
        }
    }
    return jac;
}

Eigen::VectorXd mismatch_vector(const CMatrix& ybus, const CVector& v, const PowerInjection& inj) {
    const Eigen::Index m = v.size() - 1;
    const CVector current = ybus * v;
    Eigen::VectorXd f(2 * m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Complex s = v(i + 1) * std::conj(current(i + 1));
        f(i) = s.real() - inj.p(i);
        f(m + i) = s.imag() - inj.q(i);
    }
    return f;
}

void check_injection(const GridModel& grid, const PowerInjection& inj) {
    if (inj.p.size() != grid.n_pq() || inj.q.size() != grid.n_pq()) {
        throw ConfigError("injection length must equal number of non-slack buses (" + std::to_string(grid.n_pq()) +
                          ")");
    }
    if (!inj.p.allFinite() || !inj.q.allFinite()) throw ConfigError("injection contains non-finite entries");
}

}  // namespace

double power_mismatch(const CMatrix& ybus, const CVector& v, const PowerInjection& inj) {
    const Eigen::Index m = v.size() - 1;
    const CVector current = ybus * v;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Complex s = v(i + 1) * std::conj(current(i + 1));
        worst = std::max(worst, std::abs(s - Complex{inj.p(i), inj.q(i)}));
    }
    return worst;
}

LoadFlowSolution solve_loadflow(const GridModel& grid, const PowerInjection& inj, const LoadFlowOptions& opts) {
    return solve_loadflow(grid, admittance_matrix(grid), inj, opts);
}

LoadFlowSolution solve_loadflow(const GridModel& grid, const CMatrix& ybus, const PowerInjection& inj,
                                const LoadFlowOptions& opts) {
    check_injection(grid, inj);
    const int n = grid.n_buses();
    const int m = n - 1;

    LoadFlowSolution sol;
    sol.v = CVector::Constant(n, grid.slack_voltage_pu);

    for (int it = 1; it <= opts.max_iterations; ++it) {
        sol.iterations = it;
        sol.max_mismatch = power_mismatch(ybus, sol.v, inj);
        if (!std::isfinite(sol.max_mismatch)) break;
        if (sol.max_mismatch <= opts.tolerance) {
            sol.converged = true;
            break;
        }
        const Eigen::VectorXd f = mismatch_vector(ybus, sol.v, inj);
        const Eigen::VectorXd dx = power_jacobian(ybus, sol.v).partialPivLu().solve(-f);
        for (int i = 0; i < m; ++i) sol.v(i + 1) += Complex{dx(i), dx(m + i)};
    }
    if (!sol.converged) {
        std::ostringstream msg;
        msg << "load flow did not converge after " << sol.iterations << " iterations (last mismatch "
            << sol.max_mismatch << " pu)";
        throw NumericError(msg.str());
    }
    sol.i_inj = ybus * sol.v;
    return sol;
}

Eigen::VectorXd CoefficientMatrix::stacked_row(int bus) const {
    const Eigen::Index m = kp.cols();
    Eigen::VectorXd z(2 * m);
    z.head(m) = kp.row(bus - 1).transpose();
    z.tail(m) = kq.row(bus - 1).transpose();
    return z;
}

CoefficientMatrix analytical_sensitivities(const GridModel& grid, const LoadFlowSolution& sol) {
    return analytical_sensitivities(admittance_matrix(grid), sol);
}

CoefficientMatrix analytical_sensitivities(const CMatrix& ybus, const LoadFlowSolution& sol) {
    if (!sol.converged) throw NumericError("sensitivities require a converged load flow");
    const Eigen::Index m = sol.v.size() - 1;
    const Eigen::MatrixXd jac = power_jacobian(ybus, sol.v);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (!(lu.rcond() > 1e-14)) throw NumericError("singular load-flow Jacobian at operating point");

    // Columns 0..m-1: unit dP_l; columns m..2m-1: unit dQ_l (imaginary part of dS).
    const Eigen::MatrixXd dx = lu.solve(Eigen::MatrixXd::Identity(2 * m, 2 * m));

    CoefficientMatrix out;
    out.kp.resize(m, m);
    out.kq.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Complex vi = sol.v(i + 1);
        const double mag = std::abs(vi);
        for (Eigen::Index l = 0; l < m; ++l) {
            out.kp(i, l) = (vi.real() * dx(i, l) + vi.imag() * dx(m + i, l)) / mag;
            out.kq(i, l) = (vi.real() * dx(i, m + l) + vi.imag() * dx(m + i, m + l)) / mag;
        }
    }
    out.operating_point = sol;
    return out;
}

CoefficientMatrix finite_difference_sensitivities(const GridModel& grid, const PowerInjection& inj, double eps,
                                                  const LoadFlowOptions& opts) {
    const CMatrix ybus = admittance_matrix(grid);
    const int m = grid.n_pq();
    auto magnitudes = [&](const PowerInjection& x) {
        return solve_loadflow(grid, ybus, x, opts).v.tail(m).cwiseAbs().eval();
    };

    CoefficientMatrix out;
    out.kp.resize(m, m);
    out.kq.resize(m, m);
    for (int l = 0; l < m; ++l) {
        PowerInjection up = inj;
        PowerInjection dn = inj;
        up.p(l) += eps;
        dn.p(l) -= eps;
        out.kp.col(l) = (magnitudes(up) - magnitudes(dn)) / (2.0 * eps);
        up = inj;
        dn = inj;
        up.q(l) += eps;
        dn.q(l) -= eps;
        out.kq.col(l) = (magnitudes(up) - magnitudes(dn)) / (2.0 * eps);
    }
    out.operating_point = solve_loadflow(grid, ybus, inj, opts);
    return out;
}

}  // namespace senskit
