#include <doctest.h>

#include "helpers.hpp"
#include "senskit/errors.hpp"
#include "senskit/powerflow.hpp"

using namespace senskit;
using namespace testutil;

namespace {

PowerInjection nominal(const GridModel& g) {
    auto inj = PowerInjection::zero(g.n_pq());
    for (int k = 1; k < g.n_buses(); ++k) {
        const auto& b = g.buses[static_cast<std::size_t>(k)];
        inj.p(k - 1) = (b.pv_p_w - b.load_p_w) / g.s_base_va;
        inj.q(k - 1) = -b.load_q_var / g.s_base_va;
    }
    return inj;
}

PowerInjection random_injection(std::mt19937_64& rng, int m) {
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    auto inj = PowerInjection::zero(m);
    for (int k = 0; k < m; ++k) {
        inj.p(k) = u(rng);
        inj.q(k) = u(rng);
    }
    return inj;
}

// Upper root of |V|^4 + (2(rP + xQ) - V0^2)|V|^2 + |z|^2 |S|^2 = 0 by bisection,
// where P + jQ is the consumed power.
double two_bus_voltage(double r, double x, double p_load, double q_load) {
    auto f = [&](double u) {
        return u * u + (2.0 * (r * p_load + x * q_load) - 1.0) * u + (r * r + x * x) * (p_load * p_load + q_load * q_load);
    };
    double lo = 0.5, hi = 1.0;  // f(lo) < 0 < f(hi) for light loading
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return std::sqrt(0.5 * (lo + hi));
}

double max_entry_gap(const CoefficientMatrix& a, const CoefficientMatrix& b) {
    return std::max((a.kp - b.kp).cwiseAbs().maxCoeff(), (a.kq - b.kq).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("two-bus zero injection stays at the slack voltage") {
    const auto g = two_bus(0.05, 0.05);
    const auto sol = solve_loadflow(g, PowerInjection::zero(1));
    CHECK(sol.converged);
    CHECK(sol.iterations == 1);
    CHECK(sol.max_mismatch == 0.0);
    CHECK(sol.v(0) == Complex(1.0, 0.0));
    CHECK(sol.v(1) == Complex(1.0, 0.0));
}

TEST_CASE("two-bus loaded voltage matches the quadratic solution") {
    const auto g = two_bus(0.05, 0.05);
    auto inj = PowerInjection::zero(1);
    inj.p(0) = -0.1;
    const auto sol = solve_loadflow(g, inj);
    const double oracle = two_bus_voltage(0.05, 0.05, 0.1, 0.0);
    CHECK(std::abs(std::abs(sol.v(1)) - oracle) < 1e-10);

    inj.q(0) = -0.04;
    const auto sol2 = solve_loadflow(g, inj);
    CHECK(std::abs(std::abs(sol2.v(1)) - two_bus_voltage(0.05, 0.05, 0.1, 0.04)) < 1e-10);
}

TEST_CASE("bundled grid at nominal load satisfies power balance") {
    const auto g = load_grid(bundled_grid_path());
    const auto inj = nominal(g);
    const auto sol = solve_loadflow(g, inj);
    REQUIRE(sol.converged);
    const auto Y = admittance_matrix(g);
    const CVector s = sol.v.cwiseProduct((Y * sol.v).conjugate());
    for (int k = 1; k < g.n_buses(); ++k) {
        CHECK(std::abs(s(k).real() - inj.p(k - 1)) <= 1e-10);
        CHECK(std::abs(s(k).imag() - inj.q(k - 1)) <= 1e-10);
    }
    CHECK(power_mismatch(Y, sol.v, inj) <= 1e-10);
    CHECK(sol.v(0) == g.slack_voltage_pu);
    // Loads pull every bus below the slack voltage.
    for (int k = 1; k < g.n_buses(); ++k) CHECK(std::abs(sol.v(k)) < 1.0);
}

TEST_CASE("infeasible loading raises a numeric error") {
    const auto g = two_bus(0.05, 0.05);
    auto inj = PowerInjection::zero(1);
    inj.p(0) = -20.0;
    CHECK_THROWS_AS(solve_loadflow(g, inj), NumericError);
}

TEST_CASE("two-bus flat-start sensitivities equal the line impedance") {
    const auto g = two_bus(0.05, 0.03);
    const auto inj = PowerInjection::zero(1);
    const auto ana = analytical_sensitivities(g, solve_loadflow(g, inj));
    CHECK(ana.kp(0, 0) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(ana.kq(0, 0) == doctest::Approx(0.03).epsilon(1e-12));
    const auto fd = finite_difference_sensitivities(g, inj);
    CHECK(std::abs(fd.kp(0, 0) - 0.05) < 1e-6);
    CHECK(std::abs(fd.kq(0, 0) - 0.03) < 1e-6);
}

TEST_CASE("radial chain shares the common-path sensitivity") {
    const auto g = chain(3, 0.04, 0.02);
    const auto ana = analytical_sensitivities(g, solve_loadflow(g, PowerInjection::zero(2)));
    CHECK(ana.kp(1, 0) == doctest::Approx(ana.kp(0, 0)).epsilon(1e-12));
    CHECK(ana.kp(0, 0) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(ana.kp(1, 1) == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(ana.kq(1, 1) == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("finite differences are reciprocal at flat start") {
    std::mt19937_64 rng(5);
    const auto g = random_radial(rng, 5);
    const auto fd = finite_difference_sensitivities(g, PowerInjection::zero(4));
    CHECK((fd.kp - fd.kp.transpose()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("analytical and finite-difference sensitivities agree") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 15; ++trial) {
        const int n = 2 + trial % 5;
        const auto g = random_radial(rng, n);
        const auto inj = random_injection(rng, n - 1);
        const auto ana = analytical_sensitivities(g, solve_loadflow(g, inj));
        const auto fd = finite_difference_sensitivities(g, inj);
        for (int i = 0; i < n - 1; ++i) {
            for (int j = 0; j < n - 1; ++j) {
                CHECK(relative_gap(ana.kp(i, j), fd.kp(i, j), 1e-8) <= 1e-4);
                CHECK(relative_gap(ana.kq(i, j), fd.kq(i, j), 1e-8) <= 1e-4);
            }
        }
    }
}

TEST_CASE("finite-difference error shrinks quadratically with the step") {
    const auto g = load_grid(bundled_grid_path());
    auto inj = nominal(g);
    inj.p *= 3.0;
    inj.q *= 3.0;
    const auto ana = analytical_sensitivities(g, solve_loadflow(g, inj));
    const double e1 = max_entry_gap(finite_difference_sensitivities(g, inj, 2e-2), ana);
    const double e2 = max_entry_gap(finite_difference_sensitivities(g, inj, 1e-2), ana);
    REQUIRE(e2 > 0.0);
    const double ratio = e1 / e2;
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
}

TEST_CASE("PV injection raises voltage and sensitivities are positive") {
    const auto g = load_grid(bundled_grid_path());
    const auto ana = analytical_sensitivities(g, solve_loadflow(g, nominal(g)));
    CHECK(ana.kp.minCoeff() > 0.0);
    CHECK(ana.kq.minCoeff() > 0.0);
    const auto row = ana.stacked_row(11);
    CHECK(row.size() == 22);
    CHECK(row(10) == ana.kp(10, 10));
    CHECK(row(11 + 10) == ana.kq(10, 10));
}

TEST_CASE("load flow and sensitivities are deterministic") {
    const auto g = load_grid(bundled_grid_path());
    const auto inj = nominal(g);
    const auto a = solve_loadflow(g, inj);
    const auto b = solve_loadflow(g, inj);
    CHECK(a.v == b.v);
    CHECK(a.iterations == b.iterations);
    const auto ka = analytical_sensitivities(g, a);
    const auto kb = analytical_sensitivities(g, b);
    CHECK(ka.kp == kb.kp);
    CHECK(ka.kq == kb.kq);
}
