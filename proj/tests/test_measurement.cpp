#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "senskit/errors.hpp"
#include "senskit/measurement.hpp"
#include "senskit/powerflow.hpp"

using namespace senskit;
using namespace testutil;

namespace {

struct Moments {
    double mean = 0.0;
    double std = 0.0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(x.size() - 1));
    return m;
}

struct Draws {
    std::vector<double> v_mag, v_ang, i_mag, i_ang;
};

Draws draw(const ITClass& cls, Complex v, Complex i, int n, std::uint64_t seed = 3) {
    const CounterRng rng(seed);
    const auto slots = NoiseSlots::for_bus(1, 1);
    Draws d;
    for (int k = 0; k < n; ++k) {
        const auto out = inject_noise(v, i, cls, rng, static_cast<std::uint64_t>(k), slots);
        d.v_mag.push_back(std::abs(out.v) - std::abs(v));
        d.v_ang.push_back(std::arg(out.v) - std::arg(v));
        d.i_mag.push_back(std::abs(out.i) - std::abs(i));
        d.i_ang.push_back(std::arg(out.i) - std::arg(i));
    }
    return d;
}

}  // namespace

TEST_CASE("IT classes carry the tabulated limits") {
    const auto c05 = ITClass::by_name("0.5");
    CHECK(c05.sigma_m_v == 0.005);
    CHECK(c05.sigma_p_v == 6e-3);
    CHECK(c05.sigma_m_i == 0.005);
    CHECK(c05.sigma_p_i == 9e-3);
    CHECK(ITClass::by_name("0.2") == ITClass{"0.2", 0.002, 3e-3, 0.002, 3e-3});
    CHECK(ITClass::by_name("1.0") == ITClass{"1.0", 0.01, 12e-3, 0.01, 18e-3});
    CHECK(ITClass::by_name("1") == ITClass::class_10());
    CHECK(ITClass::by_name("ideal") == ITClass::ideal());
    CHECK_THROWS_AS(ITClass::by_name("0.3"), ConfigError);
}

TEST_CASE("noise slots follow the per-bus layout") {
    const auto s = NoiseSlots::for_bus(3, 11);
    CHECK(s.v_mag == 4);
    CHECK(s.v_ang == 5);
    CHECK(s.i_mag == 22 + 4);
    CHECK(s.i_ang == 22 + 5);
}

TEST_CASE("ideal class leaves phasors untouched") {
    const CounterRng rng(1);
    const Complex v = std::polar(0.98, -0.02);
    const Complex i = std::polar(0.3, -0.4);
    for (std::uint64_t k = 0; k < 10; ++k) {
        const auto out = inject_noise(v, i, ITClass::ideal(), rng, k, NoiseSlots::for_bus(1, 1));
        CHECK(out.v == v);
        CHECK(out.i == i);
        CHECK(out.clamped == 0);
    }
}

TEST_CASE("Monte-Carlo noise statistics match sigma/3") {
    const int n = 100000;
    const Complex v(1.0, 0.0);
    const Complex i = std::polar(0.5, -0.3);
    for (const auto& cls : {ITClass::class_02(), ITClass::class_05(), ITClass::class_10()}) {
        CAPTURE(cls.name);
        const auto d = draw(cls, v, i, n);
        CHECK(moments(d.v_mag).std == doctest::Approx(cls.sigma_m_v / 3.0).epsilon(0.05));
        CHECK(moments(d.v_ang).std == doctest::Approx(cls.sigma_p_v / 3.0).epsilon(0.05));
        CHECK(moments(d.i_mag).std == doctest::Approx(cls.sigma_m_i * 0.5 / 3.0).epsilon(0.05));
        CHECK(moments(d.i_ang).std == doctest::Approx(cls.sigma_p_i / 3.0).epsilon(0.05));
    }
}

TEST_CASE("noise is unbiased") {
    const int n = 100000;
    const auto d = draw(ITClass::class_10(), Complex(1.0, 0.0), Complex(0.5, 0.0), n, 17);
    for (const auto* x : {&d.v_mag, &d.v_ang, &d.i_mag, &d.i_ang}) {
        const auto m = moments(*x);
        CHECK(std::abs(m.mean) < 3.0 * m.std / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("draws at different slots and steps are independent values") {
    const CounterRng rng(9);
    const auto a = inject_noise(Complex(1, 0), Complex(1, 0), ITClass::class_05(), rng, 0, NoiseSlots::for_bus(1, 2));
    const auto b = inject_noise(Complex(1, 0), Complex(1, 0), ITClass::class_05(), rng, 0, NoiseSlots::for_bus(2, 2));
    const auto c = inject_noise(Complex(1, 0), Complex(1, 0), ITClass::class_05(), rng, 1, NoiseSlots::for_bus(1, 2));
    CHECK(a.v != b.v);
    CHECK(a.v != c.v);
}

TEST_CASE("ideal simulation reproduces the profile injections") {
    const auto g = load_grid(bundled_grid_path());
    const auto profiles = wiggly_profiles(g, 50);
    const auto s = simulate_measurements(g, profiles, ITClass::ideal(), 1);
    REQUIRE(s.steps() == 50);
    for (int k = 0; k < 50; ++k) {
        const auto inj = net_injection(g, profiles, k);
        const auto sol = solve_loadflow(g, inj);
        for (int c = 0; c < g.n_pq(); ++c) {
            CHECK(std::abs(s.p(k, c) - inj.p(c)) <= 1e-9);
            CHECK(std::abs(s.q(k, c) - inj.q(c)) <= 1e-9);
            CHECK(s.v_mag(k, c) == doctest::Approx(std::abs(sol.v(c + 1))).epsilon(1e-12));
        }
    }
}

TEST_CASE("simulation is deterministic and schedule independent") {
    const auto g = load_grid(bundled_grid_path());
    const auto profiles = wiggly_profiles(g, 40);
    const auto a = simulate_measurements(g, profiles, ITClass::class_05(), 7, 1);
    const auto b = simulate_measurements(g, profiles, ITClass::class_05(), 7, 3);
    const auto c = simulate_measurements(g, profiles, ITClass::class_05(), 8, 1);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.grid_hash == grid_hash(g));
}

TEST_CASE("power error grows with the IT class") {
    const auto g = load_grid(bundled_grid_path());
    const auto profiles = wiggly_profiles(g, 300);
    const auto truth = simulate_measurements(g, profiles, ITClass::ideal(), 5);
    double prev = 0.0;
    for (const char* name : {"0.2", "0.5", "1.0"}) {
        const auto s = simulate_measurements(g, profiles, ITClass::by_name(name), 5);
        const Eigen::MatrixXd err = s.p - truth.p;
        const double sd = std::sqrt(err.array().square().mean());
        CHECK(sd > prev);
        prev = sd;
    }
}

TEST_CASE("a full day at 1 s gives 86400 rows") {
    const auto g = chain(3, 0.02, 0.01);
    auto pg = g;
    pg.buses[1].load_p_w = 2000.0;
    pg.buses[2].load_p_w = 1000.0;
    const auto profiles = generate_profiles(pg, ProfileConfig{}, 0);
    const auto s = simulate_measurements(pg, profiles, ITClass::class_02(), 1);
    CHECK(s.steps() == 86400);
    CHECK(s.t_end() == 86400);
}

TEST_CASE("measurement CSV and sidecar round trip") {
    const auto g = load_grid(bundled_grid_path());
    const auto s = simulate_measurements(g, wiggly_profiles(g, 30), ITClass::class_10(), 12);
    const auto dir = scratch_dir("meas");
    write_measurements_csv(s, dir / "m.csv");
    CHECK(std::filesystem::exists(dir / "m.meta.json"));
    const auto back = read_measurements_csv(dir / "m.csv");
    CHECK(back == s);
}

TEST_CASE("mismatched profiles are rejected") {
    const auto g = load_grid(bundled_grid_path());
    const auto other = chain(3, 0.02, 0.01);
    CHECK_THROWS_AS(simulate_measurements(g, wiggly_profiles(other, 10), ITClass::ideal(), 0), ConfigError);
}
