#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "senskit/errors.hpp"
#include "senskit/profiles.hpp"

using namespace senskit;
using namespace testutil;

namespace {

ProfileConfig quiet() {
    ProfileConfig c;
    c.load_noise = 0.0;
    c.pf_noise = 0.0;
    c.cloud_noise = 0.0;
    c.plant_jitter = 0.0;
    return c;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd x = a.array() - a.mean();
    const Eigen::VectorXd y = b.array() - b.mean();
    return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

}  // namespace

TEST_CASE("noiseless generator is nominal times the shape") {
    const auto g = load_grid(bundled_grid_path());
    auto cfg = quiet();
    cfg.duration_s = 7200;
    cfg.start_hour = 11.0;
    const auto ps = generate_profiles(g, cfg, 4);
    for (int k : {0, 1, 1800, 7199}) {
        const double hour = 11.0 + k / 3600.0;
        for (int c = 0; c < g.n_pq(); ++c) {
            const auto& bus = g.buses[static_cast<std::size_t>(c + 1)];
            CHECK(ps.p(k, c) == doctest::Approx(bus.load_p_w * load_shape(cfg, hour)).epsilon(1e-14));
            CHECK(ps.q(k, c) == doctest::Approx(bus.load_q_var * load_shape(cfg, hour)).epsilon(1e-14));
            CHECK(ps.pv(k, c) == doctest::Approx(bus.pv_p_w * solar_shape(cfg, hour)).epsilon(1e-14));
        }
    }
}

TEST_CASE("shapes behave at the edges of the day") {
    const ProfileConfig cfg;
    CHECK(solar_shape(cfg, 3.0) == 0.0);
    CHECK(solar_shape(cfg, 22.0) == 0.0);
    CHECK(solar_shape(cfg, 13.0) == doctest::Approx(1.0));
    CHECK(load_shape(cfg, 19.5) > load_shape(cfg, 3.0));
}

TEST_CASE("PV columns at non-PV buses are zero") {
    const auto g = load_grid(bundled_grid_path());
    const auto ps = generate_profiles(g, ProfileConfig{}, 2);
    for (int c = 0; c < g.n_pq(); ++c) {
        if (g.buses[static_cast<std::size_t>(c + 1)].pv_p_w == 0.0) {
            CHECK(ps.pv.col(c).cwiseAbs().maxCoeff() == 0.0);
        } else {
            CHECK(ps.pv.col(c).maxCoeff() > 0.0);
        }
    }
    CHECK(ps.p.minCoeff() >= 0.0);
}

TEST_CASE("PV plants share the cloud process") {
    const auto g = load_grid(bundled_grid_path());
    const auto ps = generate_profiles(g, ProfileConfig{}, 3);
    REQUIRE(ps.steps() == 86400);
    const int n = ps.steps() - 1;
    const Eigen::VectorXd d9 = ps.pv.col(8).tail(n) - ps.pv.col(8).head(n);
    const Eigen::VectorXd d10 = ps.pv.col(9).tail(n) - ps.pv.col(9).head(n);
    CHECK(pearson(d9, d10) >= 0.9);
}

TEST_CASE("seeds change noise but not the envelope") {
    const auto g = load_grid(bundled_grid_path());
    ProfileConfig cfg;
    cfg.duration_s = 3600;
    const auto a = generate_profiles(g, cfg, 1);
    const auto b = generate_profiles(g, cfg, 1);
    const auto c = generate_profiles(g, cfg, 2);
    CHECK(a.p == b.p);
    CHECK(a.pv == b.pv);
    CHECK(a.p != c.p);
    // Means over an hour stay close to the deterministic envelope.
    const auto env = generate_profiles(g, [&] {
        auto q = quiet();
        q.duration_s = 3600;
        return q;
    }(), 1);
    CHECK(std::abs(a.p.mean() - env.p.mean()) / env.p.mean() < 0.25);
    CHECK(std::abs(c.p.mean() - env.p.mean()) / env.p.mean() < 0.25);
}

TEST_CASE("net injection is generation minus load") {
    const auto g = load_grid(bundled_grid_path());
    ProfileConfig cfg;
    cfg.duration_s = 3600;
    cfg.start_hour = 12.0;
    const auto ps = generate_profiles(g, cfg, 5);
    const auto inj = net_injection(g, ps, 100);
    for (int c = 0; c < g.n_pq(); ++c) {
        CHECK(inj.p(c) == doctest::Approx((ps.pv(100, c) - ps.p(100, c)) / g.s_base_va));
        CHECK(inj.q(c) == doctest::Approx(-ps.q(100, c) / g.s_base_va));
    }
    // A pure load bus injects negative power; the PV buses at noon inject positive.
    CHECK(inj.p(0) < 0.0);
    CHECK(inj.p(8) > 0.0);
}

TEST_CASE("profile CSV round trip and error reporting") {
    const auto g = load_grid(bundled_grid_path());
    ProfileConfig cfg;
    cfg.duration_s = 3600;
    const auto ps = generate_profiles(g, cfg, 6).slice(0, 200);
    const auto dir = scratch_dir("profiles");
    write_profiles_csv(ps, dir / "p.csv");
    const auto back = read_profiles_csv(dir / "p.csv", g);
    CHECK(back.p == ps.p);
    CHECK(back.q == ps.q);
    CHECK(back.pv == ps.pv);

    // Drop the row for t = 57.
    {
        std::ifstream in(dir / "p.csv");
        std::ofstream out(dir / "gap.csv");
        std::string line;
        int row = 0;
        while (std::getline(in, line)) {
            if (row++ != 58) out << line << '\n';
        }
    }
    try {
        read_profiles_csv(dir / "gap.csv");
        FAIL("expected a stride error");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row") != std::string::npos);
        CHECK(msg.find("58") != std::string::npos);
    }
    CHECK_THROWS_AS(read_profiles_csv(dir / "missing.csv"), IoError);
    CHECK_THROWS_AS(read_profiles_csv(dir / "p.csv", chain(3, 0.01, 0.01)), ConfigError);
}

TEST_CASE("profile config JSON") {
    const auto cfg = ProfileConfig::from_json(R"({"duration_s": 7200, "start_hour": 10.5, "cloud_noise": 0.1})");
    CHECK(cfg.duration_s == 7200);
    CHECK(cfg.start_hour == 10.5);
    CHECK(cfg.cloud_noise == 0.1);
    const auto again = ProfileConfig::from_json(cfg.to_json());
    CHECK(again.to_json() == cfg.to_json());
    CHECK_THROWS_AS(ProfileConfig::from_json(R"({"durations": 7200})"), ConfigError);
    CHECK_THROWS_AS(generate_profiles(load_grid(bundled_grid_path()),
                                      ProfileConfig::from_json(R"({"duration_s": 60})"), 0),
                    ConfigError);
}
