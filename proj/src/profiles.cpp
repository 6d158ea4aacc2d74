#include "senskit/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "senskit/csv.hpp"
#include "senskit/errors.hpp"
#include "senskit/rng.hpp"

namespace senskit {

using json = nlohmann::ordered_json;

namespace {

// Substream identifiers; each bus owns its own keyed streams.
constexpr std::uint64_t kLoadStream = 1000;
constexpr std::uint64_t kPfStream = 2000;
constexpr std::uint64_t kCloudStream = 3000;
constexpr std::uint64_t kJitterStream = 4000;

// Exact discretization of a unit-time-step OU process with stationary std sigma.
class OuProcess {
public:
    OuProcess(std::uint64_t seed, std::uint64_t stream, double sigma, double reversion_s)
        : rng_(seed, stream), sigma_(sigma), decay_(std::exp(-1.0 / reversion_s)) {
        state_ = sigma_ * rng_.normal();
    }

    double value() const { return state_; }
    void advance() { state_ = decay_ * state_ + sigma_ * std::sqrt(1.0 - decay_ * decay_) * rng_.normal(); }

private:
    RngStream rng_;
    double sigma_;
    double decay_;
    double state_ = 0.0;
};

double gauss_bump(double hour, double centre, double width) {
    const double d = (hour - centre) / width;
    return std::exp(-0.5 * d * d);
}

using FieldMap = std::map<std::string, std::function<double&(ProfileConfig&)>>;

const FieldMap& config_fields() {
    static const FieldMap fields = {
        {"start_hour", [](ProfileConfig& c) -> double& { return c.start_hour; }},
        {"base_level", [](ProfileConfig& c) -> double& { return c.base_level; }},
        {"morning_hour", [](ProfileConfig& c) -> double& { return c.morning_hour; }},
        {"morning_width_h", [](ProfileConfig& c) -> double& { return c.morning_width_h; }},
        {"morning_amplitude", [](ProfileConfig& c) -> double& { return c.morning_amplitude; }},
        {"evening_hour", [](ProfileConfig& c) -> double& { return c.evening_hour; }},
        {"evening_width_h", [](ProfileConfig& c) -> double& { return c.evening_width_h; }},
        {"evening_amplitude", [](ProfileConfig& c) -> double& { return c.evening_amplitude; }},
        {"load_noise", [](ProfileConfig& c) -> double& { return c.load_noise; }},
        {"load_reversion_s", [](ProfileConfig& c) -> double& { return c.load_reversion_s; }},
        {"pf_band", [](ProfileConfig& c) -> double& { return c.pf_band; }},
        {"pf_noise", [](ProfileConfig& c) -> double& { return c.pf_noise; }},
        {"sunrise_hour", [](ProfileConfig& c) -> double& { return c.sunrise_hour; }},
        {"sunset_hour", [](ProfileConfig& c) -> double& { return c.sunset_hour; }},
        {"cloud_noise", [](ProfileConfig& c) -> double& { return c.cloud_noise; }},
        {"cloud_reversion_s", [](ProfileConfig& c) -> double& { return c.cloud_reversion_s; }},
        {"plant_jitter", [](ProfileConfig& c) -> double& { return c.plant_jitter; }},
    };
    return fields;
}

void validate_config(const ProfileConfig& c) {
    if (c.duration_s < 3600) throw ConfigError("profile config: duration_s must be at least 3600");
    for (double v : {c.load_noise, c.pf_band, c.pf_noise, c.cloud_noise, c.plant_jitter, c.base_level}) {
        if (!(v >= 0.0)) throw ConfigError("profile config: noise scales and levels must be >= 0");
    }
    if (!(c.load_reversion_s > 0.0) || !(c.cloud_reversion_s > 0.0)) {
        throw ConfigError("profile config: reversion times must be positive");
    }
    if (!(c.morning_width_h > 0.0) || !(c.evening_width_h > 0.0)) {
        throw ConfigError("profile config: peak widths must be positive");
    }
    if (!(c.sunrise_hour < c.sunset_hour)) throw ConfigError("profile config: sunrise must precede sunset");
}

}  // namespace

ProfileConfig ProfileConfig::from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("profile config: parse error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("profile config: top level must be an object");
    ProfileConfig cfg;
    const auto& fields = config_fields();
    for (const auto& [key, value] : root.items()) {
        if (key == "duration_s") {
            if (!value.is_number_integer()) throw ConfigError("profile config: duration_s must be an integer");
            cfg.duration_s = value.get<int>();
            continue;
        }
        const auto it = fields.find(key);
        if (it == fields.end()) throw ConfigError("profile config: unknown field '" + key + "'");
        if (!value.is_number()) throw ConfigError("profile config: '" + key + "' must be a number");
        it->second(cfg) = value.get<double>();
    }
    validate_config(cfg);
    return cfg;
}

std::string ProfileConfig::to_json() const {
    json root;
    root["duration_s"] = duration_s;
    ProfileConfig copy = *this;
    for (const auto& [key, get] : config_fields()) root[key] = get(copy);
    return root.dump(2);
}

ProfileConfig load_profile_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return ProfileConfig::from_json(buf.str());
}

double load_shape(const ProfileConfig& cfg, double hour) {
    return cfg.base_level + cfg.morning_amplitude * gauss_bump(hour, cfg.morning_hour, cfg.morning_width_h) +
           cfg.evening_amplitude * gauss_bump(hour, cfg.evening_hour, cfg.evening_width_h);
}

double solar_shape(const ProfileConfig& cfg, double hour) {
    if (hour <= cfg.sunrise_hour || hour >= cfg.sunset_hour) return 0.0;
    const double s = std::sin(std::numbers::pi * (hour - cfg.sunrise_hour) / (cfg.sunset_hour - cfg.sunrise_hour));
    return std::pow(s, 1.5);
}

ProfileSet generate_profiles(const GridModel& grid, const ProfileConfig& cfg, std::uint64_t seed) {
    require_valid(grid);
    validate_config(cfg);
    const int steps = cfg.duration_s;
    const int m = grid.n_pq();

    ProfileSet out;
    out.p = Eigen::MatrixXd::Zero(steps, m);
    out.q = Eigen::MatrixXd::Zero(steps, m);
    out.pv = Eigen::MatrixXd::Zero(steps, m);

    auto hour_of = [&](int k) { return std::fmod(cfg.start_hour + k / 3600.0, 24.0); };

    for (int c = 0; c < m; ++c) {
        const Bus& bus = grid.buses[static_cast<std::size_t>(c + 1)];
        const auto b = static_cast<std::uint64_t>(bus.index);
        OuProcess load_dev(seed, kLoadStream + b, cfg.load_noise, cfg.load_reversion_s);
        OuProcess pf_dev(seed, kPfStream + b, cfg.pf_noise, cfg.load_reversion_s);
        const double pf_nominal =
            bus.load_p_w > 0.0 ? bus.load_p_w / std::hypot(bus.load_p_w, bus.load_q_var) : 1.0;
        const double q_sign = bus.load_q_var < 0.0 ? -1.0 : 1.0;
        for (int k = 0; k < steps; ++k) {
            const double p = bus.load_p_w * load_shape(cfg, hour_of(k)) * std::max(0.0, 1.0 + load_dev.value());
            out.p(k, c) = p;
            if (cfg.pf_band == 0.0 || cfg.pf_noise == 0.0) {
                out.q(k, c) = bus.load_p_w > 0.0 ? p * bus.load_q_var / bus.load_p_w : 0.0;
            } else {
                const double pf = std::clamp(pf_nominal + cfg.pf_band * std::clamp(pf_dev.value(), -1.0, 1.0),
                                             0.05, 1.0);
                out.q(k, c) = q_sign * p * std::sqrt(1.0 - pf * pf) / pf;
            }
            load_dev.advance();
            pf_dev.advance();
        }
    }

    // All plants share one cloud process; per-plant jitter is small, so the
    // plants' increments are strongly correlated.
    OuProcess cloud(seed, kCloudStream, cfg.cloud_noise, cfg.cloud_reversion_s);
    std::vector<double> cloud_path(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        cloud_path[static_cast<std::size_t>(k)] = cloud.value();
        cloud.advance();
    }
    for (int c = 0; c < m; ++c) {
        const Bus& bus = grid.buses[static_cast<std::size_t>(c + 1)];
        if (bus.pv_p_w <= 0.0) continue;
        OuProcess jitter(seed, kJitterStream + static_cast<std::uint64_t>(bus.index), cfg.plant_jitter,
                         cfg.cloud_reversion_s);
        for (int k = 0; k < steps; ++k) {
            const double factor = std::clamp(1.0 + cloud_path[static_cast<std::size_t>(k)] + jitter.value(), 0.0, 1.2);
            out.pv(k, c) = bus.pv_p_w * solar_shape(cfg, hour_of(k)) * factor;
            jitter.advance();
        }
    }
    return out;
}

ProfileSet ProfileSet::slice(int begin, int end) const {
    if (begin < 0 || end > steps() || begin >= end) throw ConfigError("profile slice out of range");
    return {p.middleRows(begin, end - begin), q.middleRows(begin, end - begin), pv.middleRows(begin, end - begin)};
}

PowerInjection net_injection(const GridModel& grid, const ProfileSet& profiles, int step) {
    const double sb = grid.s_base_va;
    PowerInjection inj;
    inj.p = (profiles.pv.row(step) - profiles.p.row(step)).transpose() / sb;
    inj.q = -profiles.q.row(step).transpose() / sb;
    return inj;
}

void write_profiles_csv(const ProfileSet& profiles, const std::filesystem::path& path) {
    const int m = profiles.n_pq();
    CsvTable table;
    table.header = {"t"};
    for (const auto& prefix : {"p_", "q_", "pv_"}) {
        const auto cols = numbered(prefix, m);
        table.header.insert(table.header.end(), cols.begin(), cols.end());
    }
    table.values.resize(profiles.steps(), 1 + 3 * m);
    for (int k = 0; k < profiles.steps(); ++k) table.values(k, 0) = k;
    table.values.middleCols(1, m) = profiles.p;
    table.values.middleCols(1 + m, m) = profiles.q;
    table.values.middleCols(1 + 2 * m, m) = profiles.pv;
    write_csv(table, path);
}

ProfileSet read_profiles_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const auto ncol = static_cast<int>(table.header.size());
    if (ncol < 4 || (ncol - 1) % 3 != 0) throw ConfigError(path.string() + ": expected header t,p_*,q_*,pv_*");
    const int m = (ncol - 1) / 3;
    std::vector<std::string> expected = {"t"};
    for (const auto& prefix : {"p_", "q_", "pv_"}) {
        const auto cols = numbered(prefix, m);
        expected.insert(expected.end(), cols.begin(), cols.end());
    }
    if (table.header != expected) throw ConfigError(path.string() + ": header does not match t,p_1..,q_1..,pv_1..");
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        const double t = table.values(r, 0);
        const double expect = r == 0 ? t : table.values(r - 1, 0) + 1.0;
        if (r == 0 && t != 0.0) throw ConfigError(path.string() + ": first timestamp must be 0");
        if (t != expect) {
            throw ConfigError(path.string() + ": row " + std::to_string(r + 1) + " breaks the 1 s stride (t=" +
                              format_double(t) + ")");
        }
    }
    ProfileSet out;
    out.p = table.values.middleCols(1, m);
    out.q = table.values.middleCols(1 + m, m);
    out.pv = table.values.middleCols(1 + 2 * m, m);
    if ((out.pv.array() < 0.0).any()) throw ConfigError(path.string() + ": negative pv value");
    return out;
}

ProfileSet read_profiles_csv(const std::filesystem::path& path, const GridModel& grid) {
    ProfileSet out = read_profiles_csv(path);
    if (out.n_pq() != grid.n_pq()) {
        throw ConfigError(path.string() + ": profile has " + std::to_string(out.n_pq()) +
                          " bus columns, grid has " + std::to_string(grid.n_pq()) + " non-slack buses");
    }
    for (int c = 0; c < out.n_pq(); ++c) {
        if (grid.buses[static_cast<std::size_t>(c + 1)].pv_p_w <= 0.0 && (out.pv.col(c).array() != 0.0).any()) {
            throw ConfigError(path.string() + ": pv generation at bus " + std::to_string(c + 1) +
                              " which has no plant");
        }
    }
    return out;
}

}  // namespace senskit
