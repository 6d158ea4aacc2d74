#include "senskit/measurement.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "senskit/csv.hpp"
#include "senskit/errors.hpp"
#include "senskit/parallel.hpp"
#include "senskit/powerflow.hpp"

namespace senskit {

using json = nlohmann::ordered_json;

namespace {

constexpr double kMagnitudeFloor = 1e-12;

Complex perturb(Complex beta, double sigma_m, double sigma_p, const CounterRng& rng, std::uint64_t step,
                std::uint64_t mag_slot, std::uint64_t ang_slot, int& clamped) {
    if (sigma_m == 0.0 && sigma_p == 0.0) return beta;
    double mag = std::abs(beta);
    double ang = std::arg(beta);
    mag += rng.normal(step, mag_slot) * sigma_m * mag / 3.0;
    ang += rng.normal(step, ang_slot) * sigma_p / 3.0;
    if (mag <= 0.0) {
        mag = kMagnitudeFloor;
        ++clamped;
    }
    return std::polar(mag, ang);
}

}  // namespace

ITClass ITClass::by_name(const std::string& name) {
    if (name == "ideal") return ideal();
    if (name == "0.2") return class_02();
    if (name == "0.5") return class_05();
    if (name == "1.0" || name == "1") return class_10();
    throw ConfigError("unknown IT class '" + name + "' (expected ideal, 0.2, 0.5 or 1.0)");
}

NoiseSlots NoiseSlots::for_bus(int bus, int n_pq) {
    const auto b = static_cast<std::uint64_t>(bus - 1);
    const auto m = static_cast<std::uint64_t>(n_pq);
    return {2 * b, 2 * b + 1, 2 * m + 2 * b, 2 * m + 2 * b + 1};
}

NoisyPhasors inject_noise(Complex v, Complex i, const ITClass& cls, const CounterRng& rng, std::uint64_t step,
                          const NoiseSlots& slots) {
    NoisyPhasors out;
    out.v = perturb(v, cls.sigma_m_v, cls.sigma_p_v, rng, step, slots.v_mag, slots.v_ang, out.clamped);
    out.i = perturb(i, cls.sigma_m_i, cls.sigma_p_i, rng, step, slots.i_mag, slots.i_ang, out.clamped);
    return out;
}

bool MeasurementSeries::operator==(const MeasurementSeries& o) const {
    return t0 == o.t0 && v_mag == o.v_mag && p == o.p && q == o.q && it_class == o.it_class && seed == o.seed &&
           grid_hash == o.grid_hash && clamped == o.clamped;
}

MeasurementSeries simulate_measurements(const GridModel& grid, const ProfileSet& profiles, const ITClass& cls,
                                        std::uint64_t seed, int threads) {
    require_valid(grid);
    if (profiles.n_pq() != grid.n_pq()) throw ConfigError("profile bus count does not match grid");
    if (profiles.steps() < 2) throw ConfigError("simulation needs at least two timesteps");
    const int steps = profiles.steps();
    const int m = grid.n_pq();
    const CMatrix ybus = admittance_matrix(grid);
    const CounterRng rng(seed);

    MeasurementSeries out;
    out.v_mag.resize(steps, m);
    out.p.resize(steps, m);
    out.q.resize(steps, m);
    out.it_class = cls;
    out.seed = seed;
    out.grid_hash = grid_hash(grid);

    std::vector<int> clamped(static_cast<std::size_t>(steps), 0);
    parallel_for(
        steps,
        [&](int k) {
            LoadFlowSolution sol;
            try {
                sol = solve_loadflow(grid, ybus, net_injection(grid, profiles, k));
            } catch (const NumericError& e) {
                throw NumericError("timestep " + std::to_string(k) + ": " + e.what());
            }
            for (int b = 1; b <= m; ++b) {
                const NoisyPhasors noisy = inject_noise(sol.v(b), sol.i_inj(b), cls, rng,
                                                        static_cast<std::uint64_t>(k), NoiseSlots::for_bus(b, m));
                const Complex s = noisy.v * std::conj(noisy.i);
                out.v_mag(k, b - 1) = std::abs(noisy.v);
                out.p(k, b - 1) = s.real();
                out.q(k, b - 1) = s.imag();
                clamped[static_cast<std::size_t>(k)] += noisy.clamped;
            }
        },
        threads > 0 ? threads : thread_budget());
    for (int c : clamped) out.clamped += c;
    return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

void write_measurements_csv(const MeasurementSeries& series, const std::filesystem::path& path) {
    const int m = series.n_pq();
    CsvTable table;
    table.header = {"t"};
    for (const auto& prefix : {"v_", "p_", "q_"}) {
        const auto cols = numbered(prefix, m);
        table.header.insert(table.header.end(), cols.begin(), cols.end());
    }
    table.values.resize(series.steps(), 1 + 3 * m);
    for (int k = 0; k < series.steps(); ++k) table.values(k, 0) = series.t0 + k;
    table.values.middleCols(1, m) = series.v_mag;
    table.values.middleCols(1 + m, m) = series.p;
    table.values.middleCols(1 + 2 * m, m) = series.q;
    write_csv(table, path);

    std::ostringstream hash;
    hash << std::hex << series.grid_hash;
    json meta;
    meta["format_version"] = 1;
    meta["grid_hash"] = hash.str();
    meta["it_class"] = series.it_class.name;
    meta["seed"] = series.seed;
    meta["clamped_magnitudes"] = series.clamped;
    std::ofstream out(sidecar_path(path));
    if (!out) throw IoError("cannot write " + sidecar_path(path).string());
    out << meta.dump(2) << '\n';
}

MeasurementSeries read_measurements_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const auto ncol = static_cast<int>(table.header.size());
    if (ncol < 4 || (ncol - 1) % 3 != 0) throw ConfigError(path.string() + ": expected header t,v_*,p_*,q_*");
    const int m = (ncol - 1) / 3;
    std::vector<std::string> expected = {"t"};
    for (const auto& prefix : {"v_", "p_", "q_"}) {
        const auto cols = numbered(prefix, m);
        expected.insert(expected.end(), cols.begin(), cols.end());
    }
    if (table.header != expected) throw ConfigError(path.string() + ": header does not match t,v_1..,p_1..,q_1..");
    if (table.values.rows() < 2) throw ConfigError(path.string() + ": need at least two rows");

    MeasurementSeries s;
    s.t0 = static_cast<int>(table.values(0, 0));
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        if (table.values(r, 0) != s.t0 + static_cast<double>(r)) {
            throw ConfigError(path.string() + ": row " + std::to_string(r + 1) + " breaks the 1 s stride");
        }
    }
    s.v_mag = table.values.middleCols(1, m);
    s.p = table.values.middleCols(1 + m, m);
    s.q = table.values.middleCols(1 + 2 * m, m);
    if (!(s.v_mag.array() > 0.0).all()) throw ConfigError(path.string() + ": voltage magnitudes must be positive");

    const auto meta_path = sidecar_path(path);
    if (std::filesystem::exists(meta_path)) {
        std::ifstream in(meta_path);
        json meta;
        try {
            meta = json::parse(in);
            s.it_class = ITClass::by_name(meta.at("it_class").get<std::string>());
            s.seed = meta.at("seed").get<std::uint64_t>();
            s.grid_hash = std::stoull(meta.at("grid_hash").get<std::string>(), nullptr, 16);
            s.clamped = meta.value("clamped_magnitudes", 0);
        } catch (const json::exception& e) {
            throw ConfigError(meta_path.string() + ": " + e.what());
        }
    }
    return s;
}

}  // namespace senskit
