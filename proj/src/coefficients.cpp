#include "senskit/coefficients.hpp"

#include <string>

#include "senskit/csv.hpp"
#include "senskit/errors.hpp"
#include "senskit/parallel.hpp"
#include "senskit/powerflow.hpp"

namespace senskit {

CoefficientSeries to_series(int node, const std::vector<CoefficientVector>& vectors) {
    CoefficientSeries s;
    s.node = node;
    if (vectors.empty()) return s;
    s.z.resize(static_cast<Eigen::Index>(vectors.size()), vectors.front().z.size());
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        s.t.push_back(vectors[k].t);
        s.z.row(static_cast<Eigen::Index>(k)) = vectors[k].z.transpose();
        s.rank_deficient.push_back(vectors[k].rank_deficient);
    }
    return s;
}

std::map<int, CoefficientSeries> true_coefficient_series(const GridModel& grid, const ProfileSet& profiles,
                                                         const std::vector<int>& nodes,
                                                         const std::vector<int>& timesteps, int threads) {
    const int m = grid.n_pq();
    for (int node : nodes) {
        if (node < 1 || node > m) throw ConfigError("node " + std::to_string(node) + " is not a non-slack bus");
    }
    const CMatrix ybus = admittance_matrix(grid);
    const auto count = static_cast<Eigen::Index>(timesteps.size());
    std::map<int, CoefficientSeries> out;
    for (int node : nodes) {
        auto& s = out[node];
        s.node = node;
        s.t = timesteps;
        s.z.resize(count, 2 * m);
        s.rank_deficient.assign(timesteps.size(), false);
    }
    parallel_for(
        static_cast<int>(count),
        [&](int k) {
            const int step = timesteps[static_cast<std::size_t>(k)];
            if (step < 0 || step >= profiles.steps()) throw ConfigError("truth timestep outside profile range");
            const auto sol = solve_loadflow(grid, ybus, net_injection(grid, profiles, step));
            const auto coeffs = analytical_sensitivities(ybus, sol);
            for (int node : nodes) out.at(node).z.row(k) = coeffs.stacked_row(node).transpose();
        },
        threads > 0 ? threads : thread_budget());
    return out;
}

void write_true_coeffs_csv(const CoefficientSeries& series, const std::filesystem::path& path) {
    const auto m = static_cast<int>(series.z.cols() / 2);
    const std::string node = std::to_string(series.node);
    CsvTable table;
    table.header = {"t"};
    for (const auto& prefix : {"kp_" + node + "_", "kq_" + node + "_"}) {
        const auto cols = numbered(prefix, m);
        table.header.insert(table.header.end(), cols.begin(), cols.end());
    }
    table.values.resize(series.size(), 1 + 2 * m);
    for (int k = 0; k < series.size(); ++k) table.values(k, 0) = series.t[static_cast<std::size_t>(k)];
    table.values.rightCols(2 * m) = series.z;
    write_csv(table, path);
}

CoefficientSeries read_true_coeffs_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const auto ncol = static_cast<int>(table.header.size());
    if (ncol < 3 || (ncol - 1) % 2 != 0 || table.header[0] != "t") {
        throw ConfigError(path.string() + ": expected header t,kp_<i>_*,kq_<i>_*");
    }
    const int m = (ncol - 1) / 2;
    const std::string& first = table.header[1];
    const auto us = first.find('_', 3);
    if (first.rfind("kp_", 0) != 0 || us == std::string::npos) throw ConfigError(path.string() + ": bad header");
    CoefficientSeries s;
    s.node = std::stoi(first.substr(3, us - 3));
    const std::string node = std::to_string(s.node);
    std::vector<std::string> expected = {"t"};
    for (const auto& prefix : {"kp_" + node + "_", "kq_" + node + "_"}) {
        const auto cols = numbered(prefix, m);
        expected.insert(expected.end(), cols.begin(), cols.end());
    }
    if (table.header != expected) throw ConfigError(path.string() + ": header does not match coefficient layout");
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) s.t.push_back(static_cast<int>(table.values(r, 0)));
    s.z = table.values.rightCols(2 * m);
    s.rank_deficient.assign(s.t.size(), false);
    return s;
}

void write_estimates_csv(const CoefficientSeries& series, const std::filesystem::path& path) {
    const auto width = static_cast<int>(series.z.cols());
    CsvTable table;
    table.header = {"t"};
    const auto cols = numbered("z_", width);
    table.header.insert(table.header.end(), cols.begin(), cols.end());
    table.header.emplace_back("rank_deficient");
    table.values.resize(series.size(), 2 + width);
    for (int k = 0; k < series.size(); ++k) {
        const auto idx = static_cast<std::size_t>(k);
        table.values(k, 0) = series.t[idx];
        table.values.row(k).segment(1, width) = series.z.row(k);
        table.values(k, 1 + width) = idx < series.rank_deficient.size() && series.rank_deficient[idx] ? 1.0 : 0.0;
    }
    write_csv(table, path);
}

CoefficientSeries read_estimates_csv(const std::filesystem::path& path, int node) {
    const CsvTable table = read_csv(path);
    const auto ncol = static_cast<int>(table.header.size());
    if (ncol < 3 || table.header.front() != "t" || table.header.back() != "rank_deficient") {
        throw ConfigError(path.string() + ": expected header t,z_*,rank_deficient");
    }
    const int width = ncol - 2;
    CoefficientSeries s;
    s.node = node;
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        s.t.push_back(static_cast<int>(table.values(r, 0)));
        s.rank_deficient.push_back(table.values(r, ncol - 1) != 0.0);
    }
    s.z = table.values.middleCols(1, width);
    return s;
}

}  // namespace senskit
