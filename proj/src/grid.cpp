#include "senskit/grid.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "senskit/errors.hpp"

namespace senskit {

using json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("grid: unknown field '" + key + "' in " + where);
        }
    }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) {
        throw ConfigError(std::string("grid: missing field '") + key + "' in " + where);
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("grid: field '") + key + "' has wrong type in " + where);
    }
}

}  // namespace

std::vector<std::string> validate(const GridModel& grid) {
    std::vector<std::string> out;
    const int n = grid.n_buses();
    if (!(grid.v_base_v > 0.0)) out.push_back("v_base must be positive");
    if (!(grid.s_base_va > 0.0)) out.push_back("s_base must be positive");
    if (n < 2) {
        out.push_back("grid needs a slack bus and at least one pq bus");
        return out;
    }

    int slack_count = 0;
    for (int k = 0; k < n; ++k) {
        const Bus& b = grid.buses[static_cast<std::size_t>(k)];
        if (b.index != k) {
            out.push_back("bus indices must be contiguous from 0 (found " + std::to_string(b.index) +
                          " at position " + std::to_string(k) + ")");
        }
        if (b.kind == BusKind::slack) {
            ++slack_count;
            if (b.index != 0) out.push_back("slack bus must have index 0 (bus " + std::to_string(b.index) + ")");
        }
        if (b.load_p_w < 0.0) out.push_back("bus " + std::to_string(b.index) + ": negative load_p");
        if (b.pv_p_w < 0.0) out.push_back("bus " + std::to_string(b.index) + ": negative pv_p");
    }
    if (slack_count == 0) out.push_back("no slack bus");
    if (slack_count > 1) out.push_back("multiple slack");

    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (std::size_t l = 0; l < grid.lines.size(); ++l) {
        const Line& ln = grid.lines[l];
        const std::string tag = "line " + std::to_string(l) + " (" + std::to_string(ln.from) + "-" +
                                std::to_string(ln.to) + ")";
        bool endpoints_ok = true;
        if (ln.from < 0 || ln.from >= n || ln.to < 0 || ln.to >= n) {
            out.push_back(tag + ": endpoint out of range");
            endpoints_ok = false;
        } else if (ln.from == ln.to) {
            out.push_back(tag + ": self loop");
            endpoints_ok = false;
        }
        if (ln.r_ohm < 0.0 || ln.x_ohm < 0.0) out.push_back(tag + ": negative impedance");
        if (ln.r_ohm == 0.0 && ln.x_ohm == 0.0) out.push_back(tag + ": degenerate impedance");
        if (ln.b_shunt_s < 0.0) out.push_back(tag + ": negative shunt susceptance");
        if (endpoints_ok) {
            adj[static_cast<std::size_t>(ln.from)].push_back(ln.to);
            adj[static_cast<std::size_t>(ln.to)].push_back(ln.from);
        }
    }

    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = true;
                frontier.push(v);
            }
        }
    }
    for (int k = 0; k < n; ++k) {
        if (!seen[static_cast<std::size_t>(k)]) out.push_back("bus " + std::to_string(k) + " unreachable");
    }
    return out;
}

void require_valid(const GridModel& grid) {
    const auto violations = validate(grid);
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid grid:";
    for (const auto& v : violations) msg << "\n  " << v;
    throw ConfigError(msg.str());
}

GridModel parse_grid_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("grid: parse error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("grid: top level must be an object");
    reject_unknown(root, {"format_version", "v_base_v", "s_base_va", "slack_voltage_pu", "buses", "lines"}, "root");
    if (field<int>(root, "format_version", "root") != 1) throw ConfigError("grid: unsupported format_version");

    GridModel g;
    g.v_base_v = field<double>(root, "v_base_v", "root");
    g.s_base_va = field<double>(root, "s_base_va", "root");
    if (!root.contains("slack_voltage_pu")) throw ConfigError("grid: missing field 'slack_voltage_pu' in root");
    const json& sv = root.at("slack_voltage_pu");
    if (!sv.is_object()) throw ConfigError("grid: slack_voltage_pu must be an object");
    reject_unknown(sv, {"re", "im"}, "slack_voltage_pu");
    g.slack_voltage_pu = {field<double>(sv, "re", "slack_voltage_pu"), field<double>(sv, "im", "slack_voltage_pu")};

    if (!root.contains("buses") || !root.at("buses").is_array()) throw ConfigError("grid: buses must be an array");
    for (std::size_t k = 0; k < root.at("buses").size(); ++k) {
        const json& jb = root.at("buses")[k];
        const std::string where = "buses[" + std::to_string(k) + "]";
        if (!jb.is_object()) throw ConfigError("grid: " + where + " must be an object");
        reject_unknown(jb, {"index", "name", "kind", "load_p_w", "load_q_var", "pv_p_w"}, where);
        Bus b;
        b.index = field<int>(jb, "index", where);
        b.name = field<std::string>(jb, "name", where);
        const auto kind = field<std::string>(jb, "kind", where);
        if (kind == "slack") {
            b.kind = BusKind::slack;
        } else if (kind == "pq") {
            b.kind = BusKind::pq;
        } else {
            throw ConfigError("grid: " + where + ": kind must be \"slack\" or \"pq\"");
        }
        b.load_p_w = field<double>(jb, "load_p_w", where);
        b.load_q_var = field<double>(jb, "load_q_var", where);
        b.pv_p_w = field<double>(jb, "pv_p_w", where);
        g.buses.push_back(std::move(b));
    }
    std::stable_sort(g.buses.begin(), g.buses.end(), [](const Bus& a, const Bus& b) { return a.index < b.index; });

    if (!root.contains("lines") || !root.at("lines").is_array()) throw ConfigError("grid: lines must be an array");
    for (std::size_t k = 0; k < root.at("lines").size(); ++k) {
        const json& jl = root.at("lines")[k];
        const std::string where = "lines[" + std::to_string(k) + "]";
        if (!jl.is_object()) throw ConfigError("grid: " + where + " must be an object");
        reject_unknown(jl, {"from", "to", "r_ohm", "x_ohm", "b_shunt_s"}, where);
        Line ln;
        ln.from = field<int>(jl, "from", where);
        ln.to = field<int>(jl, "to", where);
        ln.r_ohm = field<double>(jl, "r_ohm", where);
        ln.x_ohm = field<double>(jl, "x_ohm", where);
        ln.b_shunt_s = field<double>(jl, "b_shunt_s", where);
        g.lines.push_back(ln);
    }

    require_valid(g);
    return g;
}

std::string grid_to_json(const GridModel& grid) {
    json root;
    root["format_version"] = 1;
    root["v_base_v"] = grid.v_base_v;
    root["s_base_va"] = grid.s_base_va;
    root["slack_voltage_pu"] = {{"re", grid.slack_voltage_pu.real()}, {"im", grid.slack_voltage_pu.imag()}};
    json buses = json::array();
    for (const Bus& b : grid.buses) {
        buses.push_back({{"index", b.index},
                         {"name", b.name},
                         {"kind", b.kind == BusKind::slack ? "slack" : "pq"},
                         {"load_p_w", b.load_p_w},
                         {"load_q_var", b.load_q_var},
                         {"pv_p_w", b.pv_p_w}});
    }
    root["buses"] = std::move(buses);
    json lines = json::array();
    for (const Line& l : grid.lines) {
        lines.push_back(
            {{"from", l.from}, {"to", l.to}, {"r_ohm", l.r_ohm}, {"x_ohm", l.x_ohm}, {"b_shunt_s", l.b_shunt_s}});
    }
    root["lines"] = std::move(lines);
    return root.dump(2);
}

GridModel load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open grid file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_grid_json(buf.str());
}

void write_grid(const GridModel& grid, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write grid file " + path.string());
    out << grid_to_json(grid) << '\n';
}

std::uint64_t grid_hash(const GridModel& grid) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : grid_to_json(grid)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

CMatrix admittance_matrix(const GridModel& grid) {
    const int n = grid.n_buses();
    const double zb = grid.z_base_ohm();
    CMatrix y = CMatrix::Zero(n, n);
    for (const Line& ln : grid.lines) {
        const Complex z{ln.r_ohm / zb, ln.x_ohm / zb};
        const Complex ys = 1.0 / z;
        const Complex half_shunt{0.0, 0.5 * ln.b_shunt_s * zb};
        y(ln.from, ln.from) += ys + half_shunt;
        y(ln.to, ln.to) += ys + half_shunt;
        y(ln.from, ln.to) -= ys;
        y(ln.to, ln.from) -= ys;
    }
    return y;
}

}  // namespace senskit
