#include "senskit/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "senskit/errors.hpp"

namespace senskit {

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> numbered(const std::string& prefix, int n, int first) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out.push_back(prefix + std::to_string(first + k));
    return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (auto col : split(line)) table.header.emplace_back(col);
    const std::size_t ncol = table.header.size();

    std::vector<double> flat;
    std::size_t nrow = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != ncol) {
            throw ConfigError(path.string() + ": row " + std::to_string(nrow + 1) + " has " +
                              std::to_string(cells.size()) + " fields, expected " + std::to_string(ncol));
        }
        for (auto cell : cells) {
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                throw ConfigError(path.string() + ": row " + std::to_string(nrow + 1) + ": bad number '" +
                                  std::string(cell) + "'");
            }
            flat.push_back(v);
        }
        ++nrow;
    }
    table.values.resize(static_cast<Eigen::Index>(nrow), static_cast<Eigen::Index>(ncol));
    for (std::size_t r = 0; r < nrow; ++r) {
        for (std::size_t c = 0; c < ncol; ++c) {
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * ncol + c];
        }
    }
    return table;
}

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c) out << ',';
        out << table.header[c];
    }
    out << '\n';
    std::string row;
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        row.clear();
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
            if (c) row += ',';
            row += format_double(table.values(r, c));
        }
        row += '\n';
        out << row;
    }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace senskit
