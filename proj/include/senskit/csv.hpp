#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace senskit {

/// Numeric CSV with a single header line. Values are written in shortest
/// round-trip form, so write followed by read is lossless.
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;  // rows x header.size()
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

std::string format_double(double v);

/// "p_1", ..., "p_n"
std::vector<std::string> numbered(const std::string& prefix, int n, int first = 1);

}  // namespace senskit
