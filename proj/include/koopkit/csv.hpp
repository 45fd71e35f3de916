#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace koopkit {

/// Shortest-safe lossless decimal form of a double ("%.17g").
std::string format_double(double value);

/// Rectangular table with a header row, written as comma-separated text with LF endings.
class ResultTable {
public:
    explicit ResultTable(std::vector<std::string> header);

    /// Appends a row of preformatted cells; throws std::invalid_argument on a width mismatch.
    void add_row(std::vector<std::string> cells);
    void add_row(const std::vector<double>& values);

    std::size_t columns() const { return header_.size(); }
    std::size_t rows() const { return rows_.size(); }
    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::string>& row(std::size_t i) const { return rows_.at(i); }

    std::string to_string() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace koopkit
