#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lf {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    int column(const std::string& name) const;
};

/// Numeric CSV with one header row.
CsvTable read_csv(const std::string& path);

/// Shortest round-trip decimal form, so equal doubles give equal bytes.
std::string format_double(double v);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<double>& values);
    void row(const std::vector<std::string>& cells);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
    std::size_t width_;
};

}  // namespace lf
