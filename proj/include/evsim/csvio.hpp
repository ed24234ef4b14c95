#pragma once

#include <string>
#include <vector>

namespace evsim {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws IoError if absent.
    std::size_t column(const std::string& name) const;
};

/// Read a comma-separated file (no quoting; our own outputs only).
CsvTable read_csv(const std::string& path);

} // namespace evsim
