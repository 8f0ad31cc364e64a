#pragma once

#include <string>
#include <vector>

namespace rcdgcn::csv {

/// One parsed CSV file: header fields plus data rows. Cells are kept as raw
/// strings; empty cells stay empty.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Reads a comma-separated file. No quoting rules: the schemas in this
/// project never need embedded commas. Throws IoError if the file cannot be
/// opened and SchemaError on an empty file.
Table read_file(const std::string& path);

/// Shortest decimal form that parses back to the identical double
/// (std::to_chars); locale-independent.
std::string format_double(double v);

/// Strict double parse of a whole cell. Throws SchemaError with the given
/// location tag on failure.
double parse_double(const std::string& cell, const std::string& where);

/// Writer that builds rows and flushes them to disk. Throws IoError when the
/// destination cannot be written.
class Writer {
public:
    void header(const std::vector<std::string>& fields);
    void row(const std::vector<std::string>& cells);
    void save(const std::string& path) const;

private:
    std::string buf_;
};

}  // namespace rcdgcn::csv
