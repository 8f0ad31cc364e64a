#include "rcdgcn/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rcdgcn/error.hpp"

namespace rcdgcn::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (first) {
            t.header = split_line(line);
            first = false;
        } else {
            t.rows.push_back(split_line(line));
        }
    }
    if (first) {
        throw SchemaError("'" + path + "' is empty (missing header row)");
    }
    return t;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& cell, const std::string& where) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || cell.empty()) {
        throw SchemaError("non-numeric cell '" + cell + "' at " + where);
    }
    return v;
}

void Writer::header(const std::vector<std::string>& fields) {
    row(fields);
}

void Writer::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) buf_ += ',';
        buf_ += cells[i];
    }
    buf_ += '\n';
}

void Writer::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

}  // namespace rcdgcn::csv
