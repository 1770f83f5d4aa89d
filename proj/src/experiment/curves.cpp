#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "pspd/error.hpp"
#include "pspd/experiment.hpp"

namespace pspd {

namespace {

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

bool is_number(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool is_count(const std::string& s) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::string run_label(const std::filesystem::path& path) {
    std::filesystem::path p = path;
    return p.replace_extension().generic_string();
}

void append_trace(const std::filesystem::path& path, const std::string& run, std::string& out) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput(path.string() + ": cannot open trace");
    }
    std::vector<std::string> header;
    std::size_t epoch_col = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
        std::vector<std::string> cells = split_cells(line);
        if (header.empty()) {
            header = std::move(cells);
            const auto it = std::find(header.begin(), header.end(), "epoch");
            if (it == header.end()) {
                throw InvalidInput(where + "header has no 'epoch' column");
            }
            epoch_col = static_cast<std::size_t>(it - header.begin());
            continue;
        }
        if (cells.size() != header.size()) {
            throw InvalidInput(where + "expected " + std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
        }
        if (!is_count(cells[epoch_col])) {
            throw InvalidInput(where + "epoch '" + cells[epoch_col] + "' is not an integer");
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == epoch_col || cells[c].empty()) {
                continue;
            }
            if (!is_number(cells[c])) {
                throw InvalidInput(where + "column '" + header[c] + "': non-numeric value '" +
                                   cells[c] + "'");
            }
            out += run + ',' + cells[epoch_col] + ',' + header[c] + ',' + cells[c] + '\n';
        }
    }
    if (header.empty()) {
        throw InvalidInput(path.string() + ": trace has no header row");
    }
}

} // namespace

void emit_curves(std::span<const std::filesystem::path> traces, const std::filesystem::path& out) {
    if (traces.empty()) {
        throw InvalidInput("curves needs at least one trace file");
    }
    std::string text = "run,epoch,metric,value\n";
    std::map<std::string, std::size_t> seen;
    for (const auto& path : traces) {
        std::string run = run_label(path);
        const std::size_t count = ++seen[run];
        if (count > 1) {
            run += "#" + std::to_string(count);
        }
        append_trace(path, run, text);
    }
    std::ofstream file(out, std::ios::binary);
    file << text;
    if (!file) {
        throw std::runtime_error("cannot write '" + out.string() + "'");
    }
}

} // namespace pspd
