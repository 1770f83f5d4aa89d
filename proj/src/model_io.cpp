#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "pspd/error.hpp"
#include "pspd/model.hpp"

namespace pspd {

namespace {

constexpr const char* kFormatTag = "pspd-params";
constexpr int kFormatVersion = 1;

void put_le64(std::ostream& out, double value) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    char bytes[8];
    for (int b = 0; b < 8; ++b) {
        bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
    }
    out.write(bytes, 8);
}

double get_le64(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw InvalidInput("parameter file truncated");
    }
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) {
        bits = (bits << 8) | bytes[b];
    }
    return std::bit_cast<double>(bits);
}

} // namespace

void save_parameters(const std::filesystem::path& path, const ModelParameters& params,
                     std::size_t epoch) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    const nlohmann::json header = {{"format", kFormatTag},
                                   {"version", kFormatVersion},
                                   {"layer_sizes", params.layer_sizes()},
                                   {"epoch", epoch},
                                   {"count", params.parameter_count()}};
    out << header.dump() << '\n';
    for (double v : params.flatten()) {
        put_le64(out, v);
    }
    if (!out) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

SavedParameters load_parameters(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidInput("cannot open parameter file '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidInput("parameter file '" + path.string() + "' has no header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("bad parameter header in '" + path.string() + "': " + e.what());
    }
    if (header.value("format", "") != kFormatTag || header.value("version", 0) != kFormatVersion) {
        throw InvalidInput("'" + path.string() + "' is not a version-1 pspd parameter file");
    }
    const auto sizes = header.at("layer_sizes").get<std::vector<std::size_t>>();
    SavedParameters saved{ModelParameters::zeros(sizes), header.at("epoch").get<std::size_t>()};
    const std::size_t count = header.at("count").get<std::size_t>();
    if (count != saved.params.parameter_count()) {
        throw InvalidInput("parameter count in header does not match layer sizes");
    }
    std::vector<double> values(count);
    for (double& v : values) {
        v = get_le64(in);
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw InvalidInput("trailing bytes after parameter payload");
    }
    saved.params.assign_flat(values);
    return saved;
}

} // namespace pspd
