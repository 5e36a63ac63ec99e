#include "touchgen/core/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <vector>

#include "touchgen/core/errors.hpp"

namespace touchgen {

namespace {

constexpr std::array<char, 8> kMagic = {'T', 'G', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64_le(std::ostream& out, std::uint64_t v) {
    std::array<unsigned char, 8> bytes{};
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes.data()), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
    std::array<unsigned char, 8> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

void write_f32_le(std::vector<char>& buffer, float value) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    for (int i = 0; i < 4; ++i) buffer.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float read_f32_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

struct Opened {
    nlohmann::json header;
    std::vector<unsigned char> payload;
};

Opened open_checkpoint(const std::filesystem::path& path, bool with_payload) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), 8);
    if (!in || magic != kMagic) throw ParseError("not a checkpoint file: " + path.string());
    const std::uint64_t header_len = read_u64_le(in);
    if (!in || header_len > (1ULL << 32)) throw ParseError("corrupt checkpoint header length: " + path.string());
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ParseError("truncated checkpoint header: " + path.string());
    Opened result;
    try {
        result.header = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
    if (with_payload) {
        result.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return result;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata,
                     const ag::ParameterList<float>& params) {
    nlohmann::json tensors = nlohmann::json::array();
    std::vector<char> payload;
    for (const auto& np : params) {
        const auto& v = np.param->value;
        tensors.push_back({{"name", np.name},
                           {"shape", {v.rows(), v.cols()}},
                           {"dtype", "float32"},
                           {"offset", payload.size()}});
        for (Eigen::Index i = 0; i < v.size(); ++i) write_f32_le(payload, v.data()[i]);
    }
    const nlohmann::json header = {{"metadata", metadata}, {"tensors", tensors}};
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic.data(), 8);
    write_u64_le(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error("checkpoint write failed: " + path.string());
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, const ag::ParameterList<float>& params) {
    const Opened ck = open_checkpoint(path, true);
    std::unordered_map<std::string, const nlohmann::json*> directory;
    for (const auto& t : ck.header.at("tensors")) directory.emplace(t.at("name").get<std::string>(), &t);
    for (const auto& np : params) {
        auto it = directory.find(np.name);
        if (it == directory.end()) throw ConfigError("checkpoint " + path.string() + " lacks tensor " + np.name);
        const nlohmann::json& entry = *it->second;
        const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
        const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
        auto& value = np.param->value;
        if (rows != value.rows() || cols != value.cols())
            throw ConfigError("checkpoint tensor " + np.name + " has shape " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", model expects " + std::to_string(value.rows()) + "x" +
                              std::to_string(value.cols()));
        const auto offset = entry.at("offset").get<std::size_t>();
        if (offset + static_cast<std::size_t>(value.size()) * 4 > ck.payload.size())
            throw ParseError("checkpoint payload truncated at tensor " + np.name);
        for (Eigen::Index i = 0; i < value.size(); ++i)
            value.data()[i] = read_f32_le(ck.payload.data() + offset + static_cast<std::size_t>(i) * 4);
    }
    return ck.header.at("metadata");
}

nlohmann::json read_checkpoint_metadata(const std::filesystem::path& path) {
    return open_checkpoint(path, false).header.at("metadata");
}

}  // namespace touchgen
