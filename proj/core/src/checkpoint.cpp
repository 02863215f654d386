#include "microtrip/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "microtrip/error.hpp"

namespace microtrip {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'T', 'C', 'K'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void write_checkpoint(const Checkpoint& ck, std::ostream& out) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& e : ck.params.entries()) {
        tensors.push_back({{"name", e.name}, {"rows", e.rows}, {"cols", e.cols}, {"offset", e.offset}});
    }
    nlohmann::json manifest = {{"format", "microtrip-checkpoint"},
                               {"version", kCheckpointVersion},
                               {"arch", ck.arch.to_json()},
                               {"train", ck.train.to_json()},
                               {"config_digest", ck.config_digest},
                               {"scalar_count", ck.params.scalar_count()},
                               {"tensors", tensors}};
    const std::string text = manifest.dump();
    out.write(kMagic.data(), 4);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double v : ck.params.flat()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        put_u32(out, bits);
    }
    if (!out) {
        fail(ErrorCode::InvalidArgument, "failed to write checkpoint");
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
        fail(ErrorCode::Parse, "not a checkpoint file (bad magic)");
    }
    const std::uint32_t mlen = get_u32(data + 4);
    if (bytes.size() < 8 + static_cast<std::size_t>(mlen)) {
        fail(ErrorCode::Checksum, "checkpoint manifest truncated");
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(8, mlen));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, std::string("checkpoint manifest: ") + e.what());
    }
    if (manifest.value("format", "") != "microtrip-checkpoint") {
        fail(ErrorCode::Parse, "checkpoint manifest has the wrong format tag");
    }
    if (manifest.value("version", -1) != kCheckpointVersion) {
        fail(ErrorCode::Version, "unsupported checkpoint version " +
                                     std::to_string(manifest.value("version", -1)));
    }
    Checkpoint ck;
    ck.arch = ArchConfig::from_json(manifest.at("arch"));
    ck.train = TrainConfig::from_json(manifest.at("train"));
    ck.config_digest = manifest.value("config_digest", "");
    const std::size_t count = manifest.at("scalar_count").get<std::size_t>();
    const std::size_t blob = 8 + static_cast<std::size_t>(mlen);
    if (bytes.size() != blob + 4 * count) {
        fail(ErrorCode::Checksum, "checkpoint parameter blob has " +
                                      std::to_string(bytes.size() - blob) + " bytes, expected " +
                                      std::to_string(4 * count));
    }
    for (const auto& t : manifest.at("tensors")) {
        const auto rows = t.at("rows").get<std::size_t>();
        const auto cols = t.at("cols").get<std::size_t>();
        const auto offset = t.at("offset").get<std::size_t>();
        if (offset != ck.params.scalar_count() || offset + rows * cols > count) {
            fail(ErrorCode::Parse, "checkpoint tensor table is inconsistent");
        }
        std::vector<double> values(rows * cols);
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] = std::bit_cast<float>(get_u32(data + blob + 4 * (offset + i)));
        }
        ck.params.add(t.at("name").get<std::string>(), rows, cols, std::move(values));
    }
    // Validates names and shapes against the architecture.
    DenoiserNet check(ck.arch, ck.params);
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::NotFound, "cannot write checkpoint " + path.string());
    }
    write_checkpoint(ck, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::CheckpointNotFound, "checkpoint not found: " + path.string());
    }
    return read_checkpoint(in);
}

} // namespace microtrip
