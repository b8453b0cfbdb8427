#include "xaimeter/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "xaimeter/errors.hpp"
#include "xaimeter/random.hpp"

namespace xaimeter {

namespace {

constexpr char kMagic[4] = {'X', 'A', 'I', 'M'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw CorruptFileError("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw CorruptFileError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

nlohmann::json layer_to_json(const Layer& l) {
    nlohmann::json j;
    j["kind"] = layer_kind_name(l.kind);
    j["name"] = l.name;
    switch (l.kind) {
        case LayerKind::Conv2d:
            j["in"] = l.in_channels;
            j["out"] = l.out_channels;
            j["kernel"] = l.kernel;
            j["padding"] = l.padding;
            break;
        case LayerKind::Dense:
            j["in"] = l.in_features;
            j["out"] = l.out_features;
            break;
        case LayerKind::MaxPool:
        case LayerKind::AvgPool:
            j["window"] = l.window;
            break;
        default:
            break;
    }
    return j;
}

Layer layer_from_json(const nlohmann::json& j) {
    const LayerKind kind = layer_kind_from_name(j.at("kind").get<std::string>());
    const auto name = j.at("name").get<std::string>();
    switch (kind) {
        case LayerKind::Conv2d:
            return Layer::conv2d(name, j.at("in").get<int>(), j.at("out").get<int>(),
                                 j.at("kernel").get<int>(), j.at("padding").get<int>());
        case LayerKind::Dense:
            return Layer::dense(name, j.at("in").get<int>(), j.at("out").get<int>());
        case LayerKind::MaxPool:
            return Layer::max_pool(name, j.at("window").get<int>());
        case LayerKind::AvgPool:
            return Layer::avg_pool(name, j.at("window").get<int>());
        case LayerKind::Relu:
            return Layer::relu(name);
        case LayerKind::Flatten:
            return Layer::flatten(name);
    }
    throw CorruptFileError("checkpoint header has unknown layer kind");
}

}  // namespace

void save_model(const Classifier& model, const std::filesystem::path& path) {
    nlohmann::json header;
    header["schema"] = "xaimeter-model";
    header["input"] = {model.input_height(), model.input_width(), 3};
    header["classes"] = model.num_classes();
    header["layers"] = nlohmann::json::array();
    for (const Layer& l : model.layers()) header["layers"].push_back(layer_to_json(l));
    const std::string header_str = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(kMagic, 4);
    put_u32(os, kCheckpointVersion);
    put_u64(os, header_str.size());
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const Layer& l : model.layers()) {
        for (std::size_t i = 0; i < l.weights.size(); ++i) put_f64(os, l.weights[i]);
        for (std::size_t i = 0; i < l.bias.size(); ++i) put_f64(os, l.bias[i]);
    }
    if (!os) throw IoError("failed writing " + path.string());
}

Classifier load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw CorruptFileError(path.string() + ": not a model checkpoint (bad magic)");
    }
    const std::uint32_t version = get_u32(is);
    if (version != kCheckpointVersion) {
        throw VersionMismatchError(path.string() + ": checkpoint version " +
                                   std::to_string(version) + ", expected " +
                                   std::to_string(kCheckpointVersion));
    }
    const std::uint64_t header_len = get_u64(is);
    if (header_len > (1u << 20)) throw CorruptFileError(path.string() + ": oversized header");
    std::string header_str(header_len, '\0');
    is.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!is) throw CorruptFileError(path.string() + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(path.string() + ": bad header JSON: " + e.what());
    }

    try {
        const auto input = header.at("input");
        std::vector<Layer> layers;
        for (const auto& jl : header.at("layers")) layers.push_back(layer_from_json(jl));
        Classifier model(input.at(0).get<int>(), input.at(1).get<int>(),
                         header.at("classes").get<int>(), std::move(layers));
        for (Layer& l : model.layers()) {
            for (std::size_t i = 0; i < l.weights.size(); ++i) l.weights[i] = get_f64(is);
            for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = get_f64(is);
        }
        // must now be exactly at end of file
        char extra;
        is.read(&extra, 1);
        if (is) throw CorruptFileError(path.string() + ": trailing bytes after parameters");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(path.string() + ": bad header fields: " + e.what());
    }
}

std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (is) {
        is.read(buf, sizeof(buf));
        const std::streamsize n = is.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace xaimeter
