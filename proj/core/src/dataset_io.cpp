#include "fluxfed/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "fluxfed/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fluxfed {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'U', 'X', 'D', 'S', '1', '\0'};

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    buf.push_back(static_cast<unsigned char>(v & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

void put_f64(std::vector<unsigned char>& buf, double d) {
    std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

std::string client_filename(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "client_%04d.bin", id);
    return buf;
}

void write_client(const fs::path& path, const ClientDataset& c, std::uint32_t k_total,
                  std::uint32_t num_classes) {
    std::vector<unsigned char> buf;
    const std::uint32_t s = static_cast<std::uint32_t>(c.samples());
    const std::uint32_t z = static_cast<std::uint32_t>(c.features.cols);
    buf.reserve(24 + std::size_t(s) * 4 + std::size_t(s) * z * 8);
    buf.insert(buf.end(), kMagic, kMagic + 8);
    put_u32(buf, k_total);
    put_u32(buf, num_classes);
    put_u32(buf, z);
    put_u32(buf, s);
    for (int y : c.labels) put_u32(buf, static_cast<std::uint32_t>(y));
    for (double d : c.features.data) put_f64(buf, d);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

ClientDataset read_client(const fs::path& path, std::size_t expect_u, std::size_t expect_z) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError(path.string() + ": cannot open", 0);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 24) throw ParseError(path.string() + ": truncated header", buf.size());
    if (std::memcmp(buf.data(), kMagic, 8) != 0)
        throw ParseError(path.string() + ": bad magic", 0);
    std::uint32_t u = get_u32(buf.data() + 12);
    std::uint32_t z = get_u32(buf.data() + 16);
    std::uint32_t s = get_u32(buf.data() + 20);
    if (u != expect_u) throw ParseError(path.string() + ": class count mismatch", 12);
    if (z != expect_z) throw ParseError(path.string() + ": feature dim mismatch", 16);
    std::size_t need = 24 + std::size_t(s) * 4 + std::size_t(s) * z * 8;
    if (buf.size() != need)
        throw ParseError(path.string() + ": payload size mismatch", buf.size());

    ClientDataset c;
    c.labels.resize(s);
    std::size_t off = 24;
    for (std::uint32_t i = 0; i < s; ++i, off += 4)
        c.labels[i] = static_cast<int>(get_u32(buf.data() + off));
    c.features = Matrix(s, z);
    for (std::size_t i = 0; i < std::size_t(s) * z; ++i, off += 8)
        c.features.data[i] = get_f64(buf.data() + off);
    return c;
}

}  // namespace

void save_federation(const std::string& dir, const FederationData& data) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "FLUXDS1";
    manifest["seed"] = data.meta.seed;
    manifest["classes"] = data.meta.num_classes;
    manifest["feature_dim"] = data.meta.feature_dim;
    manifest["shift"] = {{"type", to_string(data.meta.shift.type)},
                         {"level", data.meta.shift.level},
                         {"distributions", data.meta.shift.num_distributions}};
    json entries = json::array();
    auto k_total = static_cast<std::uint32_t>(data.train.size());
    auto dump = [&](const ClientDataset& c, const char* kind) {
        std::string name = client_filename(c.client_id);
        write_client(fs::path(dir) / name, c, k_total,
                     static_cast<std::uint32_t>(data.meta.num_classes));
        entries.push_back({{"id", c.client_id},
                           {"file", name},
                           {"samples", c.samples()},
                           {"train_count", c.train_count},
                           {"distribution", c.distribution_id},
                           {"kind", kind}});
    };
    for (const auto& c : data.train) dump(c, "train");
    for (const auto& c : data.test) dump(c, "test");
    manifest["entries"] = std::move(entries);

    std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::trunc);
    if (!mf) throw ConfigError("cannot write manifest in " + dir);
    mf << manifest.dump(2) << "\n";
}

FederationData load_federation(const std::string& dir) {
    fs::path mpath = fs::path(dir) / "manifest.json";
    std::ifstream mf(mpath);
    if (!mf) throw ConfigError("missing manifest: " + mpath.string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::parse_error& e) {
        throw ParseError(mpath.string() + ": " + e.what(), e.byte);
    }
    if (manifest.value("format", "") != "FLUXDS1")
        throw ParseError(mpath.string() + ": unknown dataset format", 0);

    FederationData data;
    data.meta.seed = manifest.at("seed").get<std::uint64_t>();
    data.meta.num_classes = manifest.at("classes").get<std::size_t>();
    data.meta.feature_dim = manifest.at("feature_dim").get<std::size_t>();
    const json& sh = manifest.at("shift");
    data.meta.shift.type = shift_type_from_string(sh.at("type").get<std::string>());
    data.meta.shift.level = sh.at("level").get<int>();
    data.meta.shift.num_distributions = sh.at("distributions").get<int>();

    for (const json& e : manifest.at("entries")) {
        ClientDataset c = read_client(fs::path(dir) / e.at("file").get<std::string>(),
                                      data.meta.num_classes, data.meta.feature_dim);
        c.client_id = e.at("id").get<int>();
        c.train_count = e.at("train_count").get<std::size_t>();
        c.distribution_id = e.at("distribution").get<int>();
        std::string kind = e.at("kind").get<std::string>();
        c.is_test = kind == "test";
        if (c.train_count > c.samples())
            throw ParseError(dir + "/" + e.at("file").get<std::string>() +
                                 ": train_count exceeds samples",
                             0);
        (c.is_test ? data.test : data.train).push_back(std::move(c));
    }
    return data;
}

}  // namespace fluxfed
