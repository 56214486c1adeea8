#include "camox/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>

#include "camox/core.hpp"
#include "camox/io_util.hpp"

namespace camox::manifest {

using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::string hash_file(const std::filesystem::path& path) {
    const std::string bytes = read_text_file(path);
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

std::string hash_tree(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    if (fs::is_regular_file(root)) {
        files.push_back(root);
    } else {
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
    }
    std::vector<std::pair<std::string, fs::path>> keyed;
    for (const auto& p : files) {
        keyed.emplace_back(fs::relative(p, root).generic_string(), p);
    }
    std::sort(keyed.begin(), keyed.end());

    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [rel, p] : keyed) {
        h = fnv1a64(rel.data(), rel.size(), h);
        h = fnv1a64("\0", 1, h);
        const std::string bytes = read_text_file(p);
        h = fnv1a64(bytes.data(), bytes.size(), h);
    }
    return hex64(h);
}

void write(const std::filesystem::path& path, const RunManifest& m) {
    json artifacts = json::array();
    for (const Artifact& a : m.artifacts) {
        artifacts.push_back({{"path", a.path}, {"hash", a.hash}});
    }
    const json j{{"command", m.command}, {"config", m.config},
                 {"dataset_hash", m.dataset_hash}, {"seed", m.seed},
                 {"artifacts", artifacts}, {"created_utc", m.created_utc}};
    write_text_file(path, j.dump(2) + "\n");
}

RunManifest read(const std::filesystem::path& path) {
    const json j = json::parse(read_text_file(path));
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("artifacts")) {
        m.artifacts.push_back({a.at("path").get<std::string>(), a.at("hash").get<std::string>()});
    }
    m.created_utc = j.at("created_utc").get<std::string>();
    return m;
}

}  // namespace camox::manifest
