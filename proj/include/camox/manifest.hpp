#pragma once
// Run manifests: content hashes of inputs and outputs so a run can be
// reproduced and its artifacts checked byte for byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace camox::manifest {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_file(const std::filesystem::path& path);
// Recursive content hash over regular files, path-sorted; stable across runs.
std::string hash_tree(const std::filesystem::path& root);

struct Artifact {
    std::string path;  // relative to the manifest's directory
    std::string hash;
};

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::string dataset_hash;
    std::uint64_t seed = 0;
    std::vector<Artifact> artifacts;
    std::string created_utc;
};

void write(const std::filesystem::path& path, const RunManifest& m);
RunManifest read(const std::filesystem::path& path);

}  // namespace camox::manifest
