#include "eog/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "eog/kg.hpp"

namespace eog {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open input for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a64_hex(buf.str());
}

json make_manifest(const std::string& command, std::uint64_t seed, const json& config,
                   const std::vector<std::string>& input_paths) {
    json inputs = json::object();
    for (const auto& path : input_paths) inputs[path] = digest_file(path);
    return {
        {"command", command},
        {"seed", seed},
        {"config", config},
        {"config_digest", fnv1a64_hex(config.dump())},
        {"inputs", inputs},
    };
}

void write_manifest_file(const std::string& path, const json& manifest) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    out << manifest.dump(2) << "\n";
}

}  // namespace eog
