#include "streamrank/params.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace streamrank::nn {

using nlohmann::ordered_json;

void save_checkpoint(const ParamStore& store, const std::string& path_base, std::uint64_t config_hash) {
    std::ofstream bin(path_base + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write checkpoint: " + path_base + ".bin");

    ordered_json desc;
    desc["format_version"] = 1;
    desc["config_hash"] = config_hash;
    desc["params"] = ordered_json::array();
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < store.names.size(); ++i) {
        const auto& value = store.values[i];
        ordered_json entry;
        entry["name"] = store.names[i];
        entry["rows"] = value.rows();
        entry["cols"] = value.cols();
        entry["offset"] = offset;
        desc["params"].push_back(entry);
        bin.write(reinterpret_cast<const char*>(value.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(value.size())));
        offset += static_cast<std::uint64_t>(value.size());
    }
    bin.close();
    if (!bin) throw std::runtime_error("checkpoint write failed: " + path_base + ".bin");

    std::ofstream js(path_base + ".json");
    if (!js) throw std::runtime_error("cannot write checkpoint: " + path_base + ".json");
    js << desc.dump(2) << "\n";
}

std::uint64_t load_checkpoint(const std::string& path_base, ParamStore& store) {
    std::ifstream js(path_base + ".json");
    if (!js) throw std::runtime_error("cannot read checkpoint: " + path_base + ".json");
    ordered_json desc = ordered_json::parse(js);

    std::ifstream bin(path_base + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read checkpoint: " + path_base + ".bin");

    for (const auto& entry : desc.at("params")) {
        const std::string name = entry.at("name").get<std::string>();
        const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
        const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
        Mat value(rows, cols);
        bin.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
        bin.read(reinterpret_cast<char*>(value.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(value.size())));
        if (!bin) throw std::runtime_error("checkpoint truncated: " + path_base + ".bin");
        if (store.has(name)) {
            store.at(name) = std::move(value);
        } else {
            store.create(name, std::move(value));
        }
    }
    return desc.at("config_hash").get<std::uint64_t>();
}

}  // namespace streamrank::nn
