#pragma once

#include "streamrank/experiment.hpp"
#include "streamrank/synthgen.hpp"

#include <map>
#include <string>
#include <vector>

namespace streamrank::cli {

// Flat "section.key" -> value map. The schema (default_config) defines the
// full key set; files and --set overrides may only touch keys that exist.
struct ConfigMap {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }
    const std::string& raw(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key) const { return raw(key); }
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
};

ConfigMap default_config();

// INI-style: [section] headers, key = value lines, '#'/';' comments.
void merge_file(ConfigMap& cfg, const std::string& path);
// Each entry is "section.key=value".
void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& sets);

SynthConfig synth_from_config(const ConfigMap& cfg);
SplitRatios ratios_from_config(const ConfigMap& cfg);
nn::ModelConfig model_from_config(const ConfigMap& cfg);
exp::ExperimentConfig experiment_from_config(const ConfigMap& cfg);

}  // namespace streamrank::cli
