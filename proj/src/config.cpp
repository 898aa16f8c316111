#include "streamrank/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace streamrank::cli {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

const std::string& ConfigMap::raw(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw std::runtime_error("unknown config key: " + key);
    return it->second;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    auto it = values.find(key);
    if (it == values.end()) throw std::runtime_error("unknown config key: " + key);
    it->second = value;
}

int ConfigMap::get_int(const std::string& key) const {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(raw(key), &pos);
        if (pos != raw(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::logic_error&) {
        throw std::runtime_error("config key " + key + " is not an integer: " + raw(key));
    }
}

double ConfigMap::get_double(const std::string& key) const {
    try {
        std::size_t pos = 0;
        const double v = std::stod(raw(key), &pos);
        if (pos != raw(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::logic_error&) {
        throw std::runtime_error("config key " + key + " is not a number: " + raw(key));
    }
}

bool ConfigMap::get_bool(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config key " + key + " is not a bool: " + v);
}

std::uint64_t ConfigMap::get_u64(const std::string& key) const {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(raw(key), &pos);
        if (pos != raw(key).size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::logic_error&) {
        throw std::runtime_error("config key " + key + " is not an unsigned integer: " + raw(key));
    }
}

ConfigMap default_config() {
    const SynthConfig sc;
    const nn::ModelConfig mc = nn::ModelConfig::desk();
    const exp::ExperimentConfig ec;

    ConfigMap cfg;
    auto& v = cfg.values;

    v["synth.n_users"] = std::to_string(sc.n_users);
    v["synth.videos_per_user_min"] = std::to_string(sc.videos_per_user_min);
    v["synth.videos_per_user_max"] = std::to_string(sc.videos_per_user_max);
    v["synth.frac_a"] = fmt(sc.rank_fractions[0]);
    v["synth.frac_b"] = fmt(sc.rank_fractions[1]);
    v["synth.frac_c"] = fmt(sc.rank_fractions[2]);
    v["synth.frac_d"] = fmt(sc.rank_fractions[3]);
    v["synth.frame_h"] = std::to_string(sc.frame_h);
    v["synth.frame_w"] = std::to_string(sc.frame_w);
    v["synth.n_frames"] = std::to_string(sc.n_frames);
    v["synth.fps"] = fmt(sc.fps);
    v["synth.audio_s"] = fmt(sc.audio_s);
    v["synth.audio_rate"] = fmt(sc.audio_rate);
    v["synth.watermark_strength"] = fmt(sc.watermark_strength);
    v["synth.rank_signal_strength"] = fmt(sc.rank_signal_strength);
    v["synth.noise_std"] = fmt(sc.noise_std);
    v["synth.imbalanced_chat"] = sc.imbalanced_chat ? "true" : "false";
    v["synth.seed"] = std::to_string(sc.seed);

    v["split.seed"] = std::to_string(ec.split_seed);
    v["split.train"] = fmt(ec.ratios.train);
    v["split.val"] = fmt(ec.ratios.val);
    v["split.test"] = fmt(ec.ratios.test);

    v["model.video_t"] = std::to_string(mc.video_t);
    v["model.video_h"] = std::to_string(mc.video_h);
    v["model.video_w"] = std::to_string(mc.video_w);
    v["model.video_c"] = std::to_string(mc.video_c);
    v["model.audio_coeffs"] = std::to_string(mc.audio_coeffs);
    v["model.hidden_dim"] = std::to_string(mc.hidden_dim);
    v["model.seq_len"] = std::to_string(mc.seq_len);
    v["model.recurrent_layers"] = std::to_string(mc.recurrent_layers);
    v["model.video_channels"] = std::to_string(mc.video_channels);
    v["model.video_kt"] = std::to_string(mc.video_kt);
    v["model.video_k"] = std::to_string(mc.video_k);
    v["model.video_stride"] = std::to_string(mc.video_stride);
    v["model.pool_zones"] = std::to_string(mc.pool_zones);
    v["model.audio_channels"] = std::to_string(mc.audio_channels);
    v["model.audio_kernel"] = std::to_string(mc.audio_kernel);
    v["model.audio_stride"] = std::to_string(mc.audio_stride);
    v["model.audio_res_kernel"] = std::to_string(mc.audio_res_kernel);
    v["model.prior_dim"] = std::to_string(mc.prior_dim);
    v["model.chat_embed_dim"] = std::to_string(mc.chat_embed_dim);
    v["model.chat_layers"] = std::to_string(mc.chat_layers);
    v["model.chat_max_tokens"] = std::to_string(mc.chat_max_tokens);

    v["train.learning_rate"] = fmt(ec.train.learning_rate);
    v["train.batch_size"] = std::to_string(ec.train.batch_size);
    v["train.epochs"] = std::to_string(ec.train.epochs);
    v["train.patience"] = std::to_string(ec.train.patience);
    v["train.class_weighting"] = train::to_string(ec.train.class_weighting);
    v["train.seed"] = std::to_string(ec.train.seed);
    v["train.init_seed"] = std::to_string(ec.train.init_seed);
    v["train.kl_scale"] = fmt(ec.train.kl.scale);
    v["train.kl_temperature"] = fmt(ec.train.kl.temperature);
    v["train.finetune_chat"] = ec.train.finetune_chat ? "true" : "false";

    v["ranking.margin"] = fmt(ec.ranking.margin);
    v["ranking.pair_subsample"] = fmt(ec.ranking.pair_subsample);
    v["ranking.seed"] = std::to_string(ec.ranking.seed);
    v["ranking.epochs"] = std::to_string(ec.ranking_epochs);

    v["chat.epochs"] = std::to_string(ec.chat_epochs);

    return cfg;
}

void merge_file(ConfigMap& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty section name");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
        }
        if (section.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": key outside any [section]");
        }
        try {
            cfg.set(section + "." + key, value);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& sets) {
    for (const auto& entry : sets) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) throw std::runtime_error("override must be key=value: " + entry);
        cfg.set(trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
    }
}

SynthConfig synth_from_config(const ConfigMap& cfg) {
    SynthConfig sc;
    sc.n_users = cfg.get_int("synth.n_users");
    sc.videos_per_user_min = cfg.get_int("synth.videos_per_user_min");
    sc.videos_per_user_max = cfg.get_int("synth.videos_per_user_max");
    sc.rank_fractions = {cfg.get_double("synth.frac_a"), cfg.get_double("synth.frac_b"),
                         cfg.get_double("synth.frac_c"), cfg.get_double("synth.frac_d")};
    sc.frame_h = cfg.get_int("synth.frame_h");
    sc.frame_w = cfg.get_int("synth.frame_w");
    sc.n_frames = cfg.get_int("synth.n_frames");
    sc.fps = cfg.get_double("synth.fps");
    sc.audio_s = cfg.get_double("synth.audio_s");
    sc.audio_rate = cfg.get_double("synth.audio_rate");
    sc.watermark_strength = cfg.get_double("synth.watermark_strength");
    sc.rank_signal_strength = cfg.get_double("synth.rank_signal_strength");
    sc.noise_std = cfg.get_double("synth.noise_std");
    sc.imbalanced_chat = cfg.get_bool("synth.imbalanced_chat");
    sc.seed = cfg.get_u64("synth.seed");
    return sc;
}

SplitRatios ratios_from_config(const ConfigMap& cfg) {
    SplitRatios r;
    r.train = cfg.get_double("split.train");
    r.val = cfg.get_double("split.val");
    r.test = cfg.get_double("split.test");
    return r;
}

nn::ModelConfig model_from_config(const ConfigMap& cfg) {
    nn::ModelConfig mc;
    mc.video_t = cfg.get_int("model.video_t");
    mc.video_h = cfg.get_int("model.video_h");
    mc.video_w = cfg.get_int("model.video_w");
    mc.video_c = cfg.get_int("model.video_c");
    mc.audio_coeffs = cfg.get_int("model.audio_coeffs");
    mc.hidden_dim = cfg.get_int("model.hidden_dim");
    mc.seq_len = cfg.get_int("model.seq_len");
    mc.recurrent_layers = cfg.get_int("model.recurrent_layers");
    mc.video_channels = cfg.get_int("model.video_channels");
    mc.video_kt = cfg.get_int("model.video_kt");
    mc.video_k = cfg.get_int("model.video_k");
    mc.video_stride = cfg.get_int("model.video_stride");
    mc.pool_zones = cfg.get_int("model.pool_zones");
    mc.audio_channels = cfg.get_int("model.audio_channels");
    mc.audio_kernel = cfg.get_int("model.audio_kernel");
    mc.audio_stride = cfg.get_int("model.audio_stride");
    mc.audio_res_kernel = cfg.get_int("model.audio_res_kernel");
    mc.prior_dim = cfg.get_int("model.prior_dim");
    mc.chat_embed_dim = cfg.get_int("model.chat_embed_dim");
    mc.chat_layers = cfg.get_int("model.chat_layers");
    mc.chat_max_tokens = cfg.get_int("model.chat_max_tokens");
    return mc;
}

exp::ExperimentConfig experiment_from_config(const ConfigMap& cfg) {
    exp::ExperimentConfig ec;
    ec.split_seed = cfg.get_u64("split.seed");
    ec.ratios = ratios_from_config(cfg);
    ec.model = model_from_config(cfg);
    ec.train.learning_rate = cfg.get_double("train.learning_rate");
    ec.train.batch_size = cfg.get_int("train.batch_size");
    ec.train.epochs = cfg.get_int("train.epochs");
    ec.train.patience = cfg.get_int("train.patience");
    ec.train.class_weighting = train::parse_class_weighting(cfg.get_string("train.class_weighting"));
    ec.train.seed = cfg.get_u64("train.seed");
    ec.train.init_seed = cfg.get_u64("train.init_seed");
    ec.train.kl.scale = cfg.get_double("train.kl_scale");
    ec.train.kl.temperature = cfg.get_double("train.kl_temperature");
    ec.train.finetune_chat = cfg.get_bool("train.finetune_chat");
    ec.ranking.margin = cfg.get_double("ranking.margin");
    ec.ranking.pair_subsample = cfg.get_double("ranking.pair_subsample");
    ec.ranking.seed = cfg.get_u64("ranking.seed");
    ec.ranking_epochs = cfg.get_int("ranking.epochs");
    ec.chat_epochs = cfg.get_int("chat.epochs");
    return ec;
}

}  // namespace streamrank::cli
