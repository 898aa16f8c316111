#include "streamrank/manifest.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace streamrank {

using nlohmann::json;

std::set<std::string> Manifest::user_ids() const {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.user_id);
    return ids;
}

namespace {

SampleRecord record_from_json(const json& j) {
    SampleRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.user_id = j.at("user_id").get<std::string>();
    r.game_type = game_from_string(j.at("game_type").get<std::string>());
    r.rank = rank_from_string(j.at("rank").get<std::string>());
    r.video_path = j.at("video_path").get<std::string>();
    r.audio_path = j.at("audio_path").get<std::string>();
    r.duration_s = j.at("duration_s").get<double>();
    r.native_fps = j.at("native_fps").get<double>();
    if (r.duration_s <= 0) throw std::runtime_error("duration_s must be > 0");
    if (r.native_fps <= 0) throw std::runtime_error("native_fps must be > 0");
    return r;
}

json record_to_json(const SampleRecord& r) {
    json j;
    j["sample_id"] = r.sample_id;
    j["user_id"] = r.user_id;
    j["game_type"] = to_string(r.game_type);
    j["rank"] = to_string(r.rank);
    j["video_path"] = r.video_path;
    j["audio_path"] = r.audio_path;
    j["duration_s"] = r.duration_s;
    j["native_fps"] = r.native_fps;
    return j;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path.string());

    Manifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        SampleRecord rec;
        try {
            rec = record_from_json(json::parse(line));
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest parse error at line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!seen.insert(rec.sample_id).second) {
            throw std::runtime_error("duplicate sample_id in manifest: " + rec.sample_id);
        }
        m.records.push_back(std::move(rec));
    }
    return m;
}

void attach_chats(Manifest& manifest, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open chat file: " + path.string());

    const auto users = manifest.user_ids();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            ChatLog log;
            log.user_id = j.at("user_id").get<std::string>();
            for (const auto& msg : j.at("messages")) log.messages.push_back(msg.get<std::string>());
            if (!users.count(log.user_id)) manifest.orphan_chat_users.insert(log.user_id);
            manifest.chats[log.user_id] = std::move(log);
        } catch (const std::exception& e) {
            throw std::runtime_error("chat parse error at line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
    for (const auto& r : manifest.records) out << record_to_json(r).dump() << "\n";
}

void save_chats(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write chat file: " + path.string());
    for (const auto& [user, log] : manifest.chats) {
        json j;
        j["user_id"] = user;
        j["messages"] = log.messages;
        out << j.dump() << "\n";
    }
}

Manifest filter_game(const Manifest& manifest, GameType game) {
    Manifest out;
    out.base_dir = manifest.base_dir;
    for (const auto& r : manifest.records) {
        if (r.game_type == game) out.records.push_back(r);
    }
    const auto survivors = out.user_ids();
    for (const auto& [user, log] : manifest.chats) {
        if (survivors.count(user)) out.chats.emplace(user, log);
    }
    return out;
}

RankStats rank_stats(const Manifest& manifest) {
    RankStats s;
    for (const auto& r : manifest.records) s.counts[class_index(r.rank)]++;
    s.total = static_cast<int>(manifest.records.size());
    if (s.total > 0) {
        for (int c = 0; c < kNumClasses; ++c) s.fractions[c] = static_cast<double>(s.counts[c]) / s.total;
    }
    return s;
}

}  // namespace streamrank
