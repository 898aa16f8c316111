#pragma once

#include "streamrank/types.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace streamrank {

struct SampleRecord {
    std::string sample_id;
    std::string user_id;
    GameType game_type = GameType::CSGO;
    RankSection rank = RankSection::A;
    std::string video_path;  // relative to the manifest directory
    std::string audio_path;
    double duration_s = 0.0;
    double native_fps = 0.0;
};

struct ChatLog {
    std::string user_id;
    std::vector<std::string> messages;  // source order preserved
};

struct Manifest {
    std::vector<SampleRecord> records;
    std::map<std::string, ChatLog> chats;    // user_id -> aggregated channel chat
    std::set<std::string> orphan_chat_users; // chats without any video record
    std::filesystem::path base_dir;          // directory payload paths are relative to

    std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
    std::set<std::string> user_ids() const;
};

struct RankStats {
    std::array<int, kNumClasses> counts{};
    std::array<double, kNumClasses> fractions{};
    int total = 0;
};

// Reads a UTF-8 JSON-lines manifest. Throws with the offending line number on
// parse errors and with the offending id on duplicates.
Manifest load_manifest(const std::filesystem::path& path);

// Reads a JSON-lines chat file ({user_id, messages}) into manifest.chats.
// Users with chats but no videos are kept and flagged as orphans.
void attach_chats(Manifest& manifest, const std::filesystem::path& path);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
void save_chats(const Manifest& manifest, const std::filesystem::path& path);

// Keeps only records of the given game type; chats are restricted to users
// that still own at least one record.
Manifest filter_game(const Manifest& manifest, GameType game);

RankStats rank_stats(const Manifest& manifest);

}  // namespace streamrank
