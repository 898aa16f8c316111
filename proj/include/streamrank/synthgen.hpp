#pragma once

#include "streamrank/manifest.hpp"
#include "streamrank/media.hpp"

#include <array>
#include <cstdint>
#include <filesystem>

namespace streamrank {

// Desk-scale synthetic corpus with controllable planted signals:
//  - a per-user watermark texture confined to the frame's outer edge band
//    (exactly the pixels removed by the 0.8 center mask),
//  - rank-correlated content confined to the health and guns view rects,
//  - rank-correlated audio burst rates plus a per-user pitch,
//  - rank-correlated chat token frequencies.
struct SynthConfig {
    int n_users = 60;
    int videos_per_user_min = 3;
    int videos_per_user_max = 8;
    std::array<double, kNumClasses> rank_fractions{0.56, 0.19, 0.13, 0.12};
    int frame_h = 32;
    int frame_w = 32;
    int n_frames = 16;
    double fps = 1.0;
    double audio_s = 10.0;
    double audio_rate = 16000.0;
    double watermark_strength = 1.0;     // in [0, 1]
    double rank_signal_strength = 1.0;   // in [0, 1]
    double noise_std = 0.05;
    bool imbalanced_chat = true;
    std::uint64_t seed = 0;

    void validate() const;
};

VideoClip render_video(const std::string& user_id, RankSection rank, const SynthConfig& config,
                       std::uint64_t clip_salt = 0);
AudioTrack render_audio(const std::string& user_id, RankSection rank, const SynthConfig& config,
                        std::uint64_t clip_salt = 0);
ChatLog render_chat(const std::string& user_id, RankSection rank, const SynthConfig& config);

// The chat token whose frequency is planted to rise with skill.
const std::string& skill_token();

// Renders every payload under out_dir (payloads/, manifest.jsonl,
// chats.jsonl) and returns the loaded manifest. Fully deterministic in
// config.seed.
Manifest generate_corpus(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace streamrank
