#pragma once

#include "streamrank/media.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace streamrank {

// Payloads and cache entries are flat little-endian binary arrays next to a
// ".json" sidecar describing dtype, shape, and timing metadata.

void save_video(const VideoClip& clip, const std::filesystem::path& bin_path);
VideoClip load_video(const std::filesystem::path& bin_path);

void save_audio(const AudioTrack& track, const std::filesystem::path& bin_path);
AudioTrack load_audio(const std::filesystem::path& bin_path);

void save_mfcc(const MfccSequence& seq, const std::filesystem::path& bin_path);
MfccSequence load_mfcc(const std::filesystem::path& bin_path);

// Cache key for a preprocessed artifact: hex FNV-1a of the sample id, the
// operation chain, and its parameters.
std::string cache_key(const std::string& sample_id, const std::string& op_chain);

// 64-bit FNV-1a of a file's bytes, as 16 hex chars. Used for determinism checks.
std::string file_hash(const std::filesystem::path& path);

}  // namespace streamrank
