#pragma once

#include "streamrank/manifest.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace streamrank {

enum class Subset : int { TRAIN = 0, VAL = 1, TEST = 2 };

inline const char* to_string(Subset s) {
    switch (s) {
        case Subset::TRAIN: return "TRAIN";
        case Subset::VAL: return "VAL";
        case Subset::TEST: return "TEST";
    }
    throw std::invalid_argument("bad Subset");
}

Subset subset_from_string(const std::string& s);

enum class SplitMode : int { VIDEO_BASED = 0, USER_BASED = 1 };

inline const char* to_string(SplitMode m) { return m == SplitMode::VIDEO_BASED ? "VIDEO_BASED" : "USER_BASED"; }
SplitMode split_mode_from_string(const std::string& s);

struct SplitRatios {
    double train = 0.8, val = 0.1, test = 0.1;
    double at(int i) const { return i == 0 ? train : (i == 1 ? val : test); }
};

struct SplitAssignment {
    SplitMode mode = SplitMode::VIDEO_BASED;
    std::map<std::string, Subset> assignment;  // sample_id -> subset
    SplitRatios ratios;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;

    std::vector<std::string> ids(Subset s) const;
};

struct SplitReport {
    // [subset][class] fraction of the subset's samples in that class.
    std::array<std::array<double, kNumClasses>, 3> class_fractions{};
    std::array<int, 3> subset_sizes{};
    double max_fraction_deviation = 0.0;
    // Pairwise user overlaps (train/val, train/test, val/test); only
    // meaningful for USER_BASED assignments.
    std::array<int, 3> user_overlap{};
    bool pass = false;
};

// Generic per-class stratified partition of (id, class) items. Items are
// canonically sorted by id, shuffled per class with the seeded generator, and
// cut by largest-remainder quotas. Classes with fewer than 3 items go wholly
// to TRAIN with a warning. Exposed for reuse (message-level chat splits).
std::map<std::string, Subset> stratified_split(const std::vector<std::pair<std::string, int>>& items,
                                               const SplitRatios& ratios, std::uint64_t seed,
                                               std::vector<std::string>* warnings = nullptr);

SplitAssignment stratified_video_split(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed);

// Stratifies users by rank and carries each user's videos along. Requires
// every user's videos to share one rank.
SplitAssignment stratified_user_split(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed);

// Checks coverage, per-class stratification (tolerance +-0.03 by default),
// and user disjointness for USER_BASED splits.
SplitReport verify_split(const SplitAssignment& assignment, const Manifest& manifest, double tolerance = 0.03);

void save_split(const SplitAssignment& assignment, const std::filesystem::path& path);
SplitAssignment load_split(const std::filesystem::path& path);

}  // namespace streamrank
