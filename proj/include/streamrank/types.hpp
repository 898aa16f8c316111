#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace streamrank {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatrixX<double>;
using Vec = VectorX<double>;

inline constexpr int kNumClasses = 4;

// Skill tier, A (best) through D, stored as class index 0..3.
enum class RankSection : int { A = 0, B = 1, C = 2, D = 3 };

enum class GameType : int { CSGO = 0, NON_GAME = 1, FPS_OTHER = 2, OTHER_GAME = 3 };

inline const char* to_string(RankSection r) {
    switch (r) {
        case RankSection::A: return "A";
        case RankSection::B: return "B";
        case RankSection::C: return "C";
        case RankSection::D: return "D";
    }
    throw std::invalid_argument("bad RankSection");
}

inline RankSection rank_from_string(const std::string& s) {
    if (s == "A") return RankSection::A;
    if (s == "B") return RankSection::B;
    if (s == "C") return RankSection::C;
    if (s == "D") return RankSection::D;
    throw std::invalid_argument("unknown rank section: " + s);
}

inline int class_index(RankSection r) { return static_cast<int>(r); }

inline RankSection rank_from_index(int c) {
    if (c < 0 || c >= kNumClasses) throw std::invalid_argument("class index out of range: " + std::to_string(c));
    return static_cast<RankSection>(c);
}

inline const char* to_string(GameType g) {
    switch (g) {
        case GameType::CSGO: return "CSGO";
        case GameType::NON_GAME: return "NON_GAME";
        case GameType::FPS_OTHER: return "FPS_OTHER";
        case GameType::OTHER_GAME: return "OTHER_GAME";
    }
    throw std::invalid_argument("bad GameType");
}

inline GameType game_from_string(const std::string& s) {
    if (s == "CSGO") return GameType::CSGO;
    if (s == "NON_GAME") return GameType::NON_GAME;
    if (s == "FPS_OTHER") return GameType::FPS_OTHER;
    if (s == "OTHER_GAME") return GameType::OTHER_GAME;
    throw std::invalid_argument("unknown game type: " + s);
}

}  // namespace streamrank
