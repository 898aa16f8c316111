#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "streamrank/arrayio.hpp"

#include <filesystem>
#include <fstream>

using namespace streamrank;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "streamrank_arrayio_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("video round-trip preserves bytes and metadata") {
    const fs::path dir = temp_dir();
    VideoClip clip = VideoClip::zeros(4, 6, 8, 3, 2.5);
    for (std::size_t i = 0; i < clip.data.size(); ++i) clip.data[i] = static_cast<std::uint8_t>(i * 7);

    save_video(clip, dir / "clip.bin");
    const VideoClip out = load_video(dir / "clip.bin");
    CHECK(out.t == 4);
    CHECK(out.h == 6);
    CHECK(out.w == 8);
    CHECK(out.c == 3);
    CHECK(out.fps == 2.5);
    CHECK(out.data == clip.data);
}

TEST_CASE("audio round-trip preserves samples and rate") {
    const fs::path dir = temp_dir();
    AudioTrack track;
    track.sample_rate = 16000;
    track.samples = Vec::LinSpaced(1000, -1.0, 1.0);

    save_audio(track, dir / "a.bin");
    const AudioTrack out = load_audio(dir / "a.bin");
    CHECK(out.sample_rate == 16000.0);
    REQUIRE(out.samples.size() == track.samples.size());
    // payload is stored as f32
    CHECK((out.samples - track.samples).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("mfcc round-trip preserves coefficients and hop") {
    const fs::path dir = temp_dir();
    MfccSequence seq;
    seq.frame_hop_s = 0.010;
    seq.coeffs = Mat::Random(17, 20);

    save_mfcc(seq, dir / "m.bin");
    const MfccSequence out = load_mfcc(dir / "m.bin");
    CHECK(out.frame_hop_s == 0.010);
    CHECK(out.coeffs.isApprox(seq.coeffs));
}

TEST_CASE("loading a missing file throws") {
    const fs::path dir = temp_dir();
    CHECK_THROWS(load_video(dir / "absent.bin"));
    CHECK_THROWS(load_audio(dir / "absent.bin"));
}

TEST_CASE("cache keys separate ids and op chains") {
    const std::string a = cache_key("s1", "fps1.w32");
    CHECK(a == cache_key("s1", "fps1.w32"));
    CHECK(a != cache_key("s2", "fps1.w32"));
    CHECK(a != cache_key("s1", "fps1.w64"));
    CHECK(a.size() == 16);
}

TEST_CASE("file_hash is stable and content-sensitive") {
    const fs::path dir = temp_dir();
    std::ofstream(dir / "x.txt") << "hello";
    std::ofstream(dir / "y.txt") << "hello";
    std::ofstream(dir / "z.txt") << "hellp";
    CHECK(file_hash(dir / "x.txt") == file_hash(dir / "y.txt"));
    CHECK(file_hash(dir / "x.txt") != file_hash(dir / "z.txt"));
}
