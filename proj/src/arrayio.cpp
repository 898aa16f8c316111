#include "streamrank/arrayio.hpp"

#include "streamrank/rng.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace streamrank {

using nlohmann::ordered_json;

namespace {

void write_bytes(const std::filesystem::path& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<char> buf(static_cast<std::size_t>(size));
    in.read(buf.data(), size);
    return buf;
}

std::filesystem::path sidecar(const std::filesystem::path& bin_path) {
    auto p = bin_path;
    p += ".json";
    return p;
}

void write_descriptor(const std::filesystem::path& bin_path, ordered_json desc) {
    std::ofstream out(sidecar(bin_path));
    if (!out) throw std::runtime_error("cannot write " + sidecar(bin_path).string());
    out << desc.dump(2) << "\n";
}

ordered_json read_descriptor(const std::filesystem::path& bin_path) {
    std::ifstream in(sidecar(bin_path));
    if (!in) throw std::runtime_error("missing descriptor " + sidecar(bin_path).string());
    ordered_json j;
    in >> j;
    return j;
}

}  // namespace

void save_video(const VideoClip& clip, const std::filesystem::path& bin_path) {
    write_bytes(bin_path, clip.data.data(), clip.data.size());
    ordered_json desc;
    desc["dtype"] = "u8";
    desc["shape"] = {clip.t, clip.c, clip.h, clip.w};
    desc["layout"] = "tchw";
    desc["fps"] = clip.fps;
    write_descriptor(bin_path, desc);
}

VideoClip load_video(const std::filesystem::path& bin_path) {
    const auto desc = read_descriptor(bin_path);
    if (desc.at("dtype") != "u8") throw std::runtime_error("video payload must be u8: " + bin_path.string());
    const auto shape = desc.at("shape");
    VideoClip clip;
    clip.t = shape.at(0);
    clip.c = shape.at(1);
    clip.h = shape.at(2);
    clip.w = shape.at(3);
    clip.fps = desc.at("fps");
    const auto bytes = read_bytes(bin_path);
    const std::size_t expected = static_cast<std::size_t>(clip.t) * clip.c * clip.h * clip.w;
    if (bytes.size() != expected) {
        throw std::runtime_error("video payload size mismatch: " + bin_path.string());
    }
    clip.data.resize(expected);
    std::memcpy(clip.data.data(), bytes.data(), expected);
    return clip;
}

void save_audio(const AudioTrack& track, const std::filesystem::path& bin_path) {
    std::vector<float> f32(static_cast<std::size_t>(track.samples.size()));
    for (Eigen::Index i = 0; i < track.samples.size(); ++i) f32[static_cast<std::size_t>(i)] = static_cast<float>(track.samples[i]);
    write_bytes(bin_path, f32.data(), f32.size() * sizeof(float));
    ordered_json desc;
    desc["dtype"] = "f32";
    desc["shape"] = {track.samples.size()};
    desc["sample_rate"] = track.sample_rate;
    write_descriptor(bin_path, desc);
}

AudioTrack load_audio(const std::filesystem::path& bin_path) {
    const auto desc = read_descriptor(bin_path);
    if (desc.at("dtype") != "f32") throw std::runtime_error("audio payload must be f32: " + bin_path.string());
    const auto bytes = read_bytes(bin_path);
    AudioTrack track;
    track.sample_rate = desc.at("sample_rate");
    const auto n = bytes.size() / sizeof(float);
    track.samples.resize(static_cast<Eigen::Index>(n));
    const float* f32 = reinterpret_cast<const float*>(bytes.data());
    for (std::size_t i = 0; i < n; ++i) track.samples[static_cast<Eigen::Index>(i)] = f32[i];
    return track;
}

void save_mfcc(const MfccSequence& seq, const std::filesystem::path& bin_path) {
    write_bytes(bin_path, seq.coeffs.data(), static_cast<std::size_t>(seq.coeffs.size()) * sizeof(double));
    ordered_json desc;
    desc["dtype"] = "f64";
    desc["shape"] = {seq.coeffs.rows(), seq.coeffs.cols()};
    desc["frame_hop_s"] = seq.frame_hop_s;
    write_descriptor(bin_path, desc);
}

MfccSequence load_mfcc(const std::filesystem::path& bin_path) {
    const auto desc = read_descriptor(bin_path);
    if (desc.at("dtype") != "f64") throw std::runtime_error("mfcc payload must be f64: " + bin_path.string());
    const auto shape = desc.at("shape");
    MfccSequence seq;
    seq.frame_hop_s = desc.at("frame_hop_s");
    seq.coeffs.resize(shape.at(0).get<Eigen::Index>(), shape.at(1).get<Eigen::Index>());
    const auto bytes = read_bytes(bin_path);
    if (bytes.size() != static_cast<std::size_t>(seq.coeffs.size()) * sizeof(double)) {
        throw std::runtime_error("mfcc payload size mismatch: " + bin_path.string());
    }
    std::memcpy(seq.coeffs.data(), bytes.data(), bytes.size());
    return seq;
}

std::string cache_key(const std::string& sample_id, const std::string& op_chain) {
    const std::uint64_t h = fnv1a(op_chain, fnv1a(sample_id));
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string file_hash(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    const std::uint64_t h = fnv1a(std::string_view(bytes.data(), bytes.size()));
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace streamrank
