#include "streamrank/splitter.hpp"

#include "streamrank/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace streamrank {

using nlohmann::json;
using nlohmann::ordered_json;

Subset subset_from_string(const std::string& s) {
    if (s == "TRAIN") return Subset::TRAIN;
    if (s == "VAL") return Subset::VAL;
    if (s == "TEST") return Subset::TEST;
    throw std::invalid_argument("unknown subset: " + s);
}

SplitMode split_mode_from_string(const std::string& s) {
    if (s == "VIDEO_BASED" || s == "video") return SplitMode::VIDEO_BASED;
    if (s == "USER_BASED" || s == "user") return SplitMode::USER_BASED;
    throw std::invalid_argument("unknown split mode: " + s);
}

std::vector<std::string> SplitAssignment::ids(Subset s) const {
    std::vector<std::string> out;
    for (const auto& [id, sub] : assignment) {
        if (sub == s) out.push_back(id);
    }
    return out;
}

std::map<std::string, Subset> stratified_split(const std::vector<std::pair<std::string, int>>& items,
                                               const SplitRatios& ratios, std::uint64_t seed,
                                               std::vector<std::string>* warnings) {
    const double ratio_sum = ratios.train + ratios.val + ratios.test;
    if (std::abs(ratio_sum - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
    if (items.empty()) throw std::invalid_argument("cannot split an empty item set");

    std::map<int, std::vector<std::string>> by_class;
    for (const auto& [id, cls] : items) by_class[cls].push_back(id);

    std::map<std::string, Subset> out;
    Rng rng(seed);
    for (auto& [cls, ids] : by_class) {
        // Canonical order first so the result is independent of input order.
        std::sort(ids.begin(), ids.end());
        rng.shuffle(ids);

        const int n = static_cast<int>(ids.size());
        if (n < 3) {
            if (warnings) {
                warnings->push_back("class " + std::to_string(cls) + " has " + std::to_string(n) +
                                    " item(s); placed wholly in TRAIN");
            }
            for (const auto& id : ids) out[id] = Subset::TRAIN;
            continue;
        }

        // Largest-remainder quotas; remainder ties go to the earlier subset.
        std::array<int, 3> counts{};
        std::array<double, 3> remainders{};
        int assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double quota = ratios.at(s) * n;
            counts[s] = static_cast<int>(std::floor(quota));
            remainders[s] = quota - counts[s];
            assigned += counts[s];
        }
        std::array<int, 3> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainders[a] > remainders[b]; });
        for (int k = 0; k < n - assigned; ++k) counts[order[k % 3]]++;

        int pos = 0;
        for (int s = 0; s < 3; ++s) {
            for (int k = 0; k < counts[s]; ++k) out[ids[pos++]] = static_cast<Subset>(s);
        }
    }
    return out;
}

SplitAssignment stratified_video_split(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed) {
    std::vector<std::pair<std::string, int>> items;
    items.reserve(manifest.records.size());
    for (const auto& r : manifest.records) items.emplace_back(r.sample_id, class_index(r.rank));

    SplitAssignment a;
    a.mode = SplitMode::VIDEO_BASED;
    a.ratios = ratios;
    a.seed = seed;
    a.assignment = stratified_split(items, ratios, seed, &a.warnings);
    return a;
}

SplitAssignment stratified_user_split(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed) {
    // Rank is a user attribute in this dataset; refuse manifests that violate it.
    std::map<std::string, int> user_rank;
    for (const auto& r : manifest.records) {
        auto [it, inserted] = user_rank.emplace(r.user_id, class_index(r.rank));
        if (!inserted && it->second != class_index(r.rank)) {
            throw std::runtime_error("user " + r.user_id + " has videos with differing ranks; user split undefined");
        }
    }

    std::vector<std::pair<std::string, int>> users(user_rank.begin(), user_rank.end());
    SplitAssignment a;
    a.mode = SplitMode::USER_BASED;
    a.ratios = ratios;
    a.seed = seed;
    const auto user_subset = stratified_split(users, ratios, seed, &a.warnings);
    for (const auto& r : manifest.records) a.assignment[r.sample_id] = user_subset.at(r.user_id);
    return a;
}

SplitReport verify_split(const SplitAssignment& assignment, const Manifest& manifest, double tolerance) {
    std::map<std::string, const SampleRecord*> by_id;
    for (const auto& r : manifest.records) by_id[r.sample_id] = &r;

    for (const auto& [id, _] : assignment.assignment) {
        if (!by_id.count(id)) throw std::runtime_error("split references unknown sample_id: " + id);
    }
    for (const auto& r : manifest.records) {
        if (!assignment.assignment.count(r.sample_id)) {
            throw std::runtime_error("split does not cover sample_id: " + r.sample_id);
        }
    }

    SplitReport rep;
    std::array<std::array<int, kNumClasses>, 3> counts{};
    std::array<std::set<std::string>, 3> subset_users;
    for (const auto& r : manifest.records) {
        const int s = static_cast<int>(assignment.assignment.at(r.sample_id));
        counts[s][class_index(r.rank)]++;
        rep.subset_sizes[s]++;
        subset_users[s].insert(r.user_id);
    }

    const RankStats global = rank_stats(manifest);
    for (int s = 0; s < 3; ++s) {
        for (int c = 0; c < kNumClasses; ++c) {
            if (rep.subset_sizes[s] > 0) {
                rep.class_fractions[s][c] = static_cast<double>(counts[s][c]) / rep.subset_sizes[s];
            }
            const double dev = std::abs(rep.class_fractions[s][c] - global.fractions[c]);
            rep.max_fraction_deviation = std::max(rep.max_fraction_deviation, dev);
        }
    }

    auto overlap = [&](int a, int b) {
        int n = 0;
        for (const auto& u : subset_users[a]) n += subset_users[b].count(u) ? 1 : 0;
        return n;
    };
    rep.user_overlap = {overlap(0, 1), overlap(0, 2), overlap(1, 2)};

    rep.pass = rep.max_fraction_deviation <= tolerance;
    if (assignment.mode == SplitMode::USER_BASED) {
        rep.pass = rep.pass && rep.user_overlap[0] == 0 && rep.user_overlap[1] == 0 && rep.user_overlap[2] == 0;
    }
    return rep;
}

void save_split(const SplitAssignment& assignment, const std::filesystem::path& path) {
    ordered_json j;
    j["mode"] = to_string(assignment.mode);
    j["seed"] = assignment.seed;
    j["ratios"] = {assignment.ratios.train, assignment.ratios.val, assignment.ratios.test};
    ordered_json amap = ordered_json::object();
    for (const auto& [id, sub] : assignment.assignment) amap[id] = to_string(sub);
    j["assignment"] = std::move(amap);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write split: " + path.string());
    out << j.dump(2) << "\n";
}

SplitAssignment load_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read split: " + path.string());
    json j;
    in >> j;
    SplitAssignment a;
    a.mode = split_mode_from_string(j.at("mode").get<std::string>());
    a.seed = j.at("seed").get<std::uint64_t>();
    a.ratios.train = j.at("ratios").at(0);
    a.ratios.val = j.at("ratios").at(1);
    a.ratios.test = j.at("ratios").at(2);
    for (const auto& [id, sub] : j.at("assignment").items()) {
        a.assignment[id] = subset_from_string(sub.get<std::string>());
    }
    return a;
}

}  // namespace streamrank
