#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "streamrank/synthgen.hpp"
#include "streamrank/trainer.hpp"

#include "corpus_fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

using namespace streamrank;
namespace fs = std::filesystem;

namespace {

nn::ModelConfig tiny_model() {
    nn::ModelConfig cfg;
    cfg.video_t = 5;
    cfg.video_h = 16;
    cfg.video_w = 16;
    cfg.video_c = 1;
    cfg.audio_coeffs = 6;
    cfg.hidden_dim = 8;
    cfg.seq_len = 6;
    cfg.video_channels = 4;
    cfg.audio_channels = 5;
    cfg.audio_stride = 2;
    cfg.prior_dim = 4;
    cfg.chat_embed_dim = 4;
    cfg.chat_layers = 1;
    cfg.chat_max_tokens = 16;
    return cfg;
}

struct Fixture {
    fs::path dir;
    Manifest manifest;
    nn::ModelConfig cfg;
    train::Dataset data;
    SplitAssignment split;
};

const Fixture& fx() {
    static const Fixture fixture = [] {
        Fixture f;
        f.dir = fs::temp_directory_path() / "streamrank_trainer_corpus";
        fs::remove_all(f.dir);
        SynthConfig sc;
        sc.n_users = 24;
        sc.videos_per_user_min = 1;
        sc.videos_per_user_max = 1;
        sc.frame_h = 16;
        sc.frame_w = 16;
        sc.n_frames = 5;
        sc.audio_s = 0.5;
        sc.seed = 3;
        f.manifest = generate_corpus(sc, f.dir);
        f.cfg = tiny_model();
        auto opts = train::options_for_variant(train::parse_variant("LR"), f.cfg);
        opts.load_chat = true;
        f.data = train::build_dataset(f.manifest, opts);
        f.split = stratified_video_split(f.manifest, {}, 5);
        return f;
    }();
    return fixture;
}

train::TrainConfig quick_train(int epochs) {
    train::TrainConfig tcfg;
    tcfg.learning_rate = 3e-3;
    tcfg.batch_size = 4;
    tcfg.epochs = epochs;
    tcfg.patience = 10;
    tcfg.seed = 11;
    tcfg.init_seed = 13;
    return tcfg;
}

}  // namespace

TEST_CASE("adam: a zero gradient leaves the parameter unchanged") {
    nn::ParamStore params;
    params.create("w", Mat::Ones(2, 2));
    train::Adam adam;
    adam.lr = 0.1;
    adam.step(params, {{"w", Mat::Zero(2, 2)}});
    CHECK(params.at("w") == Mat::Ones(2, 2));

    adam.step(params, {});  // no gradient entry at all
    CHECK(params.at("w") == Mat::Ones(2, 2));
}

TEST_CASE("adam: bias-corrected first and second steps match the closed form") {
    nn::ParamStore params;
    Mat w(1, 1);
    w << 1.0;
    params.create("w", w);
    Mat g(1, 1);
    g << 0.5;

    train::Adam adam;
    adam.lr = 0.1;
    adam.step(params, {{"w", g}});
    // bias correction makes the first step lr * g / (|g| + eps)
    const double after1 = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(params.at("w")(0, 0) == doctest::Approx(after1).epsilon(1e-14));

    adam.step(params, {{"w", g}});
    const double m2 = 0.9 * 0.05 + 0.1 * 0.5;
    const double v2 = 0.999 * 0.00025 + 0.001 * 0.25;
    const double mh = m2 / (1.0 - 0.9 * 0.9);
    const double vh = v2 / (1.0 - 0.999 * 0.999);
    const double after2 = after1 - 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(params.at("w")(0, 0) == doctest::Approx(after2).epsilon(1e-14));
    CHECK(adam.t == 2);
}

TEST_CASE("adam: the trainable filter freezes matching parameters") {
    nn::ParamStore params;
    params.create("body.W", Mat::Ones(1, 1));
    params.create("chat.W", Mat::Ones(1, 1));
    Mat g(1, 1);
    g << 1.0;
    train::Adam adam;
    adam.step(params, {{"body.W", g}, {"chat.W", g}},
              [](const std::string& name) { return name.rfind("chat.", 0) != 0; });
    CHECK(params.at("body.W")(0, 0) < 1.0);
    CHECK(params.at("chat.W")(0, 0) == 1.0);
}

TEST_CASE("all 14 canonical variants parse to their kinds") {
    const auto names = train::variant_names();
    REQUIRE(names.size() == 14);
    const std::map<std::string, train::VariantKind> expect = {
        {"LR", train::VariantKind::FUSION},           {"LRV", train::VariantKind::VIDEO_ONLY},
        {"LRA", train::VariantKind::AUDIO_ONLY},      {"LR_KL", train::VariantKind::FUSION_KL},
        {"LR_rank", train::VariantKind::FUSION_RANK}, {"LR_mask", train::VariantKind::FUSION_MASK},
        {"LR_text_fc", train::VariantKind::TEXT_FC},  {"LR_text_gru", train::VariantKind::TEXT_GRU},
        {"multiview", train::VariantKind::MULTIVIEW}};
    int views_seen = 0;
    for (const auto& name : names) {
        const auto spec = train::parse_variant(name);
        CHECK(spec.name == name);
        auto it = expect.find(name);
        if (it != expect.end()) {
            CHECK(spec.kind == it->second);
        } else {
            CHECK(spec.kind == train::VariantKind::SINGLE_VIEW);
            CHECK(name == "view:" + spec.view_name);
            ++views_seen;
        }
    }
    CHECK(views_seen == 5);
    CHECK(train::parse_variant("chat_only").kind == train::VariantKind::CHAT_ONLY);

    CHECK_THROWS_WITH_AS(train::parse_variant("bogus"), doctest::Contains("unknown variant"),
                         std::runtime_error);
    CHECK_THROWS_AS(train::parse_variant("view:backpack"), std::invalid_argument);
}

TEST_CASE("variant capability flags") {
    CHECK(train::parse_variant("LR").uses_video());
    CHECK(train::parse_variant("LR").uses_audio());
    CHECK_FALSE(train::parse_variant("LR").uses_chat());
    CHECK_FALSE(train::parse_variant("LRV").uses_audio());
    CHECK_FALSE(train::parse_variant("LRA").uses_video());
    CHECK(train::parse_variant("LR_mask").uses_mask());
    CHECK(train::parse_variant("LR_text_fc").uses_chat());
    CHECK(train::parse_variant("view:minimap").uses_views());
    CHECK_FALSE(train::parse_variant("view:minimap").uses_video());
    CHECK(train::parse_variant("multiview").uses_views());
    CHECK(train::parse_variant("LR").has_fused_embedding());
    CHECK_FALSE(train::parse_variant("LRV").has_fused_embedding());
    CHECK_FALSE(train::parse_variant("multiview").has_fused_embedding());
}

TEST_CASE("class weighting parses and rejects combinations") {
    CHECK(train::parse_class_weighting("none") == train::ClassWeighting::NONE);
    CHECK(train::parse_class_weighting("weighted_ce") == train::ClassWeighting::WEIGHTED_CE);
    CHECK(train::parse_class_weighting("upsample") == train::ClassWeighting::UPSAMPLE);
    CHECK_THROWS_WITH_AS(train::parse_class_weighting("weighted_ce+upsample"),
                         doctest::Contains("alternatives"), std::runtime_error);
    CHECK(train::to_string(train::ClassWeighting::UPSAMPLE) == "upsample");
}

TEST_CASE("upsample_minority balances the reference class counts") {
    const Manifest m = testfix::imbalanced_manifest();
    std::vector<std::pair<std::string, RankSection>> pairs;
    for (const auto& r : m.records) pairs.emplace_back(r.sample_id, r.rank);

    const auto ids = train::upsample_minority(pairs, 7);
    CHECK(ids.size() == 4 * 906);

    std::map<std::string, int> freq;
    for (const auto& id : ids) freq[id]++;
    std::array<int, kNumClasses> per_class{};
    for (const auto& r : m.records) {
        auto it = freq.find(r.sample_id);
        if (it != freq.end()) per_class[static_cast<std::size_t>(class_index(r.rank))] += it->second;
        if (class_index(r.rank) == 0) CHECK(freq.at(r.sample_id) == 1);  // majority kept exactly once
    }
    CHECK(per_class == std::array<int, kNumClasses>{906, 906, 906, 906});
    // every original id survives
    for (const auto& r : m.records) CHECK(freq.count(r.sample_id) == 1);

    const auto again = train::upsample_minority(pairs, 7);
    CHECK(ids == again);
    CHECK(ids != train::upsample_minority(pairs, 8));
}

TEST_CASE("upsample_minority with a single class returns the input order") {
    const std::vector<std::pair<std::string, RankSection>> pairs = {
        {"z", RankSection::B}, {"a", RankSection::B}, {"m", RankSection::B}};
    const auto ids = train::upsample_minority(pairs, 3);
    CHECK(ids == std::vector<std::string>{"z", "a", "m"});
}

TEST_CASE("dataset loads the preprocessed shapes for the fusion variant") {
    const Fixture& f = fx();
    CHECK(f.data.samples.size() == f.manifest.records.size());
    for (const auto& s : f.data.samples) {
        CHECK(s.video.t == f.cfg.video_t);
        CHECK(s.video.h == f.cfg.video_h);
        CHECK(s.video.w == f.cfg.video_w);
        CHECK(s.mfcc.rows() == 48);
        CHECK(s.mfcc.cols() == f.cfg.audio_coeffs);
        CHECK_FALSE(s.chat_messages.empty());
    }
    CHECK(f.data.at(f.manifest.records[0].sample_id).sample_id == f.manifest.records[0].sample_id);
    CHECK_THROWS_AS(f.data.at("nope"), std::runtime_error);
}

TEST_CASE("masked dataset zeroes exactly the edge band") {
    const Fixture& f = fx();
    auto opts = train::options_for_variant(train::parse_variant("LR_mask"), f.cfg);
    CHECK(opts.mask);
    const train::Dataset masked = train::build_dataset(f.manifest, opts);

    const PixelRect keep = center_mask_rect(f.cfg.video_h, f.cfg.video_w, 0.8);
    const auto& clear = f.data.samples[0].video;
    const auto& dark = masked.at(f.data.samples[0].sample_id).video;
    for (int y = 0; y < clear.h; ++y) {
        for (int x = 0; x < clear.w; ++x) {
            if (keep.contains(y, x)) {
                CHECK(dark.at(0, 0, y, x) == clear.at(0, 0, y, x));
            } else {
                CHECK(dark.at(0, 0, y, x) == 0);
            }
        }
    }
}

TEST_CASE("view datasets extract the configured rects") {
    const Fixture& f = fx();
    auto opts = train::options_for_variant(train::parse_variant("view:minimap"), f.cfg);
    REQUIRE(opts.views.size() == 1);
    CHECK_FALSE(opts.load_video);
    const train::Dataset views = train::build_dataset(f.manifest, opts);
    const PixelRect rect = view_pixel_rect(view_by_name("minimap"), f.cfg.video_h, f.cfg.video_w);
    for (const auto& s : views.samples) {
        REQUIRE(s.views.size() == 1);
        CHECK(s.views[0].h == rect.height());
        CHECK(s.views[0].w == rect.width());
        CHECK(s.video.t == 0);  // full frames are not retained
    }

    auto mv = train::options_for_variant(train::parse_variant("multiview"), f.cfg);
    CHECK(mv.views.size() == 5);
}

TEST_CASE("evaluate_subset agrees with per-sample argmax predictions") {
    const Fixture& f = fx();
    nn::ParamStore params;
    const auto variant = train::parse_variant("LR");
    const auto ids = f.split.ids(Subset::TRAIN);
    const auto report = train::evaluate_subset(params, f.cfg, variant, f.data, ids, nullptr, 21);

    int correct = 0;
    for (const auto& id : ids) {
        const auto& s = f.data.at(id);
        const auto p = train::predict(params, f.cfg, variant, s, nullptr, 21);
        Eigen::Index arg = 0;
        p.dist.probs.maxCoeff(&arg);
        correct += static_cast<int>(arg) == class_index(s.rank);
        CHECK(p.embedding.size() == f.cfg.hidden_dim);
    }
    CHECK(report.weighted_recall ==
          doctest::Approx(static_cast<double>(correct) / static_cast<double>(ids.size())).epsilon(1e-12));
}

TEST_CASE("train_joint is deterministic and selects on validation f1") {
    const Fixture& f = fx();
    const auto variant = train::parse_variant("LR");
    const auto tcfg = quick_train(2);

    nn::ParamStore p1;
    const auto r1 = train::train_joint(p1, f.cfg, variant, f.data, f.split, tcfg);
    nn::ParamStore p2;
    const auto r2 = train::train_joint(p2, f.cfg, variant, f.data, f.split, tcfg);

    REQUIRE_FALSE(r1.log.empty());
    REQUIRE(r1.epochs.size() == 2);
    CHECK(r1.best_epoch >= 0);
    CHECK(r1.best_val_f1 >= 0.0);
    REQUIRE(r1.log.size() == r2.log.size());
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
        CHECK(r1.log[i].step == static_cast<long long>(i));
        CHECK(r1.log[i].loss_ce == r2.log[i].loss_ce);
        CHECK(r1.log[i].learning_rate == tcfg.learning_rate);
    }
    REQUIRE(r1.best_params.count() == r2.best_params.count());
    for (const auto& name : r1.best_params.names) {
        CHECK(r1.best_params.at(name) == r2.best_params.at(name));
    }

    const auto test_ids = f.split.ids(Subset::TEST);
    nn::ParamStore best = r1.best_params;
    const auto report = train::evaluate_subset(best, f.cfg, variant, f.data, test_ids, nullptr, tcfg.init_seed);
    CHECK(report.weighted_f1 >= 0.0);
    CHECK(report.weighted_f1 <= 1.0);
}

TEST_CASE("train_joint rejects bad configurations") {
    const Fixture& f = fx();
    const auto variant = train::parse_variant("LR");
    nn::ParamStore params;

    auto bad = quick_train(1);
    bad.learning_rate = 0.0;
    CHECK_THROWS_WITH_AS(train::train_joint(params, f.cfg, variant, f.data, f.split, bad),
                         doctest::Contains("learning_rate"), std::runtime_error);
    bad = quick_train(1);
    bad.batch_size = 0;
    CHECK_THROWS_WITH_AS(train::train_joint(params, f.cfg, variant, f.data, f.split, bad),
                         doctest::Contains("batch_size"), std::runtime_error);

    SplitAssignment all_test = f.split;
    for (auto& [id, subset] : all_test.assignment) subset = Subset::TEST;
    CHECK_THROWS_WITH_AS(train::train_joint(params, f.cfg, variant, f.data, all_test, quick_train(1)),
                         doctest::Contains("empty TRAIN"), std::runtime_error);
}

TEST_CASE("train_joint aborts on a non-finite loss") {
    const Fixture& f = fx();
    const auto variant = train::parse_variant("LR");
    nn::ParamStore params;
    Mat poison = Mat::Zero(f.cfg.hidden_dim, kNumClasses);
    poison(0, 0) = std::numeric_limits<double>::quiet_NaN();
    params.create("fusion.fc.W", poison);
    CHECK_THROWS_WITH_AS(train::train_joint(params, f.cfg, variant, f.data, f.split, quick_train(1)),
                         doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("early stopping halts before the epoch budget") {
    const Fixture& f = fx();
    const auto variant = train::parse_variant("LRA");
    auto tcfg = quick_train(40);
    tcfg.patience = 1;
    nn::ParamStore params;
    const auto result = train::train_joint(params, f.cfg, variant, f.data, f.split, tcfg);
    CHECK(result.epochs.size() < 40);
    CHECK(result.best_epoch < static_cast<int>(result.epochs.size()));
}

TEST_CASE("class weighting variants run end to end") {
    const Fixture& f = fx();
    const auto variant = train::parse_variant("LRA");
    for (const auto weighting : {train::ClassWeighting::WEIGHTED_CE, train::ClassWeighting::UPSAMPLE}) {
        auto tcfg = quick_train(1);
        tcfg.class_weighting = weighting;
        nn::ParamStore params;
        const auto result = train::train_joint(params, f.cfg, variant, f.data, f.split, tcfg);
        CHECK_FALSE(result.log.empty());
        for (const auto& row : result.log) CHECK(std::isfinite(row.loss_ce));
    }
}

TEST_CASE("kl training logs a kl component, plain training does not") {
    const Fixture& f = fx();
    auto tcfg = quick_train(1);
    tcfg.use_kl = true;
    nn::ParamStore params;
    const auto kl = train::train_joint(params, f.cfg, train::parse_variant("LR_KL"), f.data, f.split, tcfg);
    bool any_kl = false;
    for (const auto& row : kl.log) any_kl = any_kl || row.loss_kl != 0.0;
    CHECK(any_kl);

    nn::ParamStore plain_params;
    const auto plain =
        train::train_joint(plain_params, f.cfg, train::parse_variant("LR"), f.data, f.split, quick_train(1));
    for (const auto& row : plain.log) CHECK(row.loss_kl == 0.0);
}

TEST_CASE("ranking pretraining lowers the mean hinge loss") {
    const Fixture& f = fx();
    std::vector<std::pair<std::string, RankSection>> ranked;
    for (const auto& id : f.split.ids(Subset::TRAIN)) ranked.emplace_back(id, f.data.at(id).rank);

    losses::RankingLossConfig rank_cfg;
    rank_cfg.pair_subsample = 1.0;
    rank_cfg.seed = 9;
    const auto pairs = losses::generate_pairs(ranked, rank_cfg);
    REQUIRE(pairs.pairs.size() > 20);

    auto tcfg = quick_train(0);
    tcfg.learning_rate = 1e-2;
    nn::ParamStore params;
    const auto result =
        train::pretrain_ranking(params, f.cfg, train::Branch::VIDEO, pairs, f.data, tcfg, rank_cfg, 2);
    CHECK(result.final_mean_loss < result.initial_mean_loss);
    CHECK_FALSE(result.log.empty());

    CHECK_THROWS_WITH_AS(
        train::pretrain_ranking(params, f.cfg, train::Branch::AUDIO, losses::PairBatch{}, f.data, tcfg,
                                rank_cfg, 1),
        doctest::Contains("empty pair batch"), std::runtime_error);
}

TEST_CASE("chat-only training works against a built vocabulary") {
    const Fixture& f = fx();
    std::vector<std::string> train_messages;
    for (const auto& id : f.split.ids(Subset::TRAIN)) {
        const auto& s = f.data.at(id);
        train_messages.insert(train_messages.end(), s.chat_messages.begin(), s.chat_messages.end());
    }
    const nn::Vocab vocab = nn::build_vocab(train_messages, 2);
    REQUIRE(vocab.size() > 1);
    nn::ModelConfig cfg = f.cfg;
    cfg.vocab_size = vocab.size();

    nn::ParamStore params;
    const auto result = train::train_joint(params, cfg, train::parse_variant("chat_only"), f.data, f.split,
                                           quick_train(2), &vocab);
    CHECK_FALSE(result.log.empty());
    CHECK(params.has("chat.embed"));
    CHECK(params.has("chat.fc.W"));
}

TEST_CASE("log csv files carry the frozen headers") {
    const Fixture& f = fx();
    const fs::path dir = fs::temp_directory_path() / "streamrank_trainer_logs";
    fs::create_directories(dir);
    std::vector<train::LogRow> log = {{0, 1.25, 0.0, 0.0, 3e-4}, {1, 1.0, 0.5, 0.25, 3e-4}};
    train::write_log_csv(log, (dir / "log.csv").string());
    std::vector<train::EpochMetrics> epochs = {{0, 1.1, 0.5, 0.25, 0.33}};
    train::write_metrics_epoch_csv(epochs, (dir / "metrics_epoch.csv").string());

    std::ifstream in1(dir / "log.csv");
    std::string line;
    REQUIRE(std::getline(in1, line));
    CHECK(line == "step,loss_ce,loss_kl,loss_rank,learning_rate");
    int rows = 0;
    while (std::getline(in1, line)) ++rows;
    CHECK(rows == 2);

    std::ifstream in2(dir / "metrics_epoch.csv");
    REQUIRE(std::getline(in2, line));
    CHECK(line == "epoch,train_loss,val_weighted_precision,val_weighted_recall,val_weighted_f1");
    (void)f;
}
