#include "streamrank/experiment.hpp"

#include "streamrank/rng.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace streamrank::exp {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

nlohmann::ordered_json experiment_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["corpus_dir"] = cfg.corpus_dir;
    j["variant"] = cfg.variant;
    j["split_mode"] = to_string(cfg.split_mode);
    j["ratios"] = {{"train", cfg.ratios.train}, {"val", cfg.ratios.val}, {"test", cfg.ratios.test}};
    j["split_seed"] = cfg.split_seed;
    j["model"] = ordered_json::parse(nn::config_to_json(cfg.model));
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"patience", cfg.train.patience},
                  {"class_weighting", train::to_string(cfg.train.class_weighting)},
                  {"seed", cfg.train.seed},
                  {"init_seed", cfg.train.init_seed},
                  {"use_kl", cfg.train.use_kl},
                  {"kl_scale", cfg.train.kl.scale},
                  {"kl_temperature", cfg.train.kl.temperature},
                  {"finetune_chat", cfg.train.finetune_chat}};
    j["ranking"] = {{"margin", cfg.ranking.margin},
                    {"pair_subsample", cfg.ranking.pair_subsample},
                    {"seed", cfg.ranking.seed},
                    {"epochs", cfg.ranking_epochs}};
    j["chat_epochs"] = cfg.chat_epochs;
    return j;
}

std::string experiment_hash(const ExperimentConfig& cfg) {
    const std::uint64_t h = fnv1a(experiment_to_json(cfg).dump());
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

ExperimentConfig experiment_from_json(const nlohmann::ordered_json& j) {
    ExperimentConfig cfg;
    cfg.corpus_dir = j.at("corpus_dir").get<std::string>();
    cfg.variant = j.at("variant").get<std::string>();
    cfg.split_mode = split_mode_from_string(j.at("split_mode").get<std::string>());
    cfg.ratios.train = j.at("ratios").at("train").get<double>();
    cfg.ratios.val = j.at("ratios").at("val").get<double>();
    cfg.ratios.test = j.at("ratios").at("test").get<double>();
    cfg.split_seed = j.at("split_seed").get<std::uint64_t>();

    const auto& m = j.at("model");
    auto& mc = cfg.model;
    mc.video_t = m.at("video_t").get<int>();
    mc.video_h = m.at("video_h").get<int>();
    mc.video_w = m.at("video_w").get<int>();
    mc.video_c = m.at("video_c").get<int>();
    mc.audio_coeffs = m.at("audio_coeffs").get<int>();
    mc.hidden_dim = m.at("hidden_dim").get<int>();
    mc.seq_len = m.at("seq_len").get<int>();
    mc.n_classes = m.at("n_classes").get<int>();
    mc.recurrent_layers = m.at("recurrent_layers").get<int>();
    mc.video_channels = m.at("video_channels").get<int>();
    mc.video_kt = m.at("video_kt").get<int>();
    mc.video_k = m.at("video_k").get<int>();
    mc.video_stride = m.at("video_stride").get<int>();
    mc.pool_zones = m.at("pool_zones").get<int>();
    mc.audio_channels = m.at("audio_channels").get<int>();
    mc.audio_kernel = m.at("audio_kernel").get<int>();
    mc.audio_stride = m.at("audio_stride").get<int>();
    mc.audio_res_kernel = m.at("audio_res_kernel").get<int>();
    mc.prior_dim = m.at("prior_dim").get<int>();
    mc.chat_embed_dim = m.at("chat_embed_dim").get<int>();
    mc.chat_layers = m.at("chat_layers").get<int>();
    mc.chat_max_tokens = m.at("chat_max_tokens").get<int>();
    mc.vocab_size = m.at("vocab_size").get<int>();
    mc.views.clear();
    for (const auto& v : m.at("views")) {
        ViewSpec view;
        view.name = v.at("name").get<std::string>();
        view.y0 = v.at("y0").get<double>();
        view.x0 = v.at("x0").get<double>();
        view.y1 = v.at("y1").get<double>();
        view.x1 = v.at("x1").get<double>();
        mc.views.push_back(view);
    }

    const auto& t = j.at("train");
    cfg.train.learning_rate = t.at("learning_rate").get<double>();
    cfg.train.batch_size = t.at("batch_size").get<int>();
    cfg.train.epochs = t.at("epochs").get<int>();
    cfg.train.patience = t.at("patience").get<int>();
    cfg.train.class_weighting = train::parse_class_weighting(t.at("class_weighting").get<std::string>());
    cfg.train.seed = t.at("seed").get<std::uint64_t>();
    cfg.train.init_seed = t.at("init_seed").get<std::uint64_t>();
    cfg.train.use_kl = t.at("use_kl").get<bool>();
    cfg.train.kl.scale = t.at("kl_scale").get<double>();
    cfg.train.kl.temperature = t.at("kl_temperature").get<double>();
    cfg.train.finetune_chat = t.at("finetune_chat").get<bool>();

    const auto& r = j.at("ranking");
    cfg.ranking.margin = r.at("margin").get<double>();
    cfg.ranking.pair_subsample = r.at("pair_subsample").get<double>();
    cfg.ranking.seed = r.at("seed").get<std::uint64_t>();
    cfg.ranking_epochs = r.at("epochs").get<int>();
    cfg.chat_epochs = j.at("chat_epochs").get<int>();
    return cfg;
}

namespace {

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (auto& c : out) {
        if (c == ':' || c == '/' || c == '\\') c = '-';
    }
    return out;
}

std::string split_tag(SplitMode mode) { return mode == SplitMode::VIDEO_BASED ? "video" : "user"; }

std::vector<eval::EmbeddingMeta> embedding_pass(nn::ParamStore& params, const nn::ModelConfig& mcfg,
                                                const train::VariantSpec& variant, const train::Dataset& data,
                                                const std::vector<std::string>& ids, const nn::Vocab* vocab,
                                                std::uint64_t init_seed, Mat& embeddings) {
    std::vector<eval::EmbeddingMeta> meta;
    meta.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const train::Sample& s = data.at(ids[i]);
        const auto pred = train::predict(params, mcfg, variant, s, vocab, init_seed);
        if (i == 0) embeddings.resize(static_cast<Eigen::Index>(ids.size()), pred.embedding.size());
        embeddings.row(static_cast<Eigen::Index>(i)) = pred.embedding.transpose();
        meta.push_back({s.sample_id, s.user_id, s.rank});
    }
    return meta;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const train::VariantSpec variant = train::parse_variant(cfg.variant);
    train::TrainConfig tcfg = cfg.train;
    if (variant.kind == train::VariantKind::FUSION_KL) tcfg.use_kl = true;

    Manifest mf = load_manifest(fs::path(cfg.corpus_dir) / "manifest.jsonl");
    const fs::path chat_path = fs::path(cfg.corpus_dir) / "chats.jsonl";
    if (fs::exists(chat_path)) attach_chats(mf, chat_path);

    SplitAssignment split = cfg.split_mode == SplitMode::VIDEO_BASED
                                ? stratified_video_split(mf, cfg.ratios, cfg.split_seed)
                                : stratified_user_split(mf, cfg.ratios, cfg.split_seed);

    nn::ModelConfig mcfg = cfg.model;
    if (variant.kind == train::VariantKind::SINGLE_VIEW) {
        mcfg.views = {view_by_name(variant.view_name)};
    } else if (variant.kind == train::VariantKind::MULTIVIEW) {
        mcfg.views = default_views();
    } else {
        mcfg.views.clear();
    }

    train::DataOptions opts = train::options_for_variant(variant, mcfg);
    const train::Dataset data = train::build_dataset(mf, opts);

    nn::Vocab vocab;
    const nn::Vocab* vocab_ptr = nullptr;
    if (variant.uses_chat()) {
        std::vector<std::string> train_messages;
        for (const auto& id : split.ids(Subset::TRAIN)) {
            const auto& msgs = data.at(id).chat_messages;
            train_messages.insert(train_messages.end(), msgs.begin(), msgs.end());
        }
        vocab = nn::build_vocab(train_messages);
        mcfg.vocab_size = static_cast<int>(vocab.size());
        vocab_ptr = &vocab;
    }

    const std::string run_name =
        sanitize(cfg.variant) + "_" + split_tag(cfg.split_mode) + "_" + experiment_hash(cfg);
    const fs::path run_dir = fs::path(cfg.runs_root) / run_name;
    fs::create_directories(run_dir / "checkpoints");

    {
        std::ofstream out(run_dir / "config.json");
        out << experiment_to_json(cfg).dump(2) << "\n";
    }
    save_split(split, run_dir / "split.json");
    if (vocab_ptr != nullptr) nn::save_vocab(vocab, (run_dir / "vocab.json").string());

    nn::ParamStore params;
    std::vector<train::LogRow> pre_log;

    if (variant.kind == train::VariantKind::FUSION_RANK) {
        std::vector<std::pair<std::string, RankSection>> train_ranked;
        for (const auto& id : split.ids(Subset::TRAIN)) train_ranked.emplace_back(id, data.at(id).rank);
        const losses::PairBatch pairs = losses::generate_pairs(train_ranked, cfg.ranking);
        for (auto branch : {train::Branch::VIDEO, train::Branch::AUDIO}) {
            auto rr = train::pretrain_ranking(params, mcfg, branch, pairs, data, tcfg, cfg.ranking,
                                              cfg.ranking_epochs);
            pre_log.insert(pre_log.end(), rr.log.begin(), rr.log.end());
        }
    }
    if (variant.uses_chat()) {
        train::VariantSpec chat_variant;
        chat_variant.kind = train::VariantKind::CHAT_ONLY;
        chat_variant.name = "chat_only";
        train::TrainConfig ccfg = tcfg;
        ccfg.epochs = cfg.chat_epochs;
        ccfg.use_kl = false;
        auto cr = train::train_joint(params, mcfg, chat_variant, data, split, ccfg, vocab_ptr);
        params = cr.best_params;
        pre_log.insert(pre_log.end(), cr.log.begin(), cr.log.end());
    }

    ExperimentResult result;
    result.run_dir = run_dir.string();
    result.training = train::train_joint(params, mcfg, variant, data, split, tcfg, vocab_ptr);

    std::vector<train::LogRow> full_log = pre_log;
    long long step = 0;
    for (auto row : result.training.log) {
        row.step = static_cast<long long>(pre_log.size()) + step++;
        full_log.push_back(row);
    }
    for (long long i = 0; i < static_cast<long long>(pre_log.size()); ++i) full_log[i].step = i;
    train::write_log_csv(full_log, (run_dir / "log.csv").string());
    train::write_metrics_epoch_csv(result.training.epochs, (run_dir / "metrics_epoch.csv").string());

    const std::uint64_t hash = fnv1a(experiment_to_json(cfg).dump());
    nn::save_checkpoint(result.training.best_params, (run_dir / "checkpoints" / "best").string(), hash);
    nn::save_checkpoint(result.training.last_params, (run_dir / "checkpoints" / "last").string(), hash);

    const auto test_ids = split.ids(Subset::TEST);
    if (test_ids.empty()) throw std::runtime_error("empty TEST subset");
    result.test_metrics = train::evaluate_subset(result.training.best_params, mcfg, variant, data, test_ids,
                                                 vocab_ptr, tcfg.init_seed);
    eval::save_metrics(result.test_metrics, (run_dir / "metrics.json").string());
    eval::save_confusion_csv(result.test_metrics.confusion, (run_dir / "confusion.csv").string());

    if (variant.has_fused_embedding()) {
        Mat embeddings;
        auto meta = embedding_pass(result.training.best_params, mcfg, variant, data, test_ids, vocab_ptr,
                                   tcfg.init_seed, embeddings);
        eval::export_embeddings(embeddings, meta, (run_dir / "embeddings.csv").string());
        if (embeddings.rows() >= 3) {
            const Mat coords = eval::pca_project(embeddings, 2);
            std::ofstream out(run_dir / "embeddings_pca.csv");
            out.precision(17);
            out << "sample_id,user_id,rank,pc0,pc1\n";
            for (std::size_t i = 0; i < meta.size(); ++i) {
                out << meta[i].sample_id << "," << meta[i].user_id << "," << to_string(meta[i].rank) << ","
                    << coords(static_cast<Eigen::Index>(i), 0) << ","
                    << coords(static_cast<Eigen::Index>(i), 1) << "\n";
            }
        }
    }
    return result;
}

void write_report(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("cannot write report: " + out_csv);
    out.precision(17);
    out << "variant,split_mode,weighted_precision,weighted_recall,weighted_f1\n";
    for (const auto& dir : run_dirs) {
        std::ifstream cfg_in(fs::path(dir) / "config.json");
        if (!cfg_in) throw std::runtime_error("missing config.json in run dir: " + dir);
        ordered_json cfg = ordered_json::parse(cfg_in);
        const auto report = eval::load_metrics((fs::path(dir) / "metrics.json").string());
        out << cfg.at("variant").get<std::string>() << "," << cfg.at("split_mode").get<std::string>() << ","
            << report.weighted_precision << "," << report.weighted_recall << "," << report.weighted_f1
            << "\n";
    }
}

}  // namespace streamrank::exp
