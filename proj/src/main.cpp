#include "streamrank/arrayio.hpp"
#include "streamrank/config.hpp"
#include "streamrank/experiment.hpp"
#include "streamrank/synthgen.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace streamrank;

namespace {

cli::ConfigMap resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    cli::ConfigMap cfg = cli::default_config();
    if (!config_path.empty()) cli::merge_file(cfg, config_path);
    cli::apply_overrides(cfg, overrides);
    return cfg;
}

void print_metrics(const eval::MetricsReport& report) {
    std::cout.precision(6);
    std::cout << "weighted_precision " << report.weighted_precision << "\n"
              << "weighted_recall    " << report.weighted_recall << "\n"
              << "weighted_f1        " << report.weighted_f1 << "\n";
}

int cmd_synth(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir) {
    const cli::ConfigMap cfg = resolve_config(config_path, overrides);
    const SynthConfig sc = cli::synth_from_config(cfg);
    const Manifest mf = generate_corpus(sc, out_dir);
    std::cout << "corpus " << out_dir << ": " << mf.records.size() << " samples, " << mf.user_ids().size()
              << " users, manifest hash " << file_hash(fs::path(out_dir) / "manifest.jsonl") << "\n";
    return 0;
}

int cmd_preprocess(const std::string& corpus_dir, int target_fps, int width, int height, int audio_rate) {
    Manifest mf = load_manifest(fs::path(corpus_dir) / "manifest.jsonl");
    const fs::path cache_dir = fs::path(corpus_dir) / "cache";
    fs::create_directories(cache_dir);
    MfccConfig mfcc_cfg;
    std::ostringstream chain;
    chain << "fps" << target_fps << ".w" << width << ".h" << height << ".rate" << audio_rate << ".mfcc"
          << mfcc_cfg.n_coeffs;
    for (const auto& rec : mf.records) {
        VideoClip clip = load_video(mf.resolve(rec.video_path));
        if (clip.fps > target_fps) clip = downsample_frames(clip, target_fps);
        if (clip.h != height || clip.w != width) clip = resize_frames(clip, width, height);
        save_video(clip, cache_dir / (cache_key(rec.sample_id, "video." + chain.str()) + ".bin"));

        AudioTrack track = load_audio(mf.resolve(rec.audio_path));
        if (track.sample_rate != audio_rate) track = resample_audio(track, audio_rate);
        MfccSequence seq = compute_mfcc(track, mfcc_cfg);
        save_mfcc(seq, cache_dir / (cache_key(rec.sample_id, "mfcc." + chain.str()) + ".bin"));
    }
    std::cout << "preprocessed " << mf.records.size() << " samples into " << cache_dir.string() << "\n";
    return 0;
}

int cmd_split(const std::string& corpus_dir, const std::string& mode, std::uint64_t seed,
              const SplitRatios& ratios, const std::string& out_path) {
    Manifest mf = load_manifest(fs::path(corpus_dir) / "manifest.jsonl");
    const SplitMode split_mode = split_mode_from_string(mode);
    const SplitAssignment split = split_mode == SplitMode::VIDEO_BASED
                                      ? stratified_video_split(mf, ratios, seed)
                                      : stratified_user_split(mf, ratios, seed);
    const SplitReport report = verify_split(split, mf);
    save_split(split, out_path);
    std::cout << "split " << out_path << ": sizes " << report.subset_sizes[0] << "/" << report.subset_sizes[1]
              << "/" << report.subset_sizes[2] << ", max class deviation " << report.max_fraction_deviation
              << ", user overlap " << report.user_overlap[0] << "/" << report.user_overlap[1] << "/"
              << report.user_overlap[2] << (report.pass ? ", pass" : ", FAIL") << "\n";
    for (const auto& w : split.warnings) std::cout << "warning: " << w << "\n";
    return report.pass ? 0 : 1;
}

int cmd_train(const std::string& corpus_dir, const std::string& variant, const std::string& split_mode,
              const std::string& runs_root, const std::string& config_path,
              const std::vector<std::string>& overrides) {
    const cli::ConfigMap cfg = resolve_config(config_path, overrides);
    exp::ExperimentConfig ec = cli::experiment_from_config(cfg);
    ec.corpus_dir = corpus_dir;
    ec.runs_root = runs_root;
    ec.variant = variant;
    ec.split_mode = split_mode_from_string(split_mode);
    const exp::ExperimentResult result = exp::run_experiment(ec);
    std::cout << "run " << result.run_dir << "\n";
    print_metrics(result.test_metrics);
    return fs::exists(fs::path(result.run_dir) / "metrics.json") ? 0 : 1;
}

int cmd_eval(const std::string& run_dir, const std::string& subset_name) {
    std::ifstream cfg_in(fs::path(run_dir) / "config.json");
    if (!cfg_in) throw std::runtime_error("missing config.json in run dir: " + run_dir);
    const exp::ExperimentConfig ec = exp::experiment_from_json(nlohmann::ordered_json::parse(cfg_in));
    const train::VariantSpec variant = train::parse_variant(ec.variant);

    Manifest mf = load_manifest(fs::path(ec.corpus_dir) / "manifest.jsonl");
    const fs::path chat_path = fs::path(ec.corpus_dir) / "chats.jsonl";
    if (fs::exists(chat_path)) attach_chats(mf, chat_path);

    nn::ModelConfig mcfg = ec.model;
    if (variant.kind == train::VariantKind::SINGLE_VIEW) {
        mcfg.views = {view_by_name(variant.view_name)};
    } else if (variant.kind == train::VariantKind::MULTIVIEW) {
        mcfg.views = default_views();
    }

    const train::Dataset data = train::build_dataset(mf, train::options_for_variant(variant, mcfg));
    const SplitAssignment split = load_split(fs::path(run_dir) / "split.json");

    nn::Vocab vocab;
    const nn::Vocab* vocab_ptr = nullptr;
    if (variant.uses_chat()) {
        vocab = nn::load_vocab((fs::path(run_dir) / "vocab.json").string());
        vocab_ptr = &vocab;
    }

    nn::ParamStore params;
    nn::load_checkpoint((fs::path(run_dir) / "checkpoints" / "best").string(), params);

    const Subset subset = subset_from_string(subset_name);
    const auto ids = split.ids(subset);
    if (ids.empty()) throw std::runtime_error("empty subset: " + subset_name);
    const auto report =
        train::evaluate_subset(params, mcfg, variant, data, ids, vocab_ptr, ec.train.init_seed);

    std::string lower = subset_name;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    eval::save_metrics(report, (fs::path(run_dir) / ("metrics_" + lower + ".json")).string());
    std::cout << "eval " << run_dir << " " << subset_name << " (" << ids.size() << " samples)\n";
    print_metrics(report);
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
    exp::write_report(run_dirs, out_csv);
    std::cout << "report " << out_csv << " (" << run_dirs.size() << " runs)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streamrank: multimodal gaming-skill classification experiments"};
    app.require_subcommand(0, 1);

    bool list_variants = false;
    app.add_flag("--list-variants", list_variants, "print the canonical experiment variants and exit");

    std::string config_path;
    std::vector<std::string> overrides;
    std::string corpus_dir;
    std::string out_path;

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--config", config_path, "config file");
    synth->add_option("--set", overrides, "override config key=value")->take_all();
    std::uint64_t synth_seed = 0;
    bool synth_seed_given = false;
    synth->add_option("--seed", synth_seed, "override synth.seed")->each([&](const std::string&) {
        synth_seed_given = true;
    });
    synth->add_option("--out", out_path, "output corpus directory")->required();

    auto* preprocess = app.add_subcommand("preprocess", "decode and cache model-ready arrays");
    preprocess->add_option("--corpus", corpus_dir, "corpus directory")->required();
    int pp_fps = 1, pp_w = 32, pp_h = 32, pp_rate = 16000;
    preprocess->add_option("--fps", pp_fps, "target frame rate");
    preprocess->add_option("--width", pp_w, "frame width");
    preprocess->add_option("--height", pp_h, "frame height");
    preprocess->add_option("--rate", pp_rate, "audio sample rate");

    auto* split = app.add_subcommand("split", "compute and verify a stratified split");
    split->add_option("--corpus", corpus_dir, "corpus directory")->required();
    std::string split_mode = "video";
    std::uint64_t split_seed = 7;
    SplitRatios ratios;
    split->add_option("--mode", split_mode, "video|user");
    split->add_option("--seed", split_seed, "split seed");
    split->add_option("--train", ratios.train, "train fraction");
    split->add_option("--val", ratios.val, "val fraction");
    split->add_option("--test", ratios.test, "test fraction");
    split->add_option("--out", out_path, "output split.json")->required();

    auto* train_cmd = app.add_subcommand("train", "run one experiment variant (train + eval)");
    train_cmd->add_option("--corpus", corpus_dir, "corpus directory");
    std::string variant = "LR";
    std::string runs_root = "runs";
    train_cmd->add_option("--variant", variant, "experiment variant (see --list-variants)");
    train_cmd->add_option("--split-mode", split_mode, "video|user");
    train_cmd->add_option("--runs", runs_root, "runs root directory");
    train_cmd->add_option("--config", config_path, "config file");
    train_cmd->add_option("--set", overrides, "override config key=value")->take_all();
    bool train_list = false;
    train_cmd->add_flag("--list-variants", train_list, "print the canonical experiment variants and exit");

    auto* eval_cmd = app.add_subcommand("eval", "re-evaluate a finished run's best checkpoint");
    std::string run_dir;
    std::string subset = "TEST";
    eval_cmd->add_option("--run", run_dir, "run directory")->required();
    eval_cmd->add_option("--subset", subset, "TRAIN|VAL|TEST");

    auto* report = app.add_subcommand("report", "merge run directories into a comparison CSV");
    std::vector<std::string> run_dirs;
    report->add_option("--out", out_path, "output CSV")->required();
    report->add_option("runs", run_dirs, "run directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (list_variants || train_list) {
            for (const auto& name : train::variant_names()) std::cout << name << "\n";
            return 0;
        }
        if (synth->parsed()) {
            if (synth_seed_given) overrides.push_back("synth.seed=" + std::to_string(synth_seed));
            return cmd_synth(config_path, overrides, out_path);
        }
        if (preprocess->parsed()) return cmd_preprocess(corpus_dir, pp_fps, pp_w, pp_h, pp_rate);
        if (split->parsed()) return cmd_split(corpus_dir, split_mode, split_seed, ratios, out_path);
        if (train_cmd->parsed()) {
            if (corpus_dir.empty()) throw std::runtime_error("train requires --corpus");
            return cmd_train(corpus_dir, variant, split_mode, runs_root, config_path, overrides);
        }
        if (eval_cmd->parsed()) return cmd_eval(run_dir, subset);
        if (report->parsed()) return cmd_report(run_dirs, out_path);
        std::cout << app.help();
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
