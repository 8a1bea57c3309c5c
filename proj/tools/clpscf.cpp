// clpscf command line tool: toy data synthesis, two-stage training,
// scoring/evaluation, and t-SNE plots over DCASE-style datasets.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clpscf/checkpoint.hpp"
#include "clpscf/dataio.hpp"
#include "clpscf/feature_cache.hpp"
#include "clpscf/runconfig.hpp"
#include "clpscf/scoring.hpp"
#include "clpscf/svgplot.hpp"
#include "clpscf/toygen.hpp"
#include "clpscf/training.hpp"
#include "clpscf/tsne.hpp"

namespace fs = std::filesystem;
using namespace clpscf;

namespace {

struct RunPaths {
    fs::path root;
    fs::path checkpoints() const { return root / "checkpoints"; }
    fs::path reports() const { return root / "reports"; }
    fs::path plots() const { return root / "plots"; }
    fs::path logs() const { return root / "logs"; }

    void ensure() const {
        fs::create_directories(checkpoints());
        fs::create_directories(reports());
        fs::create_directories(plots());
        fs::create_directories(logs());
    }
};

// Config resolution: defaults -> config file -> command line flags.
struct ConfigCli {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;  // (section.key, value)
    CLI::Option* config_opt = nullptr;

    void attach(CLI::App* cmd) {
        config_opt = cmd->add_option("--config", config_path,
                                     "Config file (flat key = value with [sections])")
                         ->envname("CLPSCF_CONFIG")
                         ->check(CLI::ExistingFile);
    }

    // Registers a flag that overrides section.key when supplied.
    void add_override(CLI::App* cmd, const std::string& flag, const std::string& section_key,
                      const std::string& help) {
        auto holder = std::make_shared<std::string>();
        cmd->add_option_function<std::string>(
               flag,
               [this, section_key](const std::string& v) {
                   overrides.emplace_back(section_key, v);
               },
               help)
            ->type_name("VALUE");
        (void)holder;
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
        for (const auto& [section_key, value] : overrides) {
            const auto dot = section_key.find('.');
            cfg.apply(section_key.substr(0, dot), section_key.substr(dot + 1), value);
        }
        cfg.validate();
        return cfg;
    }
};

void write_config_snapshot(const fs::path& artifact, const RunConfig& cfg) {
    std::ofstream os(artifact.string() + ".config");
    os << "# resolved configuration, hash " << cfg.hash() << "\n" << cfg.to_ini();
}

std::vector<AudioClip> scan_split(const std::vector<std::string>& roots, Split split) {
    std::vector<fs::path> paths(roots.begin(), roots.end());
    ScanResult scan = scan_dataset(paths);
    for (const auto& w : scan.warnings) std::cerr << "warning: " << w << "\n";
    if (scan.skipped > 0) {
        std::cerr << "warning: skipped " << scan.skipped << " file(s) with unparseable names\n";
    }
    std::vector<AudioClip> out;
    for (auto& c : scan.clips) {
        if (c.split == split) out.push_back(std::move(c));
    }
    if (out.empty()) {
        throw std::runtime_error(std::string("no clips in the ") + to_string(split) + " split");
    }
    return out;
}

TrainHooks make_hooks(std::ofstream& log, const RunPaths& paths, const std::string& stage,
                      int interval, const LabelSpace& labels, const RunConfig& cfg) {
    TrainHooks hooks;
    hooks.step_log = &log;
    if (interval > 0) {
        hooks.on_epoch_end = [&paths, stage, interval, labels, cfg](int epoch, Model& model) {
            if ((epoch + 1) % interval != 0) return;
            char name[64];
            std::snprintf(name, sizeof(name), "%s_epoch%04d.ckpt", stage.c_str(), epoch + 1);
            CheckpointMeta meta;
            meta.stage = model.stage();
            meta.label_space = labels;
            meta.run_config_hash = cfg.hash();
            if (meta.stage == Stage::finetuned) {
                meta.arcface_margin = cfg.finetune.margin;
                meta.arcface_scale = cfg.finetune.scale;
            }
            save_checkpoint(paths.checkpoints() / name, model, meta);
        };
    }
    return hooks;
}

int cmd_gen_toy(const ToySpec& spec, const std::string& out_dir) {
    ToyDataset ds = write_toy_dataset(spec, out_dir);
    std::cout << "wrote " << ds.train.size() << " train + " << ds.test.size()
              << " test clips under " << out_dir << "\n";
    return 0;
}

int cmd_pretrain(const ConfigCli& cc, const std::vector<std::string>& data,
                 const std::string& out_dir, const std::string& cache_dir, int ckpt_interval) {
    RunConfig cfg = cc.resolve();
    RunPaths paths{out_dir};
    paths.ensure();

    auto clips = scan_split(data, Split::train);
    LabelSpace labels = LabelSpace::from_clips(clips);
    std::cout << "pretraining on " << clips.size() << " clips, " << labels.size()
              << " machine IDs (batch " << labels.size() * cfg.pretrain.per_id << " = "
              << labels.size() << " x " << cfg.pretrain.per_id << ")\n";

    std::optional<FeatureCache> cache;
    if (!cache_dir.empty()) cache.emplace(cache_dir);

    std::ofstream log(paths.logs() / "pretrain.jsonl");
    TrainHooks hooks = make_hooks(log, paths, "pretrained", ckpt_interval, labels, cfg);

    Checkpoint ckpt = pretrain(clips, labels, cfg.model_config(labels.size()), cfg.pretrain,
                               cfg.loader_options(cache ? &*cache : nullptr), hooks);
    ckpt.meta.run_config_hash = cfg.hash();

    const fs::path ckpt_path = paths.checkpoints() / "pretrained.ckpt";
    save_checkpoint(ckpt_path, *ckpt.model, ckpt.meta);
    write_config_snapshot(ckpt_path, cfg);
    std::cout << "wrote " << ckpt_path.string() << "\n";
    return 0;
}

int cmd_finetune(const ConfigCli& cc, const std::string& from,
                 const std::vector<std::string>& data, const std::string& out_dir,
                 const std::string& cache_dir, int ckpt_interval) {
    RunConfig cfg = cc.resolve();
    RunPaths paths{out_dir};
    paths.ensure();

    Checkpoint pre = load_checkpoint(from);
    auto clips = scan_split(data, Split::train);
    std::cout << "fine-tuning on " << clips.size() << " clips, batch " << cfg.finetune.batch_size
              << "\n";

    std::optional<FeatureCache> cache;
    if (!cache_dir.empty()) cache.emplace(cache_dir);

    std::ofstream log(paths.logs() / "finetune.jsonl");
    TrainHooks hooks = make_hooks(log, paths, "finetuned", ckpt_interval, pre.meta.label_space, cfg);

    Checkpoint fin = finetune(std::move(pre), clips, cfg.finetune,
                              cfg.loader_options(cache ? &*cache : nullptr), hooks);
    fin.meta.run_config_hash = cfg.hash();

    const fs::path ckpt_path = paths.checkpoints() / "finetuned.ckpt";
    save_checkpoint(ckpt_path, *fin.model, fin.meta);
    write_config_snapshot(ckpt_path, cfg);
    std::cout << "wrote " << ckpt_path.string() << "\n";
    return 0;
}

int cmd_evaluate(const ConfigCli& cc, const std::string& ckpt_path,
                 const std::vector<std::string>& data, const std::string& out_dir,
                 bool with_margin) {
    RunConfig cfg = cc.resolve();
    RunPaths paths{out_dir};
    paths.ensure();

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (ckpt.meta.stage != Stage::finetuned) {
        throw std::runtime_error("evaluate requires a finetuned checkpoint (got stage '" +
                                 std::string(to_string(ckpt.meta.stage)) + "')");
    }
    if (ckpt.model->config().feature.hash() != cfg.feature.hash()) {
        throw std::runtime_error(
            "checkpoint feature config differs from the eval-time config; refusing to score");
    }

    auto clips = scan_split(data, Split::test);
    ScoreOptions opts;
    opts.with_margin = with_margin;
    opts.loader = cfg.loader_options();

    const auto scored = score_clips(ckpt, clips, opts);
    std::vector<AnomalyRecord> records;
    records.reserve(scored.size());
    for (const auto& s : scored) records.push_back(s.record);
    EvalReport report = evaluate_records(records, cfg.eval_p);

    const fs::path csv_path = paths.reports() / "scores.csv";
    write_score_csv(csv_path, scored, ckpt.meta.label_space);
    const fs::path json_path = paths.reports() / "report.json";
    {
        std::ofstream os(json_path);
        os << report_to_json(report) << "\n";
    }
    {
        std::ofstream os(paths.reports() / "report.txt");
        os << report_to_text(report);
    }
    write_config_snapshot(json_path, cfg);

    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << report_to_text(report);
    std::cout << "wrote " << csv_path.string() << " and " << json_path.string() << "\n";
    return 0;
}

int cmd_tsne(const ConfigCli& cc, const std::string& ckpt_path,
             const std::vector<std::string>& data, const std::string& out_dir,
             double perplexity_override, uint64_t seed) {
    RunConfig cfg = cc.resolve();
    RunPaths paths{out_dir};
    paths.ensure();

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    auto clips = scan_split(data, Split::test);

    const auto rows = export_latents(ckpt, clips, cfg.loader_options());
    write_latent_csv(paths.reports() / "latents.csv", rows);

    // One projection and plot per machine type.
    std::map<std::string, std::vector<size_t>> by_type;
    for (size_t i = 0; i < rows.size(); ++i) by_type[rows[i].machine_type].push_back(i);

    std::ofstream coords(paths.reports() / "tsne_coords.csv");
    coords << "clip,machine_type,machine_id,truth,x,y\n";

    TsneOptions topts;
    topts.perplexity = perplexity_override > 0.0 ? perplexity_override : cfg.tsne_perplexity;
    topts.seed = seed;

    for (const auto& [type, indices] : by_type) {
        std::vector<std::vector<double>> pts;
        pts.reserve(indices.size());
        for (size_t i : indices) pts.push_back(rows[i].latent);
        const auto emb = tsne_embed(pts, topts);

        std::vector<ScatterPoint> scatter;
        scatter.reserve(emb.size());
        for (size_t k = 0; k < emb.size(); ++k) {
            const auto& row = rows[indices[k]];
            scatter.push_back({emb[k][0], emb[k][1], row.machine_id, row.anomalous});
            coords << row.clip_ref << ',' << row.machine_type << ',' << row.machine_id << ','
                   << (row.anomalous ? "anomalous" : "normal") << ',' << emb[k][0] << ','
                   << emb[k][1] << '\n';
        }
        const fs::path svg = paths.plots() / ("tsne_" + type + ".svg");
        write_scatter_svg(svg, "latent features: " + type, scatter);
        std::cout << "wrote " << svg.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clpscf: machine-ID contrastive pretraining + classifier fine-tuning "
                 "for anomalous sound detection"};
    app.require_subcommand(1);

    // ---- gen-toy -----------------------------------------------------
    auto* gen = app.add_subcommand("gen-toy", "Synthesize a DCASE-layout toy dataset");
    ToySpec toy;
    std::string gen_out = "toy";
    gen->add_option("--types", toy.num_types, "Machine types")->check(CLI::PositiveNumber);
    gen->add_option("--ids", toy.ids_per_type, "IDs per type")->check(CLI::PositiveNumber);
    gen->add_option("--clips", toy.clips_per_id, "Clips per ID per split")
        ->check(CLI::PositiveNumber);
    gen->add_option("--seconds", toy.clip_seconds, "Clip length in seconds")
        ->check(CLI::PositiveNumber);
    gen->add_option("--sr", toy.sample_rate, "Sample rate")->check(CLI::PositiveNumber);
    gen->add_option("--anomaly-frac", toy.anomaly_fraction_test,
                    "Anomalous fraction of each ID's test clips")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--seed", toy.seed, "Generator seed");
    gen->add_option("--out", gen_out, "Output directory");

    // ---- shared training/eval options ---------------------------------
    auto add_common_overrides = [](CLI::App* cmd, ConfigCli& cc) {
        cc.attach(cmd);
        cc.add_override(cmd, "--clip-seconds", "data.clip_seconds", "Fixed clip duration (s)");
        cc.add_override(cmd, "--workers", "data.workers", "Feature-extraction threads");
        cc.add_override(cmd, "--n-fft", "features.n_fft", "STFT size");
        cc.add_override(cmd, "--hop", "features.hop", "STFT hop");
        cc.add_override(cmd, "--mel-bins", "features.mel_bins", "Mel bins");
        cc.add_override(cmd, "--sample-rate", "features.sample_rate", "Model sample rate");
        cc.add_override(cmd, "--embed-dim", "model.embed_dim", "Embedding width D");
        cc.add_override(cmd, "--latent-dim", "model.latent_dim", "Classifier latent width");
        cc.add_override(cmd, "--backbone", "model.backbone", "stgram_mfn | toy_cnn");
    };

    // ---- pretrain ------------------------------------------------------
    auto* pre = app.add_subcommand("pretrain", "Stage 1: contrastive pretraining");
    ConfigCli pre_cc;
    std::vector<std::string> pre_data;
    std::string pre_out = "run", pre_cache;
    int pre_interval = 0;
    pre->add_option("--data", pre_data, "Dataset root(s)")->required()->expected(-1);
    pre->add_option("--out", pre_out, "Run directory");
    pre->add_option("--cache-dir", pre_cache, "Log-mel cache directory");
    pre->add_option("--ckpt-interval", pre_interval, "Checkpoint every N epochs");
    add_common_overrides(pre, pre_cc);
    pre_cc.add_override(pre, "--epochs", "pretrain.epochs", "Pretraining epochs");
    pre_cc.add_override(pre, "--lr", "pretrain.learning_rate", "Peak learning rate");
    pre_cc.add_override(pre, "--tau", "pretrain.tau", "Softmax temperature");
    pre_cc.add_override(pre, "--per-id", "pretrain.per_id", "Clips per ID per batch");
    pre_cc.add_override(pre, "--seed", "pretrain.seed", "Stage seed");

    // ---- finetune ------------------------------------------------------
    auto* fin = app.add_subcommand("finetune", "Stage 2: classifier fine-tuning");
    ConfigCli fin_cc;
    std::string fin_from;
    std::vector<std::string> fin_data;
    std::string fin_out = "run", fin_cache;
    int fin_interval = 0;
    fin->add_option("--from", fin_from, "Pretrained checkpoint")->required()
        ->check(CLI::ExistingFile);
    fin->add_option("--data", fin_data, "Dataset root(s)")->required()->expected(-1);
    fin->add_option("--out", fin_out, "Run directory");
    fin->add_option("--cache-dir", fin_cache, "Log-mel cache directory");
    fin->add_option("--ckpt-interval", fin_interval, "Checkpoint every N epochs");
    add_common_overrides(fin, fin_cc);
    fin_cc.add_override(fin, "--epochs", "finetune.epochs", "Fine-tuning epochs");
    fin_cc.add_override(fin, "--lr", "finetune.learning_rate", "Peak learning rate");
    fin_cc.add_override(fin, "--batch-size", "finetune.batch_size", "Batch size");
    fin_cc.add_override(fin, "--margin", "finetune.margin", "Angular margin (radians)");
    fin_cc.add_override(fin, "--scale", "finetune.scale", "Logit scale");
    fin_cc.add_override(fin, "--seed", "finetune.seed", "Stage seed");

    // ---- evaluate ------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "Score the test split and report AUC/pAUC/mAUC");
    ConfigCli ev_cc;
    std::string ev_ckpt;
    std::vector<std::string> ev_data;
    std::string ev_out = "run";
    bool ev_margin = false;
    ev->add_option("--ckpt", ev_ckpt, "Finetuned checkpoint")->required()
        ->check(CLI::ExistingFile);
    ev->add_option("--data", ev_data, "Dataset root(s)")->required()->expected(-1);
    ev->add_option("--out", ev_out, "Run directory");
    ev->add_flag("--score-with-margin", ev_margin,
                 "Apply the training margin to the claimed class when scoring");
    add_common_overrides(ev, ev_cc);
    ev_cc.add_override(ev, "--p", "eval.p", "pAUC false-positive range");

    // ---- tsne ----------------------------------------------------------
    auto* ts = app.add_subcommand("tsne", "Export latents and plot t-SNE per machine type");
    ConfigCli ts_cc;
    std::string ts_ckpt;
    std::vector<std::string> ts_data;
    std::string ts_out = "run";
    double ts_perplexity = 0.0;
    uint64_t ts_seed = 0;
    ts->add_option("--ckpt", ts_ckpt, "Finetuned checkpoint")->required()
        ->check(CLI::ExistingFile);
    ts->add_option("--data", ts_data, "Dataset root(s)")->required()->expected(-1);
    ts->add_option("--out", ts_out, "Run directory");
    ts->add_option("--perplexity", ts_perplexity, "t-SNE perplexity")
        ->check(CLI::PositiveNumber);
    ts->add_option("--seed", ts_seed, "t-SNE seed");
    add_common_overrides(ts, ts_cc);

    // ---- run-all ---------------------------------------------------------
    auto* ra = app.add_subcommand("run-all", "gen-toy -> pretrain -> finetune -> evaluate");
    ConfigCli ra_cc;
    ToySpec ra_toy;
    std::string ra_out = "run";
    ra->add_option("--types", ra_toy.num_types, "Machine types")->check(CLI::PositiveNumber);
    ra->add_option("--ids", ra_toy.ids_per_type, "IDs per type")->check(CLI::PositiveNumber);
    ra->add_option("--clips", ra_toy.clips_per_id, "Clips per ID per split")
        ->check(CLI::PositiveNumber);
    ra->add_option("--seconds", ra_toy.clip_seconds, "Clip length (s)")
        ->check(CLI::PositiveNumber);
    ra->add_option("--sr", ra_toy.sample_rate, "Sample rate")->check(CLI::PositiveNumber);
    ra->add_option("--anomaly-frac", ra_toy.anomaly_fraction_test, "Anomalous test fraction")
        ->check(CLI::Range(0.0, 1.0));
    ra->add_option("--toy-seed", ra_toy.seed, "Toy generator seed");
    ra->add_option("--out", ra_out, "Run directory");
    add_common_overrides(ra, ra_cc);
    ra_cc.add_override(ra, "--pretrain-epochs", "pretrain.epochs", "Pretraining epochs");
    ra_cc.add_override(ra, "--finetune-epochs", "finetune.epochs", "Fine-tuning epochs");
    ra_cc.add_override(ra, "--per-id", "pretrain.per_id", "Clips per ID per batch");
    ra_cc.add_override(ra, "--batch-size", "finetune.batch_size", "Fine-tune batch size");
    ra_cc.add_override(ra, "--seed", "pretrain.seed", "Stage-1 seed");
    ra_cc.add_override(ra, "--finetune-seed", "finetune.seed", "Stage-2 seed");
    ra_cc.add_override(ra, "--p", "eval.p", "pAUC false-positive range");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_toy(toy, gen_out);
        if (pre->parsed()) return cmd_pretrain(pre_cc, pre_data, pre_out, pre_cache, pre_interval);
        if (fin->parsed()) {
            return cmd_finetune(fin_cc, fin_from, fin_data, fin_out, fin_cache, fin_interval);
        }
        if (ev->parsed()) return cmd_evaluate(ev_cc, ev_ckpt, ev_data, ev_out, ev_margin);
        if (ts->parsed()) return cmd_tsne(ts_cc, ts_ckpt, ts_data, ts_out, ts_perplexity, ts_seed);
        if (ra->parsed()) {
            const std::string toy_dir = (fs::path(ra_out) / "toy").string();
            int rc = cmd_gen_toy(ra_toy, toy_dir);
            if (rc != 0) return rc;
            rc = cmd_pretrain(ra_cc, {toy_dir}, ra_out, "", 0);
            if (rc != 0) return rc;
            const std::string pre_ckpt = (fs::path(ra_out) / "checkpoints/pretrained.ckpt").string();
            rc = cmd_finetune(ra_cc, pre_ckpt, {toy_dir}, ra_out, "", 0);
            if (rc != 0) return rc;
            const std::string fin_ckpt = (fs::path(ra_out) / "checkpoints/finetuned.ckpt").string();
            return cmd_evaluate(ra_cc, fin_ckpt, {toy_dir}, ra_out, false);
        }
    } catch (const std::exception& e) {
        std::cerr << "clpscf error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
