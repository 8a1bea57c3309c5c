#include "clpscf/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace clpscf {

namespace {

constexpr char kMagic[8] = {'C', 'L', 'P', 'S', 'C', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

nlohmann::json feature_to_json(const FeatureConfig& f) {
    return {{"n_fft", f.n_fft},
            {"hop", f.hop},
            {"mel_bins", f.mel_bins},
            {"sample_rate", f.sample_rate},
            {"log_floor", f.log_floor}};
}

FeatureConfig feature_from_json(const nlohmann::json& j) {
    FeatureConfig f;
    f.n_fft = j.at("n_fft").get<int>();
    f.hop = j.at("hop").get<int>();
    f.mel_bins = j.at("mel_bins").get<int>();
    f.sample_rate = j.at("sample_rate").get<int>();
    f.log_floor = j.at("log_floor").get<double>();
    return f;
}

nlohmann::json model_to_json(const ModelConfig& m) {
    return {{"embed_dim", m.embed_dim},
            {"projector_hidden", m.projector_hidden},
            {"latent_dim", m.latent_dim},
            {"num_classes", m.num_classes},
            {"backbone", to_string(m.backbone)},
            {"feature", feature_to_json(m.feature)}};
}

ModelConfig model_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.embed_dim = j.at("embed_dim").get<int>();
    m.projector_hidden = j.at("projector_hidden").get<int>();
    m.latent_dim = j.at("latent_dim").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    m.backbone = backbone_from_string(j.at("backbone").get<std::string>());
    m.feature = feature_from_json(j.at("feature"));
    return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const CheckpointMeta& meta) {
    if (meta.stage != model.stage()) {
        throw std::logic_error("save_checkpoint: meta stage disagrees with model stage");
    }
    if (meta.label_space.size() != model.config().num_classes) {
        throw std::invalid_argument("save_checkpoint: label space size != num_classes");
    }

    const auto params = model.parameters();
    nlohmann::json params_json = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto* p : params) {
        params_json.push_back({{"name", p->name},
                               {"shape", p->value.shape()},
                               {"dtype", "f64"},
                               {"offset", offset},
                               {"count", p->value.numel()}});
        offset += p->value.numel();
    }

    nlohmann::json labels = nlohmann::json::array();
    for (const auto& [type, id] : meta.label_space.entries()) {
        labels.push_back({type, id});
    }

    nlohmann::json header{{"format", "clpscf-checkpoint"},
                          {"version", kVersion},
                          {"stage", to_string(meta.stage)},
                          {"model_config", model_to_json(model.config())},
                          {"label_space", labels},
                          {"training_config_hash", meta.training_config_hash},
                          {"run_config_hash", meta.run_config_hash},
                          {"arcface_margin", meta.arcface_margin},
                          {"arcface_scale", meta.arcface_scale},
                          {"params", params_json}};
    const std::string header_str = header.dump();

    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
    os.write(kMagic, 8);
    os.write(reinterpret_cast<const char*>(&kVersion), 4);
    const uint64_t len = header_str.size();
    os.write(reinterpret_cast<const char*>(&len), 8);
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto* p : params) {
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("short write on checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());

    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("not a clpscf checkpoint: " + path.string());
    }
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    if (!in || len == 0 || len > (64u << 20)) {
        throw std::runtime_error("corrupt checkpoint header: " + path.string());
    }
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path.string());

    const nlohmann::json header = nlohmann::json::parse(header_str);
    if (header.value("format", "") != "clpscf-checkpoint") {
        throw std::runtime_error("unknown checkpoint format tag");
    }

    Checkpoint out;
    const std::string stage_str = header.at("stage").get<std::string>();
    if (stage_str != "finetuned" && stage_str != "pretrained") {
        throw std::runtime_error("unknown checkpoint stage: " + stage_str);
    }
    out.meta.stage = stage_str == "finetuned" ? Stage::finetuned : Stage::pretrained;
    out.meta.training_config_hash = header.value("training_config_hash", "");
    out.meta.run_config_hash = header.value("run_config_hash", "");
    out.meta.arcface_margin = header.value("arcface_margin", 1.0);
    out.meta.arcface_scale = header.value("arcface_scale", 30.0);

    std::vector<std::pair<std::string, int>> entries;
    for (const auto& e : header.at("label_space")) {
        entries.emplace_back(e.at(0).get<std::string>(), e.at(1).get<int>());
    }
    out.meta.label_space = LabelSpace(std::move(entries));

    ModelConfig cfg = model_from_json(header.at("model_config"));
    out.model = std::make_unique<Model>(cfg);
    out.model->init(0);
    if (out.meta.stage == Stage::finetuned) out.model->attach_classifier(0);

    auto params = out.model->parameters();
    const auto& params_json = header.at("params");
    if (params_json.size() != params.size()) {
        throw std::runtime_error("checkpoint parameter group count mismatch (" +
                                 std::to_string(params_json.size()) + " stored, " +
                                 std::to_string(params.size()) + " expected)");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& pj = params_json[i];
        if (pj.at("name").get<std::string>() != params[i]->name) {
            throw std::runtime_error("checkpoint parameter name mismatch: " +
                                     pj.at("name").get<std::string>() + " vs " + params[i]->name);
        }
        const auto shape = pj.at("shape").get<std::vector<int>>();
        if (shape != params[i]->value.shape()) {
            throw std::runtime_error("checkpoint parameter shape mismatch for " + params[i]->name);
        }
        if (pj.at("count").get<uint64_t>() != params[i]->value.numel()) {
            throw std::runtime_error("checkpoint parameter count mismatch for " + params[i]->name);
        }
    }
    for (auto* p : params) {
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated checkpoint blob: " + path.string());
    }
    return out;
}

}  // namespace clpscf
