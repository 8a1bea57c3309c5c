#include "clpscf/runconfig.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "clpscf/hash.hpp"

namespace clpscf {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& what) {
    try {
        size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for " + what + ": '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& what) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + what + ": '" + v + "'");
    }
}

uint64_t to_u64(const std::string& v, const std::string& what) {
    try {
        size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad seed for " + what + ": '" + v + "'");
    }
}

}  // namespace

void RunConfig::apply(const std::string& section, const std::string& key,
                      const std::string& value) {
    const std::string what = section + "." + key;
    if (section == "data") {
        if (key == "clip_seconds") clip_seconds = to_double(value, what);
        else if (key == "workers") workers = to_int(value, what);
        else throw std::invalid_argument("config: unknown key " + what);
    } else if (section == "features") {
        if (key == "n_fft") feature.n_fft = to_int(value, what);
        else if (key == "hop") feature.hop = to_int(value, what);
        else if (key == "mel_bins") feature.mel_bins = to_int(value, what);
        else if (key == "sample_rate") feature.sample_rate = to_int(value, what);
        else if (key == "log_floor") feature.log_floor = to_double(value, what);
        else throw std::invalid_argument("config: unknown key " + what);
    } else if (section == "model") {
        if (key == "embed_dim") embed_dim = to_int(value, what);
        else if (key == "projector_hidden") projector_hidden = to_int(value, what);
        else if (key == "latent_dim") latent_dim = to_int(value, what);
        else if (key == "backbone") backbone = value;
        else throw std::invalid_argument("config: unknown key " + what);
    } else if (section == "pretrain") {
        if (key == "per_id") pretrain.per_id = to_int(value, what);
        else if (key == "learning_rate") pretrain.learning_rate = to_double(value, what);
        else if (key == "epochs") pretrain.epochs = to_int(value, what);
        else if (key == "tau") pretrain.tau = to_double(value, what);
        else if (key == "seed") pretrain.seed = to_u64(value, what);
        else throw std::invalid_argument("config: unknown key " + what);
    } else if (section == "finetune") {
        if (key == "batch_size") finetune.batch_size = to_int(value, what);
        else if (key == "learning_rate") finetune.learning_rate = to_double(value, what);
        else if (key == "epochs") finetune.epochs = to_int(value, what);
        else if (key == "margin") finetune.margin = to_double(value, what);
        else if (key == "scale") finetune.scale = to_double(value, what);
        else if (key == "seed") finetune.seed = to_u64(value, what);
        else throw std::invalid_argument("config: unknown key " + what);
    } else if (section == "eval") {
        if (key == "p") eval_p = to_double(value, what);
        else if (key == "tsne_perplexity") tsne_perplexity = to_double(value, what);
        else throw std::invalid_argument("config: unknown key " + what);
    } else {
        throw std::invalid_argument("config: unknown section [" + section + "]");
    }
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument("config: malformed section at line " +
                                            std::to_string(lineno));
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: expected key = value at line " +
                                        std::to_string(lineno));
        }
        cfg.apply(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::validate() const {
    if (!(clip_seconds > 0.0)) throw std::invalid_argument("config: data.clip_seconds must be > 0");
    if (workers < 1) throw std::invalid_argument("config: data.workers must be >= 1");
    feature.validate();
    backbone_from_string(backbone);
    pretrain.validate();
    finetune.validate();
    if (!(eval_p > 0.0) || eval_p > 1.0) throw std::invalid_argument("config: eval.p must lie in (0, 1]");
    if (!(tsne_perplexity > 0.0)) throw std::invalid_argument("config: eval.tsne_perplexity must be > 0");
}

std::string RunConfig::to_ini() const {
    char buf[512];
    std::string s;
    s += "[data]\n";
    std::snprintf(buf, sizeof(buf), "clip_seconds = %.17g\nworkers = %d\n", clip_seconds, workers);
    s += buf;
    s += "\n[features]\n";
    std::snprintf(buf, sizeof(buf),
                  "n_fft = %d\nhop = %d\nmel_bins = %d\nsample_rate = %d\nlog_floor = %.17g\n",
                  feature.n_fft, feature.hop, feature.mel_bins, feature.sample_rate,
                  feature.log_floor);
    s += buf;
    s += "\n[model]\n";
    std::snprintf(buf, sizeof(buf),
                  "embed_dim = %d\nprojector_hidden = %d\nlatent_dim = %d\nbackbone = %s\n",
                  embed_dim, projector_hidden, latent_dim, backbone.c_str());
    s += buf;
    s += "\n[pretrain]\n";
    std::snprintf(buf, sizeof(buf),
                  "per_id = %d\nlearning_rate = %.17g\nepochs = %d\ntau = %.17g\nseed = %llu\n",
                  pretrain.per_id, pretrain.learning_rate, pretrain.epochs, pretrain.tau,
                  static_cast<unsigned long long>(pretrain.seed));
    s += buf;
    s += "\n[finetune]\n";
    std::snprintf(buf, sizeof(buf),
                  "batch_size = %d\nlearning_rate = %.17g\nepochs = %d\nmargin = %.17g\n"
                  "scale = %.17g\nseed = %llu\n",
                  finetune.batch_size, finetune.learning_rate, finetune.epochs, finetune.margin,
                  finetune.scale, static_cast<unsigned long long>(finetune.seed));
    s += buf;
    s += "\n[eval]\n";
    std::snprintf(buf, sizeof(buf), "p = %.17g\ntsne_perplexity = %.17g\n", eval_p,
                  tsne_perplexity);
    s += buf;
    return s;
}

std::string RunConfig::hash() const { return fnv1a64_hex(to_ini()); }

ModelConfig RunConfig::model_config(int num_classes) const {
    ModelConfig mc;
    mc.embed_dim = embed_dim;
    mc.projector_hidden = projector_hidden;
    mc.latent_dim = latent_dim;
    mc.num_classes = num_classes;
    mc.backbone = backbone_from_string(backbone);
    mc.feature = feature;
    return mc;
}

LoaderOptions RunConfig::loader_options(const FeatureCache* cache) const {
    LoaderOptions lo;
    lo.clip_seconds = clip_seconds;
    lo.workers = workers;
    lo.cache = cache;
    return lo;
}

}  // namespace clpscf
