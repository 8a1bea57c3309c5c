#include "clpscf/scoring.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "clpscf/losses.hpp"

namespace clpscf {

namespace {

void require_finetuned(const Checkpoint& ckpt) {
    if (!ckpt.model) throw std::invalid_argument("scoring: missing model");
    if (ckpt.meta.stage != Stage::finetuned || !ckpt.model->has_classifier()) {
        throw std::invalid_argument("scoring: checkpoint stage must be 'finetuned'");
    }
}

double score_from_logits(const std::vector<double>& logits, int claimed_class) {
    return -log_softmax_at(logits, claimed_class);
}

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

double anomaly_score(Checkpoint& ckpt, const AudioClip& clip, int claimed_class,
                     bool with_margin) {
    require_finetuned(ckpt);
    Model& model = *ckpt.model;
    if (claimed_class < 0 || claimed_class >= model.config().num_classes) {
        throw std::invalid_argument("anomaly_score: claimed class out of range");
    }
    auto [z, h] = model.latent_clips({&clip});
    std::vector<double> row(h.data(), h.data() + h.dim(1));
    const auto logits =
        cosine_logits(row, model.arcface_weight().value, ckpt.meta.arcface_scale,
                      with_margin ? ckpt.meta.arcface_margin : 0.0,
                      with_margin ? claimed_class : -1);
    return score_from_logits(logits, claimed_class);
}

std::vector<ScoredClip> score_clips(Checkpoint& ckpt, const std::vector<AudioClip>& clips,
                                    const ScoreOptions& opts) {
    require_finetuned(ckpt);
    if (clips.empty()) throw std::invalid_argument("score_clips: no clips");
    Model& model = *ckpt.model;
    const LabelSpace& labels = ckpt.meta.label_space;

    for (const auto& c : clips) {
        if (!labels.try_index_of(c.machine_type, c.machine_id)) {
            throw std::invalid_argument("score_clips: machine " + c.machine_type + ":" +
                                        std::to_string(c.machine_id) + " not in label space");
        }
    }

    ClipProvider provider(clips, model.config().feature.sample_rate, opts.loader);
    std::vector<ScoredClip> out;
    out.reserve(clips.size());

    const size_t n = clips.size();
    const size_t bs = static_cast<size_t>(std::max(opts.batch_size, 1));
    for (size_t start = 0; start < n; start += bs) {
        const size_t end = std::min(n, start + bs);
        std::vector<size_t> indices(end - start);
        for (size_t i = start; i < end; ++i) indices[i - start] = i;
        auto ptrs = provider.materialize(indices);
        ClipBatch batch = make_batch(ptrs, model.config().feature, opts.loader.cache,
                                     opts.loader.workers);
        auto [z, h] = model.forward_latent(batch);
        for (size_t i = start; i < end; ++i) {
            const AudioClip& clip = clips[i];
            const int claimed = labels.index_of(clip.machine_type, clip.machine_id);
            const size_t row_idx = i - start;
            std::vector<double> row(h.data() + h.idx(static_cast<int>(row_idx), 0),
                                    h.data() + h.idx(static_cast<int>(row_idx), 0) + h.dim(1));
            const auto logits = cosine_logits(row, model.arcface_weight().value,
                                              ckpt.meta.arcface_scale,
                                              opts.with_margin ? ckpt.meta.arcface_margin : 0.0,
                                              opts.with_margin ? claimed : -1);
            ScoredClip sc;
            sc.claimed_class = claimed;
            sc.predicted_class = argmax(logits);
            sc.record.clip_ref = clip.source_path.empty()
                                     ? clip.machine_type + ":" + std::to_string(clip.machine_id) +
                                           "#" + std::to_string(i)
                                     : clip.source_path;
            sc.record.machine_type = clip.machine_type;
            sc.record.machine_id = clip.machine_id;
            sc.record.score = score_from_logits(logits, claimed);
            sc.record.anomalous = clip.condition == Condition::anomalous;
            out.push_back(std::move(sc));
        }
    }
    return out;
}

void write_score_csv(const std::filesystem::path& path, const std::vector<ScoredClip>& scored,
                     const LabelSpace& labels) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write score CSV: " + path.string());
    os << "clip,machine_type,machine_id,truth,score,predicted_id\n";
    char buf[64];
    for (const auto& s : scored) {
        const auto& [ptype, pid] = labels.entry(s.predicted_class);
        std::snprintf(buf, sizeof(buf), "%.12f", s.record.score);
        os << s.record.clip_ref << ',' << s.record.machine_type << ',' << s.record.machine_id
           << ',' << (s.record.anomalous ? "anomalous" : "normal") << ',' << buf << ',' << ptype
           << ':' << pid << '\n';
    }
}

std::vector<AnomalyRecord> read_score_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read score CSV: " + path.string());
    std::vector<AnomalyRecord> records;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream ss(line);
        std::string clip, type, id, truth, score, predicted;
        if (!std::getline(ss, clip, ',') || !std::getline(ss, type, ',') ||
            !std::getline(ss, id, ',') || !std::getline(ss, truth, ',') ||
            !std::getline(ss, score, ',') || !std::getline(ss, predicted)) {
            throw std::runtime_error("malformed score CSV line: " + line);
        }
        AnomalyRecord r;
        r.clip_ref = clip;
        r.machine_type = type;
        r.machine_id = std::stoi(id);
        r.score = std::stod(score);
        r.anomalous = truth == "anomalous";
        records.push_back(std::move(r));
    }
    return records;
}

EvalReport evaluate(Checkpoint& ckpt, const std::vector<AudioClip>& clips, double p,
                    const ScoreOptions& opts) {
    const auto scored = score_clips(ckpt, clips, opts);
    std::vector<AnomalyRecord> records;
    records.reserve(scored.size());
    for (const auto& s : scored) records.push_back(s.record);
    return evaluate_records(records, p);
}

std::vector<LatentRow> export_latents(Checkpoint& ckpt, const std::vector<AudioClip>& clips,
                                      const LoaderOptions& loader, int batch_size) {
    require_finetuned(ckpt);
    if (clips.empty()) throw std::invalid_argument("export_latents: no clips");
    Model& model = *ckpt.model;

    ClipProvider provider(clips, model.config().feature.sample_rate, loader);
    std::vector<LatentRow> rows;
    rows.reserve(clips.size());

    const size_t n = clips.size();
    const size_t bs = static_cast<size_t>(std::max(batch_size, 1));
    for (size_t start = 0; start < n; start += bs) {
        const size_t end = std::min(n, start + bs);
        std::vector<size_t> indices(end - start);
        for (size_t i = start; i < end; ++i) indices[i - start] = i;
        auto ptrs = provider.materialize(indices);
        ClipBatch batch = make_batch(ptrs, model.config().feature, loader.cache, loader.workers);
        auto [z, h] = model.forward_latent(batch);
        for (size_t i = start; i < end; ++i) {
            const AudioClip& clip = clips[i];
            const int r = static_cast<int>(i - start);
            LatentRow row;
            row.clip_ref = clip.source_path.empty()
                               ? clip.machine_type + "#" + std::to_string(i)
                               : clip.source_path;
            row.machine_type = clip.machine_type;
            row.machine_id = clip.machine_id;
            row.anomalous = clip.condition == Condition::anomalous;
            row.latent.assign(h.data() + h.idx(r, 0), h.data() + h.idx(r, 0) + h.dim(1));
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_latent_csv(const std::filesystem::path& path, const std::vector<LatentRow>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write latent CSV: " + path.string());
    if (rows.empty()) return;
    os << "clip,machine_type,machine_id,truth";
    for (size_t d = 0; d < rows[0].latent.size(); ++d) os << ",h" << d;
    os << '\n';
    char buf[64];
    for (const auto& r : rows) {
        os << r.clip_ref << ',' << r.machine_type << ',' << r.machine_id << ','
           << (r.anomalous ? "anomalous" : "normal");
        for (double v : r.latent) {
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            os << ',' << buf;
        }
        os << '\n';
    }
}

}  // namespace clpscf
