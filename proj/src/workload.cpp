// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "omnisched/rng.hpp"

namespace omnisched {

TaskTag task_tag_from_string(const std::string& s) {
    if (s == "t2v") return TaskTag::t2v;
    if (s == "i2v") return TaskTag::i2v;
    if (s == "ref2v") return TaskTag::ref2v;
    if (s == "edit") return TaskTag::edit;
    if (s == "sr") return TaskTag::sr;
    throw ValidationError("InvalidSample", "unknown task_tag '" + s + "'");
}

std::string to_string(TaskTag t) {
    switch (t) {
        case TaskTag::t2v: return "t2v";
        case TaskTag::i2v: return "i2v";
        case TaskTag::ref2v: return "ref2v";
        case TaskTag::edit: return "edit";
        case TaskTag::sr: return "sr";
    }
    throw InvariantError("InvalidSample", "unhandled task tag");
}

std::string to_string(Modality m) {
    switch (m) {
        case Modality::text: return "text";
        case Modality::image: return "image";
        case Modality::video: return "video";
    }
    throw InvariantError("InvalidSample", "unhandled modality");
}

void Sample::validate() const {
    if (id.empty()) throw ValidationError("InvalidSample", "sample id must be non-empty");
    if (text_tokens < 0 || image_tokens < 0 || video_tokens < 0) {
        throw ValidationError("InvalidSample",
                              "sample '" + id + "': token counts must be >= 0");
    }
    if (total_tokens() <= 0) {
        throw ValidationError("InvalidSample",
                              "sample '" + id + "': total_tokens must be > 0");
    }
    if (!(encoder_weight > 0) || !std::isfinite(encoder_weight)) {
        throw ValidationError(
            "InvalidSample",
            "sample '" + id + "': encoder_weight must be finite and positive");
    }
}

void PackedSequence::validate() const {
    if (capacity <= 0) {
        throw ValidationError("InvalidPackedSequence", "capacity must be > 0");
    }
    std::int64_t cursor = 0;
    for (const auto& seg : segments) {
        if (seg.start_offset != cursor || seg.length <= 0) {
            throw ValidationError("InvalidPackedSequence",
                                  "segments must be contiguous from offset 0");
        }
        cursor += seg.length;
    }
    if (cursor + padding != capacity || padding < 0) {
        throw ValidationError("InvalidPackedSequence",
                              "sum(lengths) + padding must equal capacity");
    }
    // Segments of one sample must be adjacent: once another sample starts,
    // an id may not reappear.
    std::set<std::string> closed;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i > 0 && segments[i].sample_id != segments[i - 1].sample_id) {
            closed.insert(segments[i - 1].sample_id);
        }
        if (closed.count(segments[i].sample_id) != 0) {
            throw ValidationError("InvalidPackedSequence",
                                  "segments of sample '" + segments[i].sample_id +
                                      "' are not contiguous");
        }
    }
}

MaskPolicy mask_policy_from_string(const std::string& s) {
    if (s == "full_within_sample") return MaskPolicy::full_within_sample;
    if (s == "causal_text_bidir_visual") return MaskPolicy::causal_text_bidir_visual;
    throw ValidationError("UnknownPolicy", "no such mask policy: '" + s + "'");
}

std::string to_string(MaskPolicy p) {
    switch (p) {
        case MaskPolicy::full_within_sample: return "full_within_sample";
        case MaskPolicy::causal_text_bidir_visual: return "causal_text_bidir_visual";
    }
    throw InvariantError("UnknownPolicy", "unhandled mask policy");
}

namespace {

void append_sample_segments(PackedSequence& seq, const Sample& s) {
    std::int64_t offset = seq.capacity - seq.padding;
    auto push = [&](Modality m, std::int64_t len) {
        if (len <= 0) return;
        seq.segments.push_back(Segment{s.id, m, offset, len});
        offset += len;
        seq.padding -= len;
    };
    push(Modality::text, s.text_tokens);
    push(Modality::image, s.image_tokens);
    push(Modality::video, s.video_tokens);
}

}  // namespace

std::vector<PackedSequence> pack_samples(const std::vector<Sample>& samples,
                                         std::int64_t capacity) {
    if (capacity <= 0) {
        throw ValidationError("InvalidCapacity", "capacity must be > 0");
    }
    for (const auto& s : samples) {
        s.validate();
        if (s.total_tokens() > capacity) {
            std::ostringstream os;
            os << "sample '" << s.id << "' has " << s.total_tokens()
               << " tokens > capacity " << capacity;
            throw ValidationError("SampleTooLarge", os.str());
        }
    }

    std::vector<const Sample*> order;
    order.reserve(samples.size());
    for (const auto& s : samples) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const Sample* a, const Sample* b) {
        if (a->total_tokens() != b->total_tokens())
            return a->total_tokens() > b->total_tokens();
        return a->id < b->id;
    });

    std::vector<PackedSequence> seqs;
    for (const Sample* s : order) {
        PackedSequence* target = nullptr;
        for (auto& seq : seqs) {
            if (seq.padding >= s->total_tokens()) {
                target = &seq;
                break;
            }
        }
        if (target == nullptr) {
            seqs.push_back(PackedSequence{capacity, {}, capacity});
            target = &seqs.back();
        }
        append_sample_segments(*target, *s);
    }

    std::stable_sort(seqs.begin(), seqs.end(),
                     [](const PackedSequence& a, const PackedSequence& b) {
                         return a.used_tokens() > b.used_tokens();
                     });
    return seqs;
}

namespace {

struct SampleSpan {
    std::string id;
    std::int64_t begin = 0;
    std::int64_t end = 0;      // full span, half-open
    std::int64_t text_len = 0; // text tokens lead the span
};

std::vector<SampleSpan> sample_spans(const PackedSequence& seq) {
    std::vector<SampleSpan> spans;
    for (const auto& seg : seq.segments) {
        if (spans.empty() || spans.back().id != seg.sample_id) {
            spans.push_back(SampleSpan{seg.sample_id, seg.start_offset,
                                       seg.start_offset + seg.length, 0});
        } else {
            spans.back().end = seg.start_offset + seg.length;
        }
        if (seg.modality == Modality::text) spans.back().text_len += seg.length;
    }
    return spans;
}

}  // namespace

MaskSpec build_mask(const PackedSequence& seq, MaskPolicy policy) {
    seq.validate();
    MaskSpec mask;
    mask.length = seq.capacity;
    for (const auto& span : sample_spans(seq)) {
        switch (policy) {
            case MaskPolicy::full_within_sample:
                mask.blocks.push_back(Block{span.begin, span.end, span.begin, span.end});
                break;
            case MaskPolicy::causal_text_bidir_visual: {
                const std::int64_t tb = span.begin;
                const std::int64_t te = span.begin + span.text_len;  // text span
                const std::int64_t ve = span.end;                    // visual span [te, ve)
                // causal text->text, one unit-row rectangle per text row
                for (std::int64_t q = tb; q < te; ++q) {
                    mask.blocks.push_back(Block{q, q + 1, tb, q + 1});
                }
                if (te < ve) {
                    // full visual<->visual
                    mask.blocks.push_back(Block{te, ve, te, ve});
                    if (span.text_len > 0) {
                        // full text<->visual, both directions
                        mask.blocks.push_back(Block{tb, te, te, ve});
                        mask.blocks.push_back(Block{te, ve, tb, te});
                    }
                }
                break;
            }
        }
    }
    return mask;
}

std::int64_t mask_nnz(const MaskSpec& mask) {
    // Overlap scan over blocks sorted by query range; only blocks whose query
    // ranges intersect can overlap.
    std::vector<const Block*> sorted;
    sorted.reserve(mask.blocks.size());
    for (const auto& b : mask.blocks) {
        if (!b.empty()) sorted.push_back(&b);
    }
    std::sort(sorted.begin(), sorted.end(), [](const Block* a, const Block* b) {
        return a->q_begin < b->q_begin;
    });
    std::int64_t nnz = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        nnz += sorted[i]->area();
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            if (sorted[j]->q_begin >= sorted[i]->q_end) break;
            if (sorted[i]->overlaps(*sorted[j])) {
                throw InvariantError("NonCanonicalMask",
                                     "mask blocks overlap; canonical form required");
            }
        }
    }
    return nnz;
}

namespace {

// Deterministic expansion of one generator spec. Task mix weights choose the
// tag; per-modality lengths are drawn uniformly from [min,max] ranges, with
// modalities absent from a task zeroed (t2v has no image tokens, sr has no
// text tokens).
std::vector<Sample> expand_generator(const nlohmann::json& g, std::size_t gen_index) {
    const std::int64_t count = g.at("count").get<std::int64_t>();
    const std::uint64_t seed = g.at("seed").get<std::uint64_t>();
    if (count < 0) throw ValidationError("InvalidSample", "generator count must be >= 0");

    std::vector<std::pair<TaskTag, double>> mix;
    if (g.contains("modality_mix")) {
        for (const auto& [key, value] : g.at("modality_mix").items()) {
            mix.emplace_back(task_tag_from_string(key), value.get<double>());
        }
        std::sort(mix.begin(), mix.end(), [](const auto& a, const auto& b) {
            return to_string(a.first) < to_string(b.first);
        });
    } else {
        mix.emplace_back(TaskTag::t2v, 1.0);
    }
    double total_weight = 0;
    for (const auto& [tag, w] : mix) {
        if (w < 0) throw ValidationError("InvalidSample", "modality_mix weights must be >= 0");
        total_weight += w;
    }
    if (total_weight <= 0) {
        throw ValidationError("InvalidSample", "modality_mix weights sum to zero");
    }

    auto range_of = [&](const char* key, std::int64_t lo_def,
                        std::int64_t hi_def) -> std::pair<std::int64_t, std::int64_t> {
        if (!g.contains("length_distribution") ||
            !g.at("length_distribution").contains(key)) {
            return {lo_def, hi_def};
        }
        const auto& r = g.at("length_distribution").at(key);
        return {r.at(0).get<std::int64_t>(), r.at(1).get<std::int64_t>()};
    };
    const auto text_range = range_of("text", 16, 128);
    const auto image_range = range_of("image", 64, 512);
    const auto video_range = range_of("video", 256, 4096);

    Rng rng(seed);
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        Sample s;
        std::ostringstream id;
        id << "g" << gen_index << "-" << seed << "-" << i;
        s.id = id.str();

        double pick = rng.uniform01() * total_weight;
        s.task_tag = mix.back().first;
        for (const auto& [tag, w] : mix) {
            if (pick < w) {
                s.task_tag = tag;
                break;
            }
            pick -= w;
        }

        s.text_tokens = rng.uniform_int(text_range.first, text_range.second);
        s.image_tokens = rng.uniform_int(image_range.first, image_range.second);
        s.video_tokens = rng.uniform_int(video_range.first, video_range.second);
        switch (s.task_tag) {
            case TaskTag::t2v: s.image_tokens = 0; break;
            case TaskTag::sr: s.text_tokens = 0; break;
            default: break;
        }
        s.encoder_weight = rng.uniform(0.5, 2.0);
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

Sample sample_from_json(const nlohmann::json& j) {
    Sample s;
    try {
        s.id = j.at("id").get<std::string>();
        s.text_tokens = j.value("text_tokens", std::int64_t{0});
        s.image_tokens = j.value("image_tokens", std::int64_t{0});
        s.video_tokens = j.value("video_tokens", std::int64_t{0});
        s.task_tag = task_tag_from_string(j.value("task_tag", std::string("t2v")));
        s.encoder_weight = j.value("encoder_weight", 1.0);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("ParseError", std::string("sample: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace

nlohmann::json sample_to_json(const Sample& s) {
    return nlohmann::json{
        {"id", s.id},
        {"text_tokens", s.text_tokens},
        {"image_tokens", s.image_tokens},
        {"video_tokens", s.video_tokens},
        {"task_tag", to_string(s.task_tag)},
        {"encoder_weight", s.encoder_weight},
    };
}

std::vector<Sample> parse_workload(const nlohmann::json& j) {
    std::vector<Sample> samples;
    try {
        if (j.contains("samples")) {
            for (const auto& sj : j.at("samples")) samples.push_back(sample_from_json(sj));
        }
        if (j.contains("generators")) {
            std::size_t index = 0;
            for (const auto& g : j.at("generators")) {
                auto generated = expand_generator(g, index++);
                samples.insert(samples.end(), generated.begin(), generated.end());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("ParseError", std::string("workload: ") + e.what());
    }
    return samples;
}

std::vector<Sample> load_workload(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("FileNotFound",
                              "cannot open workload file: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("ParseError", path.string() + ": " + e.what());
    }
    return parse_workload(j);
}

}  // namespace omnisched
