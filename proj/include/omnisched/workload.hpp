// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "omnisched/errors.hpp"

#include <nlohmann/json_fwd.hpp>

namespace omnisched {

enum class TaskTag { t2v, i2v, ref2v, edit, sr };
enum class Modality { text, image, video };

TaskTag task_tag_from_string(const std::string& s);
std::string to_string(TaskTag t);
std::string to_string(Modality m);

// One multimodal training example, described only by its token counts.
struct Sample {
    std::string id;
    std::int64_t text_tokens = 0;
    std::int64_t image_tokens = 0;
    std::int64_t video_tokens = 0;
    TaskTag task_tag = TaskTag::t2v;
    double encoder_weight = 1.0;  // relative VAE/text-encoder cost per token

    std::int64_t total_tokens() const {
        return text_tokens + image_tokens + video_tokens;
    }
    std::int64_t visual_tokens() const { return image_tokens + video_tokens; }

    void validate() const;  // throws ValidationError("InvalidSample", ...)
};

// A contiguous run of one sample's tokens of a single modality inside a
// packed sequence.
struct Segment {
    std::string sample_id;
    Modality modality = Modality::text;
    std::int64_t start_offset = 0;
    std::int64_t length = 0;
};

// A fixed-capacity 1D token sequence. Segments are contiguous from offset 0;
// all segments of one sample are adjacent (samples are never split across
// sequences). Trailing padding attends nothing and is attended by nothing.
struct PackedSequence {
    std::int64_t capacity = 0;
    std::vector<Segment> segments;
    std::int64_t padding = 0;

    std::int64_t used_tokens() const { return capacity - padding; }
    void validate() const;
};

// Half-open rectangle of permitted (query, key) attention pairs.
struct Block {
    std::int64_t q_begin = 0;
    std::int64_t q_end = 0;
    std::int64_t k_begin = 0;
    std::int64_t k_end = 0;

    std::int64_t area() const { return (q_end - q_begin) * (k_end - k_begin); }
    bool empty() const { return q_end <= q_begin || k_end <= k_begin; }
    bool overlaps(const Block& other) const {
        return q_begin < other.q_end && other.q_begin < q_end &&
               k_begin < other.k_end && other.k_begin < k_end;
    }
};

// Exact block-structured attention mask. Canonical form: blocks are pairwise
// non-overlapping, so nnz is the plain sum of block areas.
struct MaskSpec {
    std::int64_t length = 0;
    std::vector<Block> blocks;
};

enum class MaskPolicy { full_within_sample, causal_text_bidir_visual };

MaskPolicy mask_policy_from_string(const std::string& s);
std::string to_string(MaskPolicy p);

// First-fit-decreasing packing on total_tokens (ties by sample id). Every
// sample lands in exactly one sequence; the result is sorted by descending
// used tokens. Throws ValidationError("SampleTooLarge", ...) if a sample
// exceeds the capacity. An empty input yields an empty list.
std::vector<PackedSequence> pack_samples(const std::vector<Sample>& samples,
                                         std::int64_t capacity);

// Compiles the cross-modal mask for one packed sequence. No block crosses a
// sample boundary. full_within_sample: one square block per sample.
// causal_text_bidir_visual, within each sample: lower-triangular text->text
// (unit-row rectangles), full visual<->visual, full text<->visual.
MaskSpec build_mask(const PackedSequence& seq, MaskPolicy policy);

// Exact count of permitted (q,k) pairs. Throws
// InvariantError("NonCanonicalMask", ...) if any two blocks overlap.
std::int64_t mask_nnz(const MaskSpec& mask);

// Workload file: {"samples": [...], "generators": [...]}. Generator specs are
// expanded deterministically from their seed; see README for the schema.
std::vector<Sample> parse_workload(const nlohmann::json& j);
std::vector<Sample> load_workload(const std::filesystem::path& path);
nlohmann::json sample_to_json(const Sample& s);

}  // namespace omnisched
