// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "omnisched/rng.hpp"
#include "omnisched/workload.hpp"
#include "oracles.hpp"

using namespace omnisched;

namespace {

Sample text_sample(const std::string& id, std::int64_t tokens) {
    Sample s;
    s.id = id;
    s.text_tokens = tokens;
    return s;
}

Sample mixed_sample(const std::string& id, std::int64_t text, std::int64_t image,
                    std::int64_t video) {
    Sample s;
    s.id = id;
    s.text_tokens = text;
    s.image_tokens = image;
    s.video_tokens = video;
    return s;
}

std::vector<std::int64_t> used_tokens(const std::vector<PackedSequence>& seqs) {
    std::vector<std::int64_t> out;
    for (const auto& s : seqs) out.push_back(s.used_tokens());
    return out;
}

}  // namespace

TEST_CASE("pack_samples: sizes [7,5,4] at capacity 12 pack into 2 sequences") {
    const std::vector<Sample> samples = {text_sample("a", 7), text_sample("b", 5),
                                         text_sample("c", 4)};
    const auto seqs = pack_samples(samples, 12);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].used_tokens() == 12);
    CHECK(seqs[0].padding == 0);
    CHECK(seqs[1].used_tokens() == 4);
    CHECK(seqs[1].padding == 8);
    // exhaustive oracle confirms 2 bins is optimal
    CHECK(oracles::bin_packing_opt({7, 5, 4}, 12) == 2);
}

TEST_CASE("pack_samples: exact-capacity sample gives zero padding") {
    const auto seqs = pack_samples({text_sample("a", 64)}, 64);
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].padding == 0);
}

TEST_CASE("pack_samples: [3,3,3] at capacity 4 needs three sequences") {
    const auto seqs = pack_samples(
        {text_sample("a", 3), text_sample("b", 3), text_sample("c", 3)}, 4);
    REQUIRE(seqs.size() == 3);
    for (const auto& s : seqs) CHECK(s.padding == 1);
    CHECK(oracles::bin_packing_opt({3, 3, 3}, 4) == 3);
}

TEST_CASE("pack_samples: oversized sample and empty input") {
    CHECK_THROWS_AS(pack_samples({text_sample("big", 20)}, 12), ValidationError);
    CHECK(pack_samples({}, 12).empty());
}

TEST_CASE("pack_samples: conservation and FFD bound on random instances") {
    Rng rng(20260810);
    for (int iter = 0; iter < 300; ++iter) {
        const std::int64_t capacity = rng.uniform_int(4, 40);
        const int n = static_cast<int>(rng.uniform_int(1, 12));
        std::vector<Sample> samples;
        std::vector<std::int64_t> sizes;
        std::multiset<std::string> input_ids;
        for (int i = 0; i < n; ++i) {
            const std::int64_t sz = rng.uniform_int(1, capacity);
            samples.push_back(text_sample("s" + std::to_string(i), sz));
            sizes.push_back(sz);
            input_ids.insert(samples.back().id);
        }
        const auto seqs = pack_samples(samples, capacity);

        std::multiset<std::string> packed_ids;
        for (const auto& seq : seqs) {
            seq.validate();
            std::set<std::string> seen;
            for (const auto& seg : seq.segments) seen.insert(seg.sample_id);
            for (const auto& id : seen) packed_ids.insert(id);
        }
        CHECK(packed_ids == input_ids);

        const int opt = oracles::bin_packing_opt(sizes, capacity);
        CHECK(static_cast<double>(seqs.size()) <=
              11.0 / 9.0 * static_cast<double>(opt) + 1.0);
        // Sorted by descending used tokens.
        const auto used = used_tokens(seqs);
        CHECK(std::is_sorted(used.begin(), used.end(), std::greater<>()));
    }
}

TEST_CASE("build_mask full_within_sample: nnz matches dense enumeration") {
    const auto seqs = pack_samples({text_sample("a", 3), text_sample("b", 5)}, 8);
    REQUIRE(seqs.size() == 1);
    const auto mask = build_mask(seqs[0], MaskPolicy::full_within_sample);
    CHECK(mask_nnz(mask) == 9 + 25);
    CHECK(oracles::popcount(oracles::dense_of(mask)) == 34);
}

TEST_CASE("build_mask full_within_sample: single sample equals full attention") {
    const auto seqs = pack_samples({text_sample("a", 6)}, 6);
    const auto mask = build_mask(seqs[0], MaskPolicy::full_within_sample);
    CHECK(mask_nnz(mask) == 36);
}

TEST_CASE("build_mask causal_text_bidir_visual: 2 text + 2 visual tokens") {
    const auto seqs = pack_samples({mixed_sample("a", 2, 0, 2)}, 4);
    const auto mask = build_mask(seqs[0], MaskPolicy::causal_text_bidir_visual);
    // Enumerate the 4x4 mask by the rule: causal text->text, full
    // visual<->visual, full text<->visual.
    oracles::DenseMask expected(4, std::vector<bool>(4, false));
    for (int q = 0; q < 2; ++q) {
        for (int k = 0; k <= q; ++k) expected[q][k] = true;  // causal text
    }
    for (int q = 2; q < 4; ++q) {
        for (int k = 2; k < 4; ++k) expected[q][k] = true;  // visual<->visual
    }
    for (int q = 0; q < 2; ++q) {
        for (int k = 2; k < 4; ++k) {
            expected[q][k] = true;  // text->visual
            expected[k][q] = true;  // visual->text
        }
    }
    CHECK(oracles::popcount(expected) == 15);
    CHECK(oracles::dense_of(mask) == expected);
    CHECK(mask_nnz(mask) == 15);
}

TEST_CASE("build_mask: no permitted pair crosses a sample boundary") {
    Rng rng(7);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<Sample> samples;
        for (int i = 0; i < 4; ++i) {
            samples.push_back(mixed_sample("s" + std::to_string(i),
                                           rng.uniform_int(0, 4),
                                           rng.uniform_int(0, 4),
                                           rng.uniform_int(1, 6)));
        }
        const auto seqs = pack_samples(samples, 16);
        for (const auto& seq : seqs) {
            std::vector<std::string> owner(static_cast<std::size_t>(seq.capacity));
            for (const auto& seg : seq.segments) {
                for (std::int64_t i = 0; i < seg.length; ++i) {
                    owner[static_cast<std::size_t>(seg.start_offset + i)] =
                        seg.sample_id;
                }
            }
            for (auto policy : {MaskPolicy::full_within_sample,
                                MaskPolicy::causal_text_bidir_visual}) {
                const auto dense = oracles::dense_of(build_mask(seq, policy));
                for (std::size_t q = 0; q < dense.size(); ++q) {
                    for (std::size_t k = 0; k < dense.size(); ++k) {
                        if (!dense[q][k]) continue;
                        CHECK(!owner[q].empty());
                        CHECK(owner[q] == owner[k]);
                    }
                }
            }
        }
    }
}

TEST_CASE("mask_nnz: boundary cases and the overlap guard") {
    MaskSpec empty;
    empty.length = 8;
    CHECK(mask_nnz(empty) == 0);

    MaskSpec one;
    one.length = 8;
    one.blocks.push_back({0, 4, 0, 4});
    CHECK(mask_nnz(one) == 16);

    MaskSpec two;
    two.length = 8;
    two.blocks.push_back({0, 3, 0, 3});
    two.blocks.push_back({3, 8, 3, 8});
    CHECK(mask_nnz(two) == 34);

    MaskSpec overlapping;
    overlapping.length = 8;
    overlapping.blocks.push_back({0, 4, 0, 4});
    overlapping.blocks.push_back({2, 6, 2, 6});
    CHECK_THROWS_AS(mask_nnz(overlapping), InvariantError);
}

TEST_CASE("mask_nnz agrees with dense popcount on packed workloads") {
    Rng rng(99);
    for (int iter = 0; iter < 30; ++iter) {
        std::vector<Sample> samples;
        const int n = static_cast<int>(rng.uniform_int(1, 6));
        for (int i = 0; i < n; ++i) {
            samples.push_back(mixed_sample("s" + std::to_string(i),
                                           rng.uniform_int(0, 8),
                                           rng.uniform_int(0, 8),
                                           rng.uniform_int(1, 16)));
        }
        for (const auto& seq : pack_samples(samples, 64)) {
            for (auto policy : {MaskPolicy::full_within_sample,
                                MaskPolicy::causal_text_bidir_visual}) {
                const auto mask = build_mask(seq, policy);
                CHECK(mask_nnz(mask) == oracles::popcount(oracles::dense_of(mask)));
            }
        }
    }
}

TEST_CASE("load_workload: explicit samples keep file order") {
    const nlohmann::json j = {
        {"samples",
         {{{"id", "x"}, {"text_tokens", 3}, {"task_tag", "t2v"}},
          {{"id", "y"}, {"video_tokens", 9}, {"task_tag", "i2v"}}}}};
    const auto samples = parse_workload(j);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].id == "x");
    CHECK(samples[1].id == "y");
    CHECK(samples[1].task_tag == TaskTag::i2v);
}

TEST_CASE("load_workload: generators are deterministic") {
    const nlohmann::json j = {
        {"generators",
         {{{"count", 10},
           {"seed", 7},
           {"modality_mix", {{"t2v", 0.5}, {"i2v", 0.5}}}}}}};
    const auto a = parse_workload(j);
    const auto b = parse_workload(j);
    REQUIRE(a.size() == 10);
    REQUIRE(b.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].text_tokens == b[i].text_tokens);
        CHECK(a[i].image_tokens == b[i].image_tokens);
        CHECK(a[i].video_tokens == b[i].video_tokens);
        CHECK(a[i].task_tag == b[i].task_tag);
        CHECK(a[i].encoder_weight == b[i].encoder_weight);
    }
}

TEST_CASE("load_workload: zero-token sample is rejected") {
    const nlohmann::json j = {{"samples", {{{"id", "z"}, {"text_tokens", 0}}}}};
    CHECK_THROWS_AS(parse_workload(j), ValidationError);
    try {
        parse_workload(j);
        FAIL("expected InvalidSample");
    } catch (const ValidationError& e) {
        CHECK(e.code() == "InvalidSample");
    }
}
