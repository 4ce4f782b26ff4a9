// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "omnisched/cluster.hpp"
#include "omnisched/rng.hpp"

using namespace omnisched;

namespace {

ClusterSpec plain_spec() {
    ClusterSpec s;
    s.num_nodes = 2;
    s.gpus_per_node = 2;
    s.peak_flops = 1e12;
    s.intra_node_bw = 100e9;
    s.inter_node_bw = 10e9;
    s.host_link_bw = 25e9;
    s.link_latency_intra = 1e-6;
    s.link_latency_inter = 5e-6;
    s.compute_efficiency = 1.0;
    s.overlap_efficiency = 0.0;
    return s;
}

ModelShape small_shape() {
    ModelShape m;
    m.hidden_dim = 64;
    m.num_heads = 8;
    m.head_dim = 8;
    m.num_layers = 2;
    m.bytes_per_element = 2;
    return m;
}

}  // namespace

TEST_CASE("layer_compute_time: hand-evaluated reference constant") {
    const auto spec = plain_spec();
    const auto shape = small_shape();
    // 24 * 128 * 64^2 + 4 * 128^2 * 64 over 1e12 FLOP/s
    const double expected = (24.0 * 128 * 64 * 64 + 4.0 * 16384 * 64) / 1e12;
    CHECK(layer_compute_time(shape, 128, 128 * 128, spec) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("layer_compute_time: zero tokens cost nothing") {
    CHECK(layer_compute_time(small_shape(), 0, 0, plain_spec()) == 0.0);
}

TEST_CASE("layer_compute_time: attention component is linear in nnz") {
    const auto spec = plain_spec();
    const auto shape = small_shape();
    const double base = layer_compute_time(shape, 64, 0, spec);
    const double one = layer_compute_time(shape, 64, 1000, spec) - base;
    const double two = layer_compute_time(shape, 64, 2000, spec) - base;
    CHECK(two == doctest::Approx(2.0 * one).epsilon(1e-12));
}

TEST_CASE("message_time: alpha-beta behaviour") {
    auto spec = plain_spec();
    CHECK(message_time(0, Path::intra, spec) == spec.link_latency_intra);
    spec.link_latency_inter = 0.0;
    CHECK(message_time(static_cast<std::int64_t>(spec.inter_node_bw), Path::inter,
                       spec) == doctest::Approx(1.0));
    CHECK(message_time(1000, Path::host, spec) ==
          doctest::Approx(1000.0 / spec.host_link_bw));
}

TEST_CASE("message_time: FP8 factor halves the bandwidth term only") {
    auto spec = plain_spec();
    spec.link_latency_intra = 3e-6;
    const double base = message_time(80000, Path::intra, spec);
    spec.quant_comm_factor = 0.5;
    const double quant = message_time(80000, Path::intra, spec);
    CHECK(quant - spec.link_latency_intra ==
          doctest::Approx((base - spec.link_latency_intra) / 2).epsilon(1e-12));
}

TEST_CASE("ulysses_alltoall_bytes: formula values") {
    auto shape = small_shape();
    shape.hidden_dim = 64;
    shape.num_heads = 8;
    shape.head_dim = 8;
    CHECK(ulysses_alltoall_bytes(1024, shape, 1) == 0);
    CHECK(ulysses_alltoall_bytes(1024, shape, 2) == 65536);  // 0.5*1024*64*2
    const auto u2 = ulysses_alltoall_bytes(4096, shape, 2);
    const auto u4 = ulysses_alltoall_bytes(4096, shape, 4);
    CHECK(u4 * 2 == u2 * 3);  // (3/4) / (1/2) = 1.5x
}

TEST_CASE("ulysses_alltoall_bytes: padding and head divisibility") {
    const auto shape = small_shape();  // 8 heads
    CHECK_THROWS_AS(ulysses_alltoall_bytes(64, shape, 3), ValidationError);
    // 100 tokens at degree 8 pad to 104.
    CHECK(ulysses_alltoall_bytes(100, shape, 8) ==
          7 * (104 / 8) * shape.hidden_dim * shape.bytes_per_element);
}

TEST_CASE("cost functions are monotone") {
    Rng rng(42);
    const auto spec = plain_spec();
    const auto shape = small_shape();
    for (int i = 0; i < 200; ++i) {
        const std::int64_t t1 = rng.uniform_int(0, 4096);
        const std::int64_t t2 = t1 + rng.uniform_int(0, 4096);
        const std::int64_t n1 = rng.uniform_int(0, t1 * t1);
        const std::int64_t n2 = n1 + rng.uniform_int(0, 1 << 20);
        CHECK(layer_compute_time(shape, t1, n1, spec) <=
              layer_compute_time(shape, t2, n1, spec));
        CHECK(layer_compute_time(shape, t1, n1, spec) <=
              layer_compute_time(shape, t1, n2, spec));
        const std::int64_t b1 = rng.uniform_int(0, 1 << 24);
        const std::int64_t b2 = b1 + rng.uniform_int(0, 1 << 24);
        for (auto path : {Path::intra, Path::inter, Path::host}) {
            CHECK(message_time(b1, path, spec) <= message_time(b2, path, spec));
        }
    }
}

TEST_CASE("neutral quantization factors reproduce the unquantized model") {
    auto spec = default_cluster();
    spec.quant_speedup = 1.0;
    spec.quant_comm_factor = 1.0;
    ClusterSpec baseline = spec;
    const auto shape = default_model_shape();
    for (std::int64_t tokens : {0, 100, 4096}) {
        CHECK(layer_compute_time(shape, tokens, tokens * tokens, spec) ==
              layer_compute_time(shape, tokens, tokens * tokens, baseline));
    }
    for (auto path : {Path::intra, Path::inter, Path::host}) {
        CHECK(message_time(123456, path, spec) == message_time(123456, path, baseline));
    }
}

TEST_CASE("cluster JSON round trip and validation") {
    const auto spec = default_cluster();
    const auto j = cluster_to_json(spec);
    const auto back = cluster_from_json(j);
    CHECK(back.num_nodes == spec.num_nodes);
    CHECK(back.peak_flops == spec.peak_flops);
    CHECK(back.quant_speedup == spec.quant_speedup);

    auto bad = j;
    bad["compute_efficiency"] = 0.0;
    CHECK_THROWS_AS(cluster_from_json(bad), ValidationError);

    ModelShape shape;
    shape.hidden_dim = 100;
    shape.num_heads = 8;
    shape.head_dim = 8;
    CHECK_THROWS_AS(shape.validate(), ValidationError);
}

TEST_CASE("path parsing") {
    CHECK(path_from_string("intra") == Path::intra);
    CHECK(path_from_string("host") == Path::host);
    CHECK_THROWS_AS(path_from_string("quantum"), ValidationError);
}
