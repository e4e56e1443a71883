// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "supernas/supernet.hpp"
#include "supernas/training.hpp"
#include "test_util.hpp"

using namespace supernas;
using testutil::random_uniform_tensor;

namespace {

bool tensors_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

// Dense parameter count of the widest toy candidate, written out long-hand.
int64_t toy_allmax_param_count(bool prelu) {
    const int w = 16;
    int64_t n = 0;
    int in_w = 3;
    for (int b = 0; b < 3; ++b) {
        n += int64_t(w) * in_w * 9 + 2 * w;  // conv1 + bn1
        n += int64_t(w) * w * 9 + 2 * w;     // conv2 + bn2
        if (prelu) n += 2 * w;
        n += int64_t(w) * in_w;  // 1x1 projection
        in_w = w;
    }
    n += int64_t(4) * w + 4;  // classifier
    return n;
}

}  // namespace

TEST_CASE("initialization is deterministic and correctly shaped") {
    const SearchSpace sp = toy_space();
    const SupernetParams a = init_supernet(sp, 123);
    const SupernetParams b = init_supernet(sp, 123);
    const SupernetParams c = init_supernet(sp, 124);

    CHECK(a.stage == 1);
    for (const auto& layer : a.layers) CHECK(layer.size() == 1);
    REQUIRE(a.blocks.size() == 3);

    bool identical = true, differs = false;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        identical = identical && tensors_equal(a.layers[l][0].conv_w.value, b.layers[l][0].conv_w.value);
        differs = differs || !tensors_equal(a.layers[l][0].conv_w.value, c.layers[l][0].conv_w.value);
    }
    CHECK(identical);
    CHECK(differs);

    CHECK(a.layers[0][0].conv_w.value.shape() == std::vector<int>{16, 3, 3, 3});
    CHECK(a.layers[1][0].conv_w.value.shape() == std::vector<int>{16, 16, 3, 3});
    CHECK(a.blocks[0].proj_w.value.shape() == std::vector<int>{16, 3, 1, 1});
    CHECK(a.blocks[1].proj_w.value.shape() == std::vector<int>{16, 16, 1, 1});
    CHECK(a.fc_w.value.shape() == std::vector<int>{4, 16});

    for (int64_t i = 0; i < 16; ++i) {
        CHECK(a.layers[0][0].bn_gamma.value[i] == 1.0);
        CHECK(a.layers[0][0].bn_beta.value[i] == 0.0);
        CHECK(a.layers[0][0].bn_running_var[i] == 1.0);
    }
}

TEST_CASE("he initialization variance is close to 2/fan_in on large tensors") {
    SpaceConfig sc;
    sc.name = "wide";
    sc.input_shape = {64, 8, 8};
    sc.num_classes = 2;
    sc.has_stem = true;
    sc.stem_options = {64};
    const SupernetParams p = init_supernet(build_search_space(sc), 5);
    const Tensor& w = p.layers[0][0].conv_w.value;  // 64*64*9 = 36864 samples
    double s = 0, ss = 0;
    for (int64_t i = 0; i < w.numel(); ++i) {
        s += w[i];
        ss += w[i] * w[i];
    }
    const double mean = s / double(w.numel());
    const double var = ss / double(w.numel()) - mean * mean;
    const double expect = 2.0 / (64.0 * 9.0);
    CHECK(var == doctest::Approx(expect).epsilon(0.2));
}

TEST_CASE("group lookup across stages") {
    const SearchSpace sp = toy_space();
    SupernetParams p = init_supernet(sp, 9);
    SUBCASE("stage 1: everything in group 0") {
        for (int o : {4, 8, 12, 16}) CHECK(p.group_index_of(0, o) == 0);
        CHECK_THROWS_AS(p.group_index_of(0, 5), ValueError);
    }
    SUBCASE("stage 2: halves") {
        const SupernetParams q = progressive_split(p);
        CHECK(q.stage == 2);
        CHECK(q.group_index_of(0, 4) == 0);
        CHECK(q.group_index_of(0, 8) == 0);
        CHECK(q.group_index_of(0, 12) == 1);
        CHECK(q.group_index_of(0, 16) == 1);
    }
    SUBCASE("stage 3: singletons, k-th option in group k") {
        const SupernetParams q = progressive_split(progressive_split(p));
        CHECK(q.stage == 3);
        const std::vector<int> opts{4, 8, 12, 16};
        for (size_t k = 0; k < opts.size(); ++k) CHECK(q.group_index_of(2, opts[k]) == int(k));
        for (const auto& layer : q.layers) {
            CHECK(layer.size() == 4);
            for (const auto& g : layer) CHECK(g.num_options == 1);
        }
        CHECK_THROWS_AS(progressive_split(q), ValueError);
    }
    SUBCASE("8-option layer splits into two 4-option halves") {
        const SearchSpace full = resnet20_space();
        SupernetParams pp = init_supernet(full, 2);
        const SupernetParams q = progressive_split(pp);
        // layer 8 (index 7): [4..32] -> [4,8,12,16] and [20,24,28,32]
        const auto& groups = q.layers[7];
        REQUIRE(groups.size() == 2);
        CHECK(groups[0].first_option == 0);
        CHECK(groups[0].num_options == 4);
        CHECK(groups[1].first_option == 4);
        CHECK(groups[1].num_options == 4);
        CHECK(groups[0].width == 16);
        CHECK(groups[1].width == 32);
    }
}

TEST_CASE("option partition invariant holds at every stage") {
    SupernetParams p = init_supernet(toy_space(), 31);
    for (int stage = 1; stage <= 3; ++stage) {
        for (size_t l = 0; l < p.layers.size(); ++l) {
            int next = 0;
            for (const auto& g : p.layers[l]) {
                CHECK(g.first_option == next);
                CHECK(g.num_options >= 1);
                next += g.num_options;
            }
            CHECK(next == int(p.space.layers[l].options.size()));
        }
        if (stage < 3) p = progressive_split(p);
    }
}

TEST_CASE("slice forward equals dense extraction") {
    for (const bool enhanced : {false, true}) {
        CAPTURE(enhanced);
        SearchSpace sp = toy_space();
        if (enhanced) sp = enhance_candidates(sp, EnhancementMap{true, true});
        SupernetParams params = init_supernet(sp, 1234);
        Rng rng(55);
        const Tensor batch = random_uniform_tensor({4, 3, 12, 12}, rng, -1.0, 1.0);

        Sampler sampler(sp, 999);
        for (int trial = 0; trial < 20; ++trial) {
            const SubnetEncoding enc = trial == 0 ? all_max_encoding(sp) : sampler.sample();
            const Tensor via_slice = slice_forward(params, enc, batch, BnMode::eval);
            SupernetParams dense = extract_subnet(params, enc);
            const Tensor via_dense = slice_forward(dense, enc, batch, BnMode::eval);
            REQUIRE(via_slice.same_shape(via_dense));
            double max_abs = 0;
            for (int64_t i = 0; i < via_slice.numel(); ++i)
                max_abs = std::max(max_abs, std::fabs(via_slice[i] - via_dense[i]));
            CHECK(max_abs < 1e-9);
        }
    }
}

TEST_CASE("changing a later layer's choice leaves earlier activations alone") {
    const SearchSpace sp = toy_space();
    SupernetParams params = init_supernet(sp, 77);
    Rng rng(66);
    const Tensor batch = random_uniform_tensor({2, 3, 12, 12}, rng, -1.0, 1.0);
    // Probe the activations indirectly: two encodings differing only in the
    // last layer feed identical inputs into that layer, so extracting the
    // shared prefix as a dense net gives identical tensors.
    SubnetEncoding a{{8, 12, 4, 16, 8, 4}};
    SubnetEncoding b{{8, 12, 4, 16, 8, 16}};
    SupernetParams da = extract_subnet(params, a);
    SupernetParams db = extract_subnet(params, b);
    for (size_t l = 0; l + 1 < da.layers.size(); ++l)
        CHECK(tensors_equal(da.layers[l][0].conv_w.value, db.layers[l][0].conv_w.value));
}

TEST_CASE("progressive split is function preserving bit for bit") {
    for (const bool enhanced : {true, false}) {
        SearchSpace sp = toy_space();
        if (enhanced) sp = enhance_candidates(sp, EnhancementMap{true, true});
        SupernetParams s1 = init_supernet(sp, 4242);
        Rng rng(88);
        const Tensor batch = random_uniform_tensor({3, 3, 12, 12}, rng, -1.0, 1.0);
        Sampler sampler(sp, 31337);

        SupernetParams s2 = progressive_split(s1);
        SupernetParams s3 = progressive_split(s2);
        for (int trial = 0; trial < 50; ++trial) {
            const SubnetEncoding enc = sampler.sample();
            const Tensor l1 = slice_forward(s1, enc, batch, BnMode::eval);
            const Tensor l2 = slice_forward(s2, enc, batch, BnMode::eval);
            const Tensor l3 = slice_forward(s3, enc, batch, BnMode::eval);
            CHECK(tensors_equal(l1, l2));
            CHECK(tensors_equal(l2, l3));
        }
    }
}

TEST_CASE("isolation: after splitting, groups train independently") {
    SupernetParams s2 = progressive_split(init_supernet(toy_space(), 808));
    Rng rng(99);
    const Tensor batch = random_uniform_tensor({2, 3, 12, 12}, rng, -1.0, 1.0);
    const SubnetEncoding low{{4, 8, 4, 8, 4, 8}};    // lower groups everywhere
    const SubnetEncoding high{{12, 16, 12, 16, 12, 16}};  // upper groups everywhere
    const Tensor before = slice_forward(s2, high, batch, BnMode::eval);
    // Perturb every lower group's weights.
    for (auto& layer : s2.layers) {
        auto& g = layer[0];
        for (int64_t i = 0; i < g.conv_w.value.numel(); ++i) g.conv_w.value[i] += 0.25;
    }
    const Tensor after = slice_forward(s2, high, batch, BnMode::eval);
    CHECK(tensors_equal(before, after));
    const Tensor low_before = slice_forward(s2, low, batch, BnMode::eval);
    for (auto& layer : s2.layers) layer[0].conv_w.value[0] += 1.0;
    const Tensor low_after = slice_forward(s2, low, batch, BnMode::eval);
    CHECK_FALSE(tensors_equal(low_before, low_after));
}

TEST_CASE("extraction copies: mutating the copy leaves the supernet intact") {
    SupernetParams params = init_supernet(toy_space(), 515);
    const SubnetEncoding enc{{8, 8, 8, 8, 8, 8}};
    const Tensor snapshot = params.layers[0][0].conv_w.value;
    SupernetParams dense = extract_subnet(params, enc);
    dense.layers[0][0].conv_w.value.fill(7.0);
    dense.fc_w.value.fill(-1.0);
    CHECK(tensors_equal(params.layers[0][0].conv_w.value, snapshot));
    CHECK_THROWS_AS(extract_subnet(params, SubnetEncoding{{5, 8, 8, 8, 8, 8}}), ValueError);
}

TEST_CASE("extracted all-max parameter count matches the closed form") {
    SUBCASE("relu toy space") {
        SupernetParams params = init_supernet(toy_space(), 21);
        const SupernetParams dense = extract_subnet(params, all_max_encoding(params.space));
        CHECK(dense.param_count() == toy_allmax_param_count(false));
    }
    SUBCASE("prelu toy space") {
        const SearchSpace sp = enhance_candidates(toy_space(), EnhancementMap{false, true});
        SupernetParams params = init_supernet(sp, 21);
        const SupernetParams dense = extract_subnet(params, all_max_encoding(sp));
        CHECK(dense.param_count() == toy_allmax_param_count(true));
    }
}

TEST_CASE("invalid encodings are rejected by forward paths") {
    SupernetParams params = init_supernet(toy_space(), 3);
    Tensor batch({1, 3, 12, 12});
    CHECK_THROWS_AS(slice_forward(params, SubnetEncoding{{4, 4, 4}}, batch, BnMode::eval), ValueError);
    CHECK_THROWS_AS(slice_forward(params, SubnetEncoding{{4, 4, 4, 4, 4, 6}}, batch, BnMode::eval), ValueError);
}
