// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "supernas/search_space.hpp"

using namespace supernas;

TEST_CASE("full space layout: 19 layers with 4/8/16 option counts") {
    const SearchSpace sp = resnet20_space();
    REQUIRE(sp.num_layers() == 19);
    CHECK(sp.has_stem());
    CHECK(sp.num_blocks() == 9);
    for (int l = 0; l < 7; ++l) CHECK(sp.layers[size_t(l)].options.size() == 4);
    for (int l = 7; l < 13; ++l) CHECK(sp.layers[size_t(l)].options.size() == 8);
    for (int l = 13; l < 19; ++l) CHECK(sp.layers[size_t(l)].options.size() == 16);
    // stride-2 stage transitions at layers 8 and 14 (1-based)
    CHECK(sp.layers[7].stride == 2);
    CHECK(sp.layers[13].stride == 2);
    CHECK(sp.layers[1].stride == 1);
    for (const auto& l : sp.layers) {
        CHECK(l.options.front() == 4);
        for (int o : l.options) CHECK(o % 4 == 0);
    }
}

TEST_CASE("subnet counting is exact") {
    SUBCASE("full space counts 2^56") {
        const BigUint n = count_subnets(resnet20_space());
        CHECK(n.str() == "72057594037927936");
        CHECK(n.approx() == doctest::Approx(7.2057594e16).epsilon(1e-6));
    }
    SUBCASE("single layer with one option") {
        SpaceConfig sc;
        sc.name = "one";
        sc.input_shape = {3, 8, 8};
        sc.num_classes = 2;
        sc.has_stem = true;
        sc.stem_options = {4};
        const SearchSpace sp = build_search_space(sc);
        CHECK(count_subnets(sp).str() == "1");
    }
    SUBCASE("toy space: 4^6") {
        CHECK(count_subnets(toy_space()).str() == "4096");
    }
    SUBCASE("small products") {
        SpaceConfig sc;
        sc.name = "p";
        sc.input_shape = {3, 8, 8};
        sc.num_classes = 2;
        sc.has_stem = true;
        sc.stem_options = {4, 8, 12, 16};
        CHECK(count_subnets(build_search_space(sc)).str() == "4");
        sc.stem_options = {2, 4};
        sc.stages = {{1, 1, {2, 4}}};
        CHECK(count_subnets(build_search_space(sc)).str() == "8");
    }
}

TEST_CASE("space validation errors") {
    SpaceConfig sc;
    sc.name = "bad";
    sc.input_shape = {3, 8, 8};
    sc.num_classes = 2;
    sc.has_stem = true;
    SUBCASE("empty option list") {
        sc.stem_options = {};
        CHECK_THROWS_AS(build_search_space(sc), ValueError);
    }
    SUBCASE("non-increasing options") {
        sc.stem_options = {8, 8};
        CHECK_THROWS_AS(build_search_space(sc), ValueError);
        sc.stem_options = {8, 4};
        CHECK_THROWS_AS(build_search_space(sc), ValueError);
    }
    SUBCASE("multiple-of-4 grid enforcement") {
        sc.stem_options = {4, 7};
        sc.require_multiple_of_4 = true;
        CHECK_THROWS_AS(build_search_space(sc), ValueError);
    }
}

TEST_CASE("candidates enhancement") {
    SUBCASE("proxy widens 4 and 8 only") {
        SearchSpace sp = enhance_candidates(toy_space(), EnhancementMap{true, true});
        CHECK(sp.activation == Activation::prelu);
        CHECK(sp.channel_proxy);
        const std::vector<int> expect{5, 9, 12, 16};
        for (const auto& l : sp.layers) {
            CHECK(l.options == std::vector<int>{4, 8, 12, 16});  // encoding namespace unchanged
            for (size_t i = 0; i < l.options.size(); ++i)
                CHECK(sp.exec_width(l.options[i]) == expect[i]);
        }
    }
    SUBCASE("identity outside 4 and 8") {
        SpaceConfig sc;
        sc.name = "hi";
        sc.input_shape = {3, 8, 8};
        sc.num_classes = 2;
        sc.has_stem = true;
        sc.stem_options = {12, 16};
        SearchSpace sp = enhance_candidates(build_search_space(sc), EnhancementMap{true, false});
        CHECK(sp.exec_width(12) == 12);
        CHECK(sp.exec_width(16) == 16);
        CHECK(sp.activation == Activation::relu);
    }
    SUBCASE("middle-stage option list maps elementwise") {
        const SearchSpace sp = enhance_candidates(resnet20_space(), EnhancementMap{true, true});
        const auto& opts = sp.layers[7].options;  // layer 8, 1-based
        const std::vector<int> expect{5, 9, 12, 16, 20, 24, 28, 32};
        REQUIRE(opts.size() == expect.size());
        for (size_t i = 0; i < opts.size(); ++i) CHECK(sp.exec_width(opts[i]) == expect[i]);
    }
    SUBCASE("count and namespace are unchanged by enhancement") {
        const SearchSpace base = resnet20_space();
        const SearchSpace enh = enhance_candidates(base, EnhancementMap{true, true});
        CHECK(count_subnets(base).str() == count_subnets(enh).str());
        for (int l = 0; l < base.num_layers(); ++l)
            CHECK(base.layers[size_t(l)].options == enh.layers[size_t(l)].options);
    }
    SUBCASE("proxy collision with an existing width is rejected") {
        SpaceConfig sc;
        sc.name = "clash";
        sc.input_shape = {3, 8, 8};
        sc.num_classes = 2;
        sc.has_stem = true;
        sc.stem_options = {4, 5};
        const SearchSpace sp = build_search_space(sc);
        CHECK_THROWS_AS(enhance_candidates(sp, EnhancementMap{true, false}), ValueError);
    }
}

TEST_CASE("encoding text form round trips") {
    const SubnetEncoding enc{{16, 12, 4, 8, 16, 4}};
    CHECK(enc.str() == "16-12-4-8-16-4");
    CHECK(SubnetEncoding::parse("16-12-4-8-16-4") == enc);
    CHECK_THROWS_AS(SubnetEncoding::parse(""), ValueError);
    CHECK_THROWS_AS(SubnetEncoding::parse("16--4"), ValueError);
    CHECK_THROWS_AS(SubnetEncoding::parse("16-x-4"), ValueError);
}

TEST_CASE("encoding validation against a space") {
    const SearchSpace sp = toy_space();
    validate_encoding(sp, all_max_encoding(sp));
    validate_encoding(sp, all_min_encoding(sp));
    CHECK(all_max_encoding(sp).str() == "16-16-16-16-16-16");
    CHECK(all_min_encoding(sp).str() == "4-4-4-4-4-4");
    CHECK_THROWS_AS(validate_encoding(sp, SubnetEncoding{{4, 4, 4}}), ValueError);
    CHECK_THROWS_AS(validate_encoding(sp, SubnetEncoding{{4, 4, 4, 4, 4, 5}}), ValueError);
}
