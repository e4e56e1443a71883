// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "supernas/common.hpp"

namespace supernas {

enum class Activation { relu, prelu };

enum class LayerRole { stem, block_conv1, block_conv2 };

/// One searchable convolution: an ordered list of channel options.
struct LayerSpec {
    int index = 0;  // 1-based position in the space
    std::vector<int> options;
    LayerRole role = LayerRole::stem;
    int stride = 1;

    int max_option() const { return options.back(); }
    bool has_option(int o) const;
    int option_pos(int o) const;  // position in the list; throws if absent
};

/// Candidate redesign: channel proxies widen harmful options at execution
/// time (4 runs as 5, 8 runs as 9) and the activation switches to PReLU.
/// The encoding namespace is untouched; only executed widths change.
struct EnhancementMap {
    bool options_enhancement = true;  // 4->5, 8->9 channel proxies
    bool prelu_conversion = true;

    int proxy(int option) const {
        if (!options_enhancement) return option;
        if (option == 4) return 5;
        if (option == 8) return 9;
        return option;
    }
};

struct SearchSpace {
    std::string name = "custom";
    std::vector<LayerSpec> layers;
    Activation activation = Activation::relu;
    bool channel_proxy = false;
    int num_classes = 0;
    std::array<int, 3> input_shape{0, 0, 0};  // C,H,W

    int num_layers() const { return static_cast<int>(layers.size()); }
    bool has_stem() const { return !layers.empty() && layers.front().role == LayerRole::stem; }
    int num_blocks() const { return (num_layers() - (has_stem() ? 1 : 0)) / 2; }

    /// Physical channel count an option runs at (proxy applied when active).
    int exec_width(int option) const {
        if (!channel_proxy) return option;
        if (option == 4) return 5;
        if (option == 8) return 9;
        return option;
    }
    int max_exec_width(int layer) const;
    /// Widest input a layer can see: image channels for the first layer,
    /// otherwise the previous layer's widest executed width.
    int max_input_width(int layer) const;

    void validate() const;
};

/// One channel choice per searchable layer. Text form: "16-12-...-8".
struct SubnetEncoding {
    std::vector<int> choices;

    std::string str() const;
    static SubnetEncoding parse(const std::string& text);
    bool operator==(const SubnetEncoding& o) const { return choices == o.choices; }
};

void validate_encoding(const SearchSpace& space, const SubnetEncoding& enc);
SubnetEncoding all_max_encoding(const SearchSpace& space);
SubnetEncoding all_min_encoding(const SearchSpace& space);

/// Tiny unsigned big integer; sufficient for products of option counts.
class BigUint {
  public:
    BigUint() : limbs_{0} {}
    explicit BigUint(uint64_t v);
    void mul(uint32_t m);
    std::string str() const;
    double approx() const;
    bool operator==(const BigUint& o) const { return limbs_ == o.limbs_; }

  private:
    std::vector<uint32_t> limbs_;  // little-endian base 2^32
};

BigUint count_subnets(const SearchSpace& space);

/// Structured description used to build spaces from configuration.
struct StageSpec {
    int blocks = 0;
    int stride = 1;
    std::vector<int> options;
};

struct SpaceConfig {
    std::string name = "custom";
    std::array<int, 3> input_shape{3, 32, 32};
    int num_classes = 10;
    Activation activation = Activation::relu;
    bool has_stem = true;
    std::vector<int> stem_options;
    std::vector<StageSpec> stages;
    bool require_multiple_of_4 = false;
};

SearchSpace build_search_space(const SpaceConfig& cfg);
SearchSpace resnet20_space();
SearchSpace toy_space();

SearchSpace enhance_candidates(SearchSpace space, const EnhancementMap& map);

}  // namespace supernas
