// SPDX-License-Identifier: Apache-2.0
#include "supernas/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace supernas {

bool LayerSpec::has_option(int o) const {
    return std::find(options.begin(), options.end(), o) != options.end();
}

int LayerSpec::option_pos(int o) const {
    for (size_t i = 0; i < options.size(); ++i)
        if (options[i] == o) return static_cast<int>(i);
    throw ValueError("layer " + std::to_string(index) + " has no channel option " + std::to_string(o));
}

int SearchSpace::max_exec_width(int layer) const {
    const auto& opts = layers[size_t(layer)].options;
    int m = 0;
    for (int o : opts) m = std::max(m, exec_width(o));
    return m;
}

int SearchSpace::max_input_width(int layer) const {
    return layer == 0 ? input_shape[0] : max_exec_width(layer - 1);
}

void SearchSpace::validate() const {
    if (layers.empty()) throw ValueError("search space has no layers");
    if (num_classes < 2) throw ValueError("search space needs at least 2 classes");
    for (int d : input_shape)
        if (d <= 0) throw ValueError("search space input shape must be positive");
    for (const auto& l : layers) {
        if (l.options.empty()) throw ValueError("layer " + std::to_string(l.index) + " has no channel options");
        for (size_t i = 0; i + 1 < l.options.size(); ++i)
            if (l.options[i] >= l.options[i + 1])
                throw ValueError("layer " + std::to_string(l.index) + " options must be strictly increasing");
        if (l.options.front() <= 0)
            throw ValueError("layer " + std::to_string(l.index) + " has non-positive channel option");
        if (l.stride != 1 && l.stride != 2)
            throw ValueError("layer " + std::to_string(l.index) + " stride must be 1 or 2");
    }
    if (channel_proxy) {
        // Executed widths must stay strictly increasing, otherwise the proxy
        // would merge two options into one physical width.
        for (const auto& l : layers)
            for (size_t i = 0; i + 1 < l.options.size(); ++i)
                if (exec_width(l.options[i]) >= exec_width(l.options[i + 1]))
                    throw ValueError("layer " + std::to_string(l.index) +
                                     ": channel proxy breaks option ordering");
    }
    // Structure: optional stem followed by (conv1, conv2) pairs.
    size_t i = 0;
    if (layers[0].role == LayerRole::stem) i = 1;
    if ((layers.size() - i) % 2 != 0)
        throw ValueError("search space must pair block convolutions (got odd count)");
    for (; i < layers.size(); i += 2) {
        if (layers[i].role != LayerRole::block_conv1 || layers[i + 1].role != LayerRole::block_conv2)
            throw ValueError("search space block structure broken at layer " + std::to_string(layers[i].index));
        if (layers[i + 1].stride != 1)
            throw ValueError("second block convolution must have stride 1");
    }
}

std::string SubnetEncoding::str() const {
    std::ostringstream os;
    for (size_t i = 0; i < choices.size(); ++i) os << (i ? "-" : "") << choices[i];
    return os.str();
}

SubnetEncoding SubnetEncoding::parse(const std::string& text) {
    SubnetEncoding enc;
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, '-')) {
        if (tok.empty()) throw ValueError("bad encoding text: '" + text + "'");
        size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception&) {
            throw ValueError("bad encoding text: '" + text + "'");
        }
        if (used != tok.size() || v <= 0) throw ValueError("bad encoding text: '" + text + "'");
        enc.choices.push_back(v);
    }
    if (enc.choices.empty()) throw ValueError("empty encoding text");
    return enc;
}

void validate_encoding(const SearchSpace& space, const SubnetEncoding& enc) {
    if (enc.choices.size() != space.layers.size())
        throw ValueError("encoding has " + std::to_string(enc.choices.size()) + " choices for " +
                         std::to_string(space.layers.size()) + " layers");
    for (size_t l = 0; l < enc.choices.size(); ++l)
        if (!space.layers[l].has_option(enc.choices[l]))
            throw ValueError("encoding choice " + std::to_string(enc.choices[l]) + " invalid for layer " +
                             std::to_string(space.layers[l].index));
}

SubnetEncoding all_max_encoding(const SearchSpace& space) {
    SubnetEncoding enc;
    for (const auto& l : space.layers) enc.choices.push_back(l.options.back());
    return enc;
}

SubnetEncoding all_min_encoding(const SearchSpace& space) {
    SubnetEncoding enc;
    for (const auto& l : space.layers) enc.choices.push_back(l.options.front());
    return enc;
}

BigUint::BigUint(uint64_t v) {
    limbs_.push_back(static_cast<uint32_t>(v & 0xffffffffULL));
    const uint32_t hi = static_cast<uint32_t>(v >> 32);
    if (hi != 0) limbs_.push_back(hi);
}

void BigUint::mul(uint32_t m) {
    uint64_t carry = 0;
    for (auto& limb : limbs_) {
        const uint64_t p = uint64_t(limb) * m + carry;
        limb = static_cast<uint32_t>(p & 0xffffffffULL);
        carry = p >> 32;
    }
    while (carry != 0) {
        limbs_.push_back(static_cast<uint32_t>(carry & 0xffffffffULL));
        carry >>= 32;
    }
}

std::string BigUint::str() const {
    // Repeated division by 10^9; fine at these sizes.
    std::vector<uint32_t> limbs = limbs_;
    std::string out;
    auto zero = [&] {
        for (uint32_t l : limbs)
            if (l != 0) return false;
        return true;
    };
    if (zero()) return "0";
    while (!zero()) {
        uint64_t rem = 0;
        for (size_t i = limbs.size(); i-- > 0;) {
            const uint64_t cur = (rem << 32) | limbs[i];
            limbs[i] = static_cast<uint32_t>(cur / 1000000000ULL);
            rem = cur % 1000000000ULL;
        }
        for (int k = 0; k < 9; ++k) {
            out.push_back(static_cast<char>('0' + rem % 10));
            rem /= 10;
        }
    }
    while (out.size() > 1 && out.back() == '0') out.pop_back();
    std::reverse(out.begin(), out.end());
    return out;
}

double BigUint::approx() const {
    double v = 0.0;
    for (size_t i = limbs_.size(); i-- > 0;) v = v * 4294967296.0 + double(limbs_[i]);
    return v;
}

BigUint count_subnets(const SearchSpace& space) {
    space.validate();
    BigUint n(1);
    for (const auto& l : space.layers) n.mul(static_cast<uint32_t>(l.options.size()));
    return n;
}

SearchSpace build_search_space(const SpaceConfig& cfg) {
    SearchSpace sp;
    sp.name = cfg.name;
    sp.input_shape = cfg.input_shape;
    sp.num_classes = cfg.num_classes;
    sp.activation = cfg.activation;

    auto check_options = [&](const std::vector<int>& opts, const std::string& where) {
        if (opts.empty()) throw ValueError(where + ": empty channel option list");
        if (cfg.require_multiple_of_4)
            for (int o : opts)
                if (o % 4 != 0)
                    throw ValueError(where + ": channel option " + std::to_string(o) +
                                     " is not a multiple of 4");
    };

    int index = 1;
    if (cfg.has_stem) {
        check_options(cfg.stem_options, "stem");
        sp.layers.push_back({index++, cfg.stem_options, LayerRole::stem, 1});
    }
    if (cfg.stages.empty() && !cfg.has_stem) throw ValueError("space config has no layers");
    for (size_t si = 0; si < cfg.stages.size(); ++si) {
        const auto& st = cfg.stages[si];
        if (st.blocks < 0) throw ValueError("stage block count must be non-negative");
        check_options(st.options, "stage " + std::to_string(si + 1));
        for (int b = 0; b < st.blocks; ++b) {
            const int stride = (b == 0) ? st.stride : 1;
            sp.layers.push_back({index++, st.options, LayerRole::block_conv1, stride});
            sp.layers.push_back({index++, st.options, LayerRole::block_conv2, 1});
        }
    }
    sp.validate();
    return sp;
}

SearchSpace resnet20_space() {
    SpaceConfig cfg;
    cfg.name = "resnet20";
    cfg.input_shape = {3, 32, 32};
    cfg.num_classes = 10;
    cfg.has_stem = true;
    auto range4 = [](int max) {
        std::vector<int> v;
        for (int o = 4; o <= max; o += 4) v.push_back(o);
        return v;
    };
    cfg.stem_options = range4(16);
    cfg.stages = {
        {3, 1, range4(16)},
        {3, 2, range4(32)},
        {3, 2, range4(64)},
    };
    cfg.require_multiple_of_4 = true;
    return build_search_space(cfg);
}

SearchSpace toy_space() {
    SpaceConfig cfg;
    cfg.name = "toy6";
    cfg.input_shape = {3, 12, 12};
    cfg.num_classes = 10;
    cfg.has_stem = false;
    const std::vector<int> opts{4, 8, 12, 16};
    cfg.stages = {
        {1, 1, opts},
        {1, 2, opts},
        {1, 2, opts},
    };
    return build_search_space(cfg);
}

SearchSpace enhance_candidates(SearchSpace space, const EnhancementMap& map) {
    if (map.options_enhancement) space.channel_proxy = true;
    if (map.prelu_conversion) space.activation = Activation::prelu;
    space.validate();
    return space;
}

}  // namespace supernas
