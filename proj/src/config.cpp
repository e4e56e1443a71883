// SPDX-License-Identifier: Apache-2.0
#include "supernas/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace supernas {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
}

template <typename T>
T get_or(const json& j, const std::string& where, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value type for '" + where + "." + key + "'");
    }
}

std::vector<int> int_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError("'" + where + "' must be an array of integers");
    std::vector<int> out;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw ConfigError("'" + where + "' must contain integers");
        out.push_back(v.get<int>());
    }
    return out;
}

TrainConfig parse_stage(const json& j, const std::string& where, const TrainConfig& defaults) {
    check_keys(j, where,
               {"iterations", "warmup_iterations", "samples_per_step", "batch_size", "lr_init", "warmup_lr",
                "momentum", "weight_decay", "alpha", "grad_normalization", "augment"});
    TrainConfig c = defaults;
    c.iterations = get_or(j, where, "iterations", c.iterations);
    c.warmup_iterations = get_or(j, where, "warmup_iterations", c.warmup_iterations);
    c.samples_per_step = get_or(j, where, "samples_per_step", c.samples_per_step);
    c.batch_size = get_or(j, where, "batch_size", c.batch_size);
    c.lr_init = get_or(j, where, "lr_init", c.lr_init);
    c.warmup_lr = get_or(j, where, "warmup_lr", c.warmup_lr);
    c.momentum = get_or(j, where, "momentum", c.momentum);
    c.weight_decay = get_or(j, where, "weight_decay", c.weight_decay);
    c.alpha = get_or(j, where, "alpha", c.alpha);
    c.augment = get_or(j, where, "augment", c.augment);
    const std::string gn = get_or<std::string>(j, where, "grad_normalization",
                                               c.grad_normalization == GradNorm::sum ? "sum" : "mean_over_networks");
    if (gn == "sum")
        c.grad_normalization = GradNorm::sum;
    else if (gn == "mean_over_networks")
        c.grad_normalization = GradNorm::mean_over_networks;
    else
        throw ConfigError("'" + where + ".grad_normalization' must be 'sum' or 'mean_over_networks'");
    try {
        c.validate();
    } catch (const ValueError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return c;
}

std::array<int, 3> shape3(const json& j, const std::string& where) {
    const auto v = int_list(j, where);
    if (v.size() != 3) throw ConfigError("'" + where + "' must be [C,H,W]");
    return {v[0], v[1], v[2]};
}

SpaceConfig parse_space(const json& j, const std::string& where) {
    check_keys(j, where,
               {"name", "input", "classes", "activation", "stem_options", "stages", "require_multiple_of_4"});
    SpaceConfig sc;
    sc.name = get_or<std::string>(j, where, "name", "custom");
    if (j.contains("input")) sc.input_shape = shape3(j.at("input"), where + ".input");
    sc.num_classes = get_or(j, where, "classes", sc.num_classes);
    const std::string act = get_or<std::string>(j, where, "activation", "relu");
    if (act == "relu")
        sc.activation = Activation::relu;
    else if (act == "prelu")
        sc.activation = Activation::prelu;
    else
        throw ConfigError("'" + where + ".activation' must be 'relu' or 'prelu'");
    sc.require_multiple_of_4 = get_or(j, where, "require_multiple_of_4", false);
    if (j.contains("stem_options") && !j.at("stem_options").is_null()) {
        sc.has_stem = true;
        sc.stem_options = int_list(j.at("stem_options"), where + ".stem_options");
    } else {
        sc.has_stem = false;
    }
    if (!j.contains("stages")) throw ConfigError("'" + where + ".stages' is required for a custom space");
    const auto& stages = j.at("stages");
    if (!stages.is_array()) throw ConfigError("'" + where + ".stages' must be an array");
    for (size_t i = 0; i < stages.size(); ++i) {
        const std::string sw = where + ".stages[" + std::to_string(i) + "]";
        check_keys(stages[i], sw, {"blocks", "stride", "options"});
        StageSpec st;
        st.blocks = get_or(stages[i], sw, "blocks", 0);
        st.stride = get_or(stages[i], sw, "stride", 1);
        if (!stages[i].contains("options")) throw ConfigError("'" + sw + ".options' is required");
        st.options = int_list(stages[i].at("options"), sw + ".options");
        sc.stages.push_back(std::move(st));
    }
    return sc;
}

json space_to_json(const SpaceConfig& sc) {
    json j;
    j["name"] = sc.name;
    j["input"] = {sc.input_shape[0], sc.input_shape[1], sc.input_shape[2]};
    j["classes"] = sc.num_classes;
    j["activation"] = sc.activation == Activation::prelu ? "prelu" : "relu";
    if (sc.has_stem)
        j["stem_options"] = sc.stem_options;
    else
        j["stem_options"] = nullptr;
    j["require_multiple_of_4"] = sc.require_multiple_of_4;
    j["stages"] = json::array();
    for (const auto& st : sc.stages)
        j["stages"].push_back({{"blocks", st.blocks}, {"stride", st.stride}, {"options", st.options}});
    return j;
}

json stage_to_json(const TrainConfig& c) {
    json j;
    j["iterations"] = c.iterations;
    j["warmup_iterations"] = c.warmup_iterations;
    j["samples_per_step"] = c.samples_per_step;
    j["batch_size"] = c.batch_size;
    j["lr_init"] = c.lr_init;
    j["warmup_lr"] = c.warmup_lr;
    j["momentum"] = c.momentum;
    j["weight_decay"] = c.weight_decay;
    j["alpha"] = c.alpha;
    j["grad_normalization"] = c.grad_normalization == GradNorm::sum ? "sum" : "mean_over_networks";
    j["augment"] = c.augment;
    return j;
}

}  // namespace

ExperimentConfig default_toy_config() {
    ExperimentConfig cfg;
    cfg.space_preset = "toy6";
    cfg.stages.resize(3);
    cfg.stages[0].warmup_iterations = 200;
    cfg.stages[0].iterations = 300;
    cfg.stages[0].lr_init = 0.01;
    cfg.stages[0].warmup_lr = 0.1;
    cfg.stages[0].batch_size = 32;
    cfg.stages[1].warmup_iterations = 0;
    cfg.stages[1].iterations = 150;
    cfg.stages[1].lr_init = 0.001;
    cfg.stages[1].batch_size = 32;
    cfg.stages[2] = cfg.stages[1];
    cfg.eval.batch_size = 256;
    cfg.eval.calib_batches = 10;
    cfg.standalone.iterations = 400;
    cfg.standalone.batch_size = 32;
    return cfg;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + origin + ": " + e.what());
    }
    check_keys(j, "config",
               {"seed", "output_dir", "space", "enhance", "augment", "stages", "eval", "standalone", "dataset"});

    ExperimentConfig cfg = default_toy_config();
    cfg.seed = get_or<uint64_t>(j, "config", "seed", cfg.seed);
    cfg.output_dir = get_or<std::string>(j, "config", "output_dir", cfg.output_dir);

    if (j.contains("space")) {
        const auto& js = j.at("space");
        if (js.is_string()) {
            cfg.space_preset = js.get<std::string>();
        } else if (js.is_object() && js.contains("preset")) {
            check_keys(js, "config.space", {"preset"});
            cfg.space_preset = js.at("preset").get<std::string>();
        } else {
            cfg.space_preset = "custom";
            cfg.space = parse_space(js, "config.space");
        }
        if (cfg.space_preset != "toy6" && cfg.space_preset != "resnet20" && cfg.space_preset != "custom")
            throw ConfigError("config.space: unknown preset '" + cfg.space_preset + "'");
    }

    if (j.contains("enhance")) {
        const auto& je = j.at("enhance");
        check_keys(je, "config.enhance", {"channel_proxy", "prelu"});
        cfg.enhance.options_enhancement = get_or(je, "config.enhance", "channel_proxy", false);
        cfg.enhance.prelu_conversion = get_or(je, "config.enhance", "prelu", false);
    }

    if (j.contains("augment")) {
        const auto& ja = j.at("augment");
        check_keys(ja, "config.augment", {"brightness", "contrast", "rotation_deg", "hflip_prob"});
        cfg.augment.brightness_delta_max = get_or(ja, "config.augment", "brightness", cfg.augment.brightness_delta_max);
        if (ja.contains("contrast")) {
            const auto c = ja.at("contrast");
            if (!c.is_array() || c.size() != 2) throw ConfigError("'config.augment.contrast' must be [lo,hi]");
            cfg.augment.contrast_lo = c[0].get<double>();
            cfg.augment.contrast_hi = c[1].get<double>();
        }
        cfg.augment.rotation_deg_max = get_or(ja, "config.augment", "rotation_deg", cfg.augment.rotation_deg_max);
        cfg.augment.hflip_prob = get_or(ja, "config.augment", "hflip_prob", cfg.augment.hflip_prob);
        if (cfg.augment.hflip_prob < 0.0 || cfg.augment.hflip_prob > 1.0)
            throw ConfigError("'config.augment.hflip_prob' must be in [0,1]");
    }

    if (j.contains("stages")) {
        const auto& js = j.at("stages");
        if (!js.is_array() || js.empty() || js.size() > 3)
            throw ConfigError("'config.stages' must list 1 to 3 stage configurations");
        std::vector<TrainConfig> stages;
        for (size_t i = 0; i < js.size(); ++i) {
            const TrainConfig& defaults = cfg.stages[std::min(i, cfg.stages.size() - 1)];
            stages.push_back(parse_stage(js[i], "config.stages[" + std::to_string(i) + "]", defaults));
        }
        cfg.stages = std::move(stages);
    }

    if (j.contains("eval")) {
        const auto& je = j.at("eval");
        check_keys(je, "config.eval", {"recalibrate", "calib_batches", "batch_size", "encodings", "auto_count"});
        cfg.eval.recalibrate = get_or(je, "config.eval", "recalibrate", cfg.eval.recalibrate);
        cfg.eval.calib_batches = get_or(je, "config.eval", "calib_batches", cfg.eval.calib_batches);
        cfg.eval.batch_size = get_or(je, "config.eval", "batch_size", cfg.eval.batch_size);
        cfg.eval.encodings_path = get_or<std::string>(je, "config.eval", "encodings", cfg.eval.encodings_path);
        cfg.eval.auto_count = get_or(je, "config.eval", "auto_count", cfg.eval.auto_count);
        if (cfg.eval.calib_batches <= 0) throw ConfigError("'config.eval.calib_batches' must be positive");
        if (cfg.eval.auto_count < 2) throw ConfigError("'config.eval.auto_count' must be at least 2");
    }

    if (j.contains("standalone")) {
        const auto& js = j.at("standalone");
        check_keys(js, "config.standalone",
                   {"iterations", "batch_size", "lr_init", "momentum", "weight_decay", "activation", "augment"});
        cfg.standalone.iterations = get_or(js, "config.standalone", "iterations", cfg.standalone.iterations);
        cfg.standalone.batch_size = get_or(js, "config.standalone", "batch_size", cfg.standalone.batch_size);
        cfg.standalone.lr_init = get_or(js, "config.standalone", "lr_init", cfg.standalone.lr_init);
        cfg.standalone.momentum = get_or(js, "config.standalone", "momentum", cfg.standalone.momentum);
        cfg.standalone.weight_decay = get_or(js, "config.standalone", "weight_decay", cfg.standalone.weight_decay);
        cfg.standalone.augment = get_or(js, "config.standalone", "augment", cfg.standalone.augment);
        const std::string act = get_or<std::string>(js, "config.standalone", "activation", "relu");
        if (act == "relu")
            cfg.standalone.activation = Activation::relu;
        else if (act == "prelu")
            cfg.standalone.activation = Activation::prelu;
        else
            throw ConfigError("'config.standalone.activation' must be 'relu' or 'prelu'");
        if (cfg.standalone.iterations < 0) throw ConfigError("'config.standalone.iterations' must be >= 0");
    }

    if (j.contains("dataset")) {
        const auto& jd = j.at("dataset");
        check_keys(jd, "config.dataset",
                   {"kind", "n_per_class", "classes", "shape", "seed", "dir", "calib_count", "cache"});
        cfg.dataset.kind = get_or<std::string>(jd, "config.dataset", "kind", cfg.dataset.kind);
        cfg.dataset.n_per_class = get_or(jd, "config.dataset", "n_per_class", cfg.dataset.n_per_class);
        cfg.dataset.classes = get_or(jd, "config.dataset", "classes", cfg.dataset.classes);
        if (jd.contains("shape")) cfg.dataset.shape = shape3(jd.at("shape"), "config.dataset.shape");
        cfg.dataset.seed = get_or<uint64_t>(jd, "config.dataset", "seed", cfg.dataset.seed);
        cfg.dataset.dir = get_or<std::string>(jd, "config.dataset", "dir", cfg.dataset.dir);
        cfg.dataset.calib_count = get_or(jd, "config.dataset", "calib_count", cfg.dataset.calib_count);
        cfg.dataset.cache_path = get_or<std::string>(jd, "config.dataset", "cache", cfg.dataset.cache_path);
        if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "cifar10" && cfg.dataset.kind != "cifar100")
            throw ConfigError("'config.dataset.kind' must be synthetic, cifar10, or cifar100");
    }

    // Cross checks that need the space realized.
    const SearchSpace sp = base_space(cfg);
    if (cfg.dataset.kind == "synthetic") {
        if (cfg.dataset.classes != sp.num_classes)
            throw ConfigError("config.dataset.classes (" + std::to_string(cfg.dataset.classes) +
                              ") must match the space's class count (" + std::to_string(sp.num_classes) + ")");
        for (int i = 0; i < 3; ++i)
            if (cfg.dataset.shape[size_t(i)] != sp.input_shape[size_t(i)])
                throw ConfigError("config.dataset.shape must match the space input shape");
    }
    (void)enhanced_space(cfg);  // validates the proxy against the option lists
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    if (cfg.space_preset == "custom")
        j["space"] = space_to_json(cfg.space);
    else
        j["space"] = cfg.space_preset;
    j["enhance"] = {{"channel_proxy", cfg.enhance.options_enhancement}, {"prelu", cfg.enhance.prelu_conversion}};
    j["augment"] = {{"brightness", cfg.augment.brightness_delta_max},
                    {"contrast", {cfg.augment.contrast_lo, cfg.augment.contrast_hi}},
                    {"rotation_deg", cfg.augment.rotation_deg_max},
                    {"hflip_prob", cfg.augment.hflip_prob}};
    j["stages"] = json::array();
    for (const auto& s : cfg.stages) j["stages"].push_back(stage_to_json(s));
    j["eval"] = {{"recalibrate", cfg.eval.recalibrate},
                 {"calib_batches", cfg.eval.calib_batches},
                 {"batch_size", cfg.eval.batch_size},
                 {"encodings", cfg.eval.encodings_path},
                 {"auto_count", cfg.eval.auto_count}};
    j["standalone"] = {{"iterations", cfg.standalone.iterations},
                       {"batch_size", cfg.standalone.batch_size},
                       {"lr_init", cfg.standalone.lr_init},
                       {"momentum", cfg.standalone.momentum},
                       {"weight_decay", cfg.standalone.weight_decay},
                       {"activation", cfg.standalone.activation == Activation::prelu ? "prelu" : "relu"},
                       {"augment", cfg.standalone.augment}};
    j["dataset"] = {{"kind", cfg.dataset.kind},
                    {"n_per_class", cfg.dataset.n_per_class},
                    {"classes", cfg.dataset.classes},
                    {"shape", {cfg.dataset.shape[0], cfg.dataset.shape[1], cfg.dataset.shape[2]}},
                    {"seed", cfg.dataset.seed},
                    {"dir", cfg.dataset.dir},
                    {"calib_count", cfg.dataset.calib_count},
                    {"cache", cfg.dataset.cache_path}};
    return j.dump(2) + "\n";
}

SearchSpace base_space(const ExperimentConfig& cfg) {
    if (cfg.space_preset == "toy6") return toy_space();
    if (cfg.space_preset == "resnet20") return resnet20_space();
    try {
        return build_search_space(cfg.space);
    } catch (const ValueError& e) {
        throw ConfigError(std::string("config.space: ") + e.what());
    }
}

SearchSpace enhanced_space(const ExperimentConfig& cfg) {
    try {
        return enhance_candidates(base_space(cfg), cfg.enhance);
    } catch (const ValueError& e) {
        throw ConfigError(std::string("config.enhance: ") + e.what());
    }
}

DataBundle load_data(const ExperimentConfig& cfg) {
    if (cfg.dataset.kind == "synthetic") {
        const uint64_t seed = cfg.dataset.seed != 0 ? cfg.dataset.seed : derive_seed(cfg.seed, "dataset");
        if (!cfg.dataset.cache_path.empty()) {
            std::ifstream probe(cfg.dataset.cache_path);
            if (probe.good()) return load_bundle(cfg.dataset.cache_path);
            DataBundle b = synth_dataset(seed, cfg.dataset.n_per_class, cfg.dataset.classes, cfg.dataset.shape);
            save_bundle(b, cfg.dataset.cache_path);
            return b;
        }
        return synth_dataset(seed, cfg.dataset.n_per_class, cfg.dataset.classes, cfg.dataset.shape);
    }
    const CifarVariant variant = cfg.dataset.kind == "cifar10" ? CifarVariant::c10 : CifarVariant::c100;
    return cifar_bundle(cfg.dataset.dir, variant, cfg.dataset.calib_count);
}

}  // namespace supernas
