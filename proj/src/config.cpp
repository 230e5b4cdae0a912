#include "diresa/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "diresa/binio.hpp"
#include "diresa/errors.hpp"
#include "diresa/rng.hpp"

namespace diresa {

const char* const kToolkitVersion = "1.0.0";

namespace {

using nlohmann::json;

std::string joined(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

/// Misspelling guard: every key of `obj` must be in `allowed`.
void check_keys(const json& obj, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ConfigError("config section \"" + path + "\" must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (std::string_view k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown config key \"" + joined(path, it.key()) + "\"");
    }
}

std::uint64_t as_uint(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    throw ConfigError("config value \"" + path + "\" must be a non-negative integer");
}

double as_double(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    throw ConfigError("config value \"" + path + "\" must be a number");
}

bool as_bool(const json& v, const std::string& path) {
    if (v.is_boolean()) return v.get<bool>();
    throw ConfigError("config value \"" + path + "\" must be a boolean");
}

std::string as_string(const json& v, const std::string& path) {
    if (v.is_string()) return v.get<std::string>();
    throw ConfigError("config value \"" + path + "\" must be a string");
}

std::vector<std::size_t> as_width_list(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) {
        throw ConfigError("config value \"" + path + "\" must be a non-empty array of widths");
    }
    std::vector<std::size_t> widths;
    widths.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto w = as_uint(v[i], path + "[" + std::to_string(i) + "]");
        if (w == 0) throw ConfigError("config value \"" + path + "\" widths must be positive");
        widths.push_back(static_cast<std::size_t>(w));
    }
    return widths;
}

LorenzParams parse_generator(const json& obj, const std::string& path) {
    check_keys(obj, path, {"sigma", "r", "b", "dt", "initial", "transient_steps", "total_steps"});
    LorenzParams p;
    if (obj.contains("sigma")) p.sigma = as_double(obj.at("sigma"), joined(path, "sigma"));
    if (obj.contains("r")) p.r = as_double(obj.at("r"), joined(path, "r"));
    if (obj.contains("b")) p.b = as_double(obj.at("b"), joined(path, "b"));
    if (obj.contains("dt")) p.dt = as_double(obj.at("dt"), joined(path, "dt"));
    if (obj.contains("initial")) {
        const json& v = obj.at("initial");
        const std::string ipath = joined(path, "initial");
        if (!v.is_array() || v.size() != 3) {
            throw ConfigError("config value \"" + ipath + "\" must be an array of 3 numbers");
        }
        for (std::size_t i = 0; i < 3; ++i) {
            p.initial[i] = as_double(v[i], ipath + "[" + std::to_string(i) + "]");
        }
    }
    if (obj.contains("transient_steps")) {
        p.transient_steps = static_cast<std::size_t>(
            as_uint(obj.at("transient_steps"), joined(path, "transient_steps")));
    }
    if (obj.contains("total_steps")) {
        p.total_steps =
            static_cast<std::size_t>(as_uint(obj.at("total_steps"), joined(path, "total_steps")));
    }
    if (p.dt <= 0.0) throw ConfigError("config value \"" + joined(path, "dt") + "\" must be > 0");
    if (p.total_steps == 0) {
        throw ConfigError("config value \"" + joined(path, "total_steps") + "\" must be > 0");
    }
    return p;
}

DatasetConfig parse_dataset(const json& obj, const std::string& path) {
    check_keys(obj, path, {"generator", "path", "csv"});
    DatasetConfig ds;
    int sources = 0;
    if (obj.contains("generator")) {
        ds.generator = parse_generator(obj.at("generator"), joined(path, "generator"));
        ++sources;
    }
    if (obj.contains("path")) {
        ds.path = as_string(obj.at("path"), joined(path, "path"));
        ++sources;
    }
    if (obj.contains("csv")) {
        ds.csv = as_string(obj.at("csv"), joined(path, "csv"));
        ++sources;
    }
    if (sources != 1) {
        throw ConfigError("config section \"" + path +
                          "\" needs exactly one of: generator, path, csv");
    }
    for (const auto& [key, file] :
         {std::pair{"path", ds.path}, std::pair{"csv", ds.csv}}) {
        if (!file.empty() && !std::filesystem::exists(file)) {
            throw ConfigError("config value \"" + joined(path, key) +
                              "\" refers to a missing file: " + file);
        }
    }
    return ds;
}

/// Shared by the model section and each methods[] entry. `base` carries the
/// defaults the entry starts from.
ModelSpec parse_spec_fields(const json& obj, const std::string& path, ModelSpec base,
                            Variant variant) {
    ModelSpec spec = std::move(base);
    spec.variant = variant;
    if (obj.contains("hidden_widths")) {
        spec.hidden_widths = as_width_list(obj.at("hidden_widths"), joined(path, "hidden_widths"));
    }
    if (obj.contains("latent_dim")) {
        const auto latent = as_uint(obj.at("latent_dim"), joined(path, "latent_dim"));
        if (latent == 0) {
            throw ConfigError("config value \"" + joined(path, "latent_dim") + "\" must be > 0");
        }
        spec.latent_dim = static_cast<std::size_t>(latent);
    }
    if (obj.contains("distance_loss")) {
        if (!spec.uses_distance_loss()) {
            throw ConfigError("config key \"" + joined(path, "distance_loss") +
                              "\" is only meaningful for the DIRESA variant");
        }
        const std::string name = as_string(obj.at("distance_loss"), joined(path, "distance_loss"));
        try {
            spec.distance_loss = distance_kind_from_name(name);
        } catch (const ConfigError&) {
            throw ConfigError("config value \"" + joined(path, "distance_loss") +
                              "\" names an unknown distance loss: " + name);
        }
    }
    return spec;
}

Variant parse_variant(const json& v, const std::string& path) {
    const std::string name = as_string(v, path);
    try {
        return variant_from_name(name);
    } catch (const ConfigError&) {
        throw ConfigError("config value \"" + path + "\" names an unknown variant: " + name);
    }
}

/// One method entry (the model section or a methods[] element): a variant
/// name (PCA included) with spec fields, defaulting from `base`.
MethodConfig parse_method_entry(const json& obj, const std::string& path, const ModelSpec& base) {
    check_keys(obj, path, {"name", "variant", "hidden_widths", "latent_dim", "distance_loss"});
    if (!obj.contains("variant")) {
        throw ConfigError("config section \"" + path + "\" is missing the variant key");
    }
    MethodConfig m;
    const std::string variant = as_string(obj.at("variant"), joined(path, "variant"));
    if (variant == "PCA") {
        m.is_pca = true;
        for (const char* key : {"hidden_widths", "distance_loss"}) {
            if (obj.contains(key)) {
                throw ConfigError("config key \"" + joined(path, key) +
                                  "\" is not meaningful for PCA");
            }
        }
        m.spec = base;
        if (obj.contains("latent_dim")) {
            const auto latent = as_uint(obj.at("latent_dim"), joined(path, "latent_dim"));
            if (latent == 0) {
                throw ConfigError("config value \"" + joined(path, "latent_dim") +
                                  "\" must be > 0");
            }
            m.spec.latent_dim = static_cast<std::size_t>(latent);
        }
        m.name = "PCA";
    } else {
        m.spec = parse_spec_fields(obj, path, base,
                                   parse_variant(obj.at("variant"), joined(path, "variant")));
        m.name = default_method_name(m.spec);
    }
    if (obj.contains("name")) m.name = as_string(obj.at("name"), joined(path, "name"));
    if (m.name.empty()) {
        throw ConfigError("config value \"" + joined(path, "name") + "\" must not be empty");
    }
    return m;
}

void parse_training(const json& obj, const std::string& path, RunConfig& out) {
    check_keys(obj, path,
               {"epochs", "batch_size", "base_lr", "restarts", "lr_halving_period",
                "fallback_lr_start_epoch", "anneal_step", "anneal_target",
                "drop_partial_batch"});
    TrainConfig& t = out.training;
    if (obj.contains("epochs")) {
        t.epochs = static_cast<std::size_t>(as_uint(obj.at("epochs"), joined(path, "epochs")));
    }
    if (obj.contains("batch_size")) {
        const auto b = as_uint(obj.at("batch_size"), joined(path, "batch_size"));
        if (b == 0) {
            throw ConfigError("config value \"" + joined(path, "batch_size") + "\" must be > 0");
        }
        out.batch_size_config = static_cast<std::size_t>(b);
    }
    if (obj.contains("base_lr")) {
        t.base_lr = as_double(obj.at("base_lr"), joined(path, "base_lr"));
        if (t.base_lr <= 0.0) {
            throw ConfigError("config value \"" + joined(path, "base_lr") + "\" must be > 0");
        }
    }
    if (obj.contains("restarts")) {
        t.restarts = static_cast<std::size_t>(as_uint(obj.at("restarts"), joined(path, "restarts")));
        if (t.restarts == 0) {
            throw ConfigError("config value \"" + joined(path, "restarts") + "\" must be > 0");
        }
    }
    if (obj.contains("lr_halving_period")) {
        t.lr_halving_period = static_cast<std::size_t>(
            as_uint(obj.at("lr_halving_period"), joined(path, "lr_halving_period")));
        if (t.lr_halving_period == 0) {
            throw ConfigError("config value \"" + joined(path, "lr_halving_period") +
                              "\" must be > 0");
        }
    }
    if (obj.contains("fallback_lr_start_epoch")) {
        t.fallback_lr_start_epoch = static_cast<std::size_t>(
            as_uint(obj.at("fallback_lr_start_epoch"), joined(path, "fallback_lr_start_epoch")));
    }
    if (obj.contains("anneal_step")) {
        t.anneal_step = as_double(obj.at("anneal_step"), joined(path, "anneal_step"));
        if (t.anneal_step <= 0.0) {
            throw ConfigError("config value \"" + joined(path, "anneal_step") + "\" must be > 0");
        }
    }
    if (obj.contains("anneal_target")) {
        t.anneal_target = as_double(obj.at("anneal_target"), joined(path, "anneal_target"));
        if (t.anneal_target <= 0.0) {
            throw ConfigError("config value \"" + joined(path, "anneal_target") +
                              "\" must be > 0");
        }
    }
    if (obj.contains("drop_partial_batch")) {
        out.drop_partial_config = as_bool(obj.at("drop_partial_batch"),
                                          joined(path, "drop_partial_batch"));
    }
}

EvaluationConfig parse_evaluation(const json& obj, const std::string& path) {
    check_keys(obj, path, {"location_param", "sample_count", "log_offset", "scatter_anchors"});
    EvaluationConfig e;
    if (obj.contains("location_param")) {
        e.location_param = static_cast<std::size_t>(
            as_uint(obj.at("location_param"), joined(path, "location_param")));
        if (e.location_param < 2) {
            throw ConfigError("config value \"" + joined(path, "location_param") +
                              "\" must be at least 2");
        }
    }
    if (obj.contains("sample_count")) {
        e.sample_count = static_cast<std::size_t>(
            as_uint(obj.at("sample_count"), joined(path, "sample_count")));
    }
    if (obj.contains("log_offset")) {
        e.log_offset = as_double(obj.at("log_offset"), joined(path, "log_offset"));
        if (e.log_offset <= 0.0) {
            throw ConfigError("config value \"" + joined(path, "log_offset") + "\" must be > 0");
        }
    }
    if (obj.contains("scatter_anchors")) {
        e.scatter_anchors = static_cast<std::size_t>(
            as_uint(obj.at("scatter_anchors"), joined(path, "scatter_anchors")));
    }
    return e;
}

std::vector<MethodConfig> parse_methods(const json& arr, const std::string& path,
                                        const ModelSpec& base) {
    if (!arr.is_array()) throw ConfigError("config value \"" + path + "\" must be an array");
    std::vector<MethodConfig> methods;
    methods.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string epath = path + "[" + std::to_string(i) + "]";
        MethodConfig m = parse_method_entry(arr[i], epath, base);
        for (const MethodConfig& other : methods) {
            if (other.name == m.name) {
                throw ConfigError("config section \"" + path + "\" repeats the method name \"" +
                                  m.name + "\"");
            }
        }
        methods.push_back(std::move(m));
    }
    return methods;
}

} // namespace

std::string default_method_name(const ModelSpec& spec) {
    std::string name = variant_name(spec.variant);
    if (spec.uses_distance_loss()) {
        std::string kind = distance_kind_name(spec.distance_loss);
        for (char& c : kind) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        name += "_" + kind;
    }
    return name;
}

TrainConfig RunConfig::training_for(Variant variant) const {
    TrainConfig t = training;
    apply_variant_defaults(t, variant);
    if (batch_size_config) t.batch_size = *batch_size_config;
    if (drop_partial_config) t.drop_partial_batch = *drop_partial_config;
    t.seed = seed;
    return t;
}

RunConfig parse_run_config(const nlohmann::json& root) {
    check_keys(root, "",
               {"seed", "output_dir", "threads", "dataset", "model", "training", "evaluation",
                "methods"});
    RunConfig cfg;
    if (root.contains("seed")) cfg.seed = as_uint(root.at("seed"), "seed");
    if (root.contains("output_dir")) {
        cfg.output_dir = as_string(root.at("output_dir"), "output_dir");
        if (cfg.output_dir.empty()) {
            throw ConfigError("config value \"output_dir\" must not be empty");
        }
    }
    if (root.contains("threads")) {
        cfg.threads = static_cast<std::size_t>(as_uint(root.at("threads"), "threads"));
    }
    if (!root.contains("dataset")) {
        throw ConfigError("config is missing the dataset section");
    }
    cfg.dataset = parse_dataset(root.at("dataset"), "dataset");
    if (root.contains("model")) {
        cfg.model = parse_method_entry(root.at("model"), "model", ModelSpec{});
    }
    if (root.contains("training")) parse_training(root.at("training"), "training", cfg);
    if (root.contains("evaluation")) {
        cfg.evaluation = parse_evaluation(root.at("evaluation"), "evaluation");
    }
    if (root.contains("methods")) {
        const ModelSpec base =
            (cfg.model && !cfg.model->is_pca) ? cfg.model->spec : ModelSpec{};
        cfg.methods = parse_methods(root.at("methods"), "methods", base);
    }
    cfg.training.seed = cfg.seed;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(root);
}

std::string config_checksum(const nlohmann::json& root) {
    const std::string dumped = root.dump(); // nlohmann keeps keys sorted
    return checksum_hex(fnv1a64(dumped.data(), dumped.size()));
}

StageRecord& RunManifest::add_stage(const std::string& name) {
    stages.push_back(StageRecord{});
    stages.back().name = name;
    return stages.back();
}

void record_input(StageRecord& stage, const std::string& path) {
    stage.inputs.emplace_back(path, file_checksum_hex(path));
}

void record_output(StageRecord& stage, const std::string& path) {
    stage.outputs.emplace_back(path, file_checksum_hex(path));
}

nlohmann::json manifest_to_json(const RunManifest& manifest) {
    nlohmann::json j;
    j["config_checksum"] = manifest.config_checksum;
    j["toolkit_version"] = manifest.toolkit_version;
    j["seed"] = manifest.seed;
    nlohmann::json stages = nlohmann::json::array();
    for (const StageRecord& stage : manifest.stages) {
        nlohmann::json s;
        s["name"] = stage.name;
        if (stage.seed) s["seed"] = *stage.seed;
        auto files = [](const std::vector<std::pair<std::string, std::string>>& list) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& [path, checksum] : list) {
                arr.push_back({{"path", path}, {"checksum", checksum}});
            }
            return arr;
        };
        s["inputs"] = files(stage.inputs);
        s["outputs"] = files(stage.outputs);
        s["seconds"] = stage.seconds;
        stages.push_back(std::move(s));
    }
    j["stages"] = std::move(stages);
    return j;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    write_file_atomic(path, manifest_to_json(manifest).dump(2) + "\n");
}

} // namespace diresa
