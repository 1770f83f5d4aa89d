#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "pspd/error.hpp"
#include "pspd/experiment.hpp"

namespace pspd {

namespace {

std::string anchor(std::string_view source, const YAML::Mark& mark) {
    std::string out(source);
    if (!mark.is_null()) {
        out += ':' + std::to_string(mark.line + 1) + ':' + std::to_string(mark.column + 1);
    }
    return out + ": ";
}

// Reads one YAML mapping, remembering which keys were consumed so the rest
// can be reported as unknown.
class Section {
public:
    Section(YAML::Node node, std::string path, std::string_view source)
        : node_(std::move(node)), path_(std::move(path)), source_(source) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) {
            fail(node_, "expected a mapping");
        }
    }

    const YAML::Node& node() const { return node_; }

    [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
        throw ConfigError(anchor(source_, at.Mark()) + (path_.empty() ? "" : path_ + ": ") +
                          message);
    }

    YAML::Node get(const std::string& key) {
        seen_.insert(key);
        if (!node_ || !node_.IsMap()) {
            return YAML::Node(YAML::NodeType::Undefined);
        }
        return node_[key];
    }

    Section child(const std::string& key) {
        return Section(get(key), path_.empty() ? key : path_ + "." + key, source_);
    }

    std::string scalar(const YAML::Node& v, const std::string& key) const {
        if (!v.IsScalar()) {
            fail(v, "'" + key + "' must be a scalar");
        }
        return v.Scalar();
    }

    void read(const std::string& key, double& out) {
        const YAML::Node v = get(key);
        if (!v) {
            return;
        }
        const std::string text = scalar(v, key);
        double value = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
            fail(v, "'" + key + "' must be a finite number, got '" + text + "'");
        }
        out = value;
    }

    template <typename Unsigned>
    void read_unsigned(const std::string& key, Unsigned& out) {
        const YAML::Node v = get(key);
        if (!v) {
            return;
        }
        out = to_unsigned<Unsigned>(v, key);
    }

    template <typename Unsigned>
    Unsigned to_unsigned(const YAML::Node& v, const std::string& key) const {
        const std::string text = scalar(v, key);
        Unsigned value = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
            fail(v, "'" + key + "' must be a non-negative integer, got '" + text + "'");
        }
        return value;
    }

    void read(const std::string& key, bool& out) {
        const YAML::Node v = get(key);
        if (!v) {
            return;
        }
        const std::string text = scalar(v, key);
        if (text == "true") {
            out = true;
        } else if (text == "false") {
            out = false;
        } else {
            fail(v, "'" + key + "' must be true or false, got '" + text + "'");
        }
    }

    void read(const std::string& key, std::string& out) {
        const YAML::Node v = get(key);
        if (v) {
            out = scalar(v, key);
        }
    }

    // Parses the value with fn; any exception it throws is reported at the key.
    template <typename Fn>
    void read_with(const std::string& key, Fn fn) {
        const YAML::Node v = get(key);
        if (!v) {
            return;
        }
        const std::string text = scalar(v, key);
        try {
            fn(text);
        } catch (const std::exception& e) {
            fail(v, e.what());
        }
    }

    template <typename Fn>
    void check(Fn fn) const {
        try {
            fn();
        } catch (const std::exception& e) {
            fail(node_, e.what());
        }
    }

    void finish() const {
        if (!node_ || !node_.IsMap()) {
            return;
        }
        for (const auto& kv : node_) {
            const std::string key = kv.first.as<std::string>();
            if (!seen_.contains(key)) {
                fail(kv.first, "unknown key '" + key + "'");
            }
        }
    }

private:
    YAML::Node node_;
    std::string path_;
    std::string_view source_;
    std::set<std::string> seen_;
};

void read_pace(Section s, RegularizerKind& kind, PaceSchedule& pace) {
    s.read_with("regularizer", [&](const std::string& t) { kind = parse_regularizer_kind(t); });
    s.read("lambda0", pace.lambda0);
    s.read("alpha", pace.alpha);
    s.finish();
    s.check([&] { pace.validate(); });
}

void read_synthetic_fields(Section& s, SyntheticSpec& spec) {
    s.read_unsigned("n", spec.n);
    s.read_unsigned("d", spec.d);
    s.read_unsigned("class_count", spec.class_count);
    s.read("class_separation", spec.class_separation);
    s.read("noise_rate", spec.noise_rate);
}

void read_data(Section s, DataSource& data) {
    std::string source = "synthetic";
    s.read("source", source);
    if (source == "synthetic") {
        data.kind = DataSource::Kind::Synthetic;
        read_synthetic_fields(s, data.synthetic);
        s.finish();
        s.check([&] { data.synthetic.validate(); });
        return;
    }
    if (source != "csv") {
        s.fail(s.get("source"), "source must be 'synthetic' or 'csv', got '" + source + "'");
    }
    data.kind = DataSource::Kind::Csv;
    std::string path;
    s.read("path", path);
    if (path.empty()) {
        s.fail(s.node(), "csv source needs 'path'");
    }
    data.csv_path = path;
    const YAML::Node label = s.get("label_column");
    if (label) {
        const std::string text = s.scalar(label, "label_column");
        std::size_t index = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), index);
        if (res.ec == std::errc() && res.ptr == text.data() + text.size()) {
            data.csv.label_column = index;
        } else {
            data.csv.label_column = text;
        }
    }
    const YAML::Node classes = s.get("class_count");
    if (classes && !classes.IsNull()) {
        data.csv.class_count = s.to_unsigned<std::size_t>(classes, "class_count");
    }
    const YAML::Node drop = s.get("drop_columns");
    if (drop) {
        if (!drop.IsSequence()) {
            s.fail(drop, "'drop_columns' must be a list");
        }
        for (const auto& item : drop) {
            data.csv.drop_columns.push_back(s.scalar(item, "drop_columns"));
        }
    }
    s.finish();
}

void read_training(Section s, TrainConfig& t) {
    s.read_unsigned("epochs", t.epochs);
    s.read_unsigned("batch_size", t.batch_size);
    s.read("gamma", t.gamma);
    s.read_with("ablation", [&](const std::string& v) { t.ablation = parse_ablation(v); });
    const YAML::Node hidden = s.get("hidden_layers");
    if (hidden) {
        if (!hidden.IsSequence()) {
            s.fail(hidden, "'hidden_layers' must be a list of layer widths");
        }
        t.hidden_layers.clear();
        for (const auto& item : hidden) {
            t.hidden_layers.push_back(s.to_unsigned<std::size_t>(item, "hidden_layers"));
        }
    }
    s.read("freeze_model", t.freeze_model);
    read_pace(s.child("pcl"), t.pcl_kind, t.pcl_schedule);
    read_pace(s.child("pcd"), t.pcd_kind, t.pcd_schedule);

    Section lr = s.child("lr");
    lr.read("initial", t.lr_schedule.lr_init);
    lr.read("peak", t.lr_schedule.lr_peak);
    lr.read_unsigned("warmup_epochs", t.lr_schedule.warmup_epochs);
    lr.finish();
    lr.check([&] { t.lr_schedule.validate(); });

    Section adam = s.child("adam");
    adam.read("beta1", t.adam.beta1);
    adam.read("beta2", t.adam.beta2);
    adam.read("epsilon", t.adam.epsilon);
    adam.finish();

    s.finish();
    s.check([&] { t.validate(); });
}

YAML::Node load_yaml(std::string_view text, std::string_view source_name) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(anchor(source_name, e.mark) + e.msg);
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

void ExperimentConfig::validate() const {
    if (folds < 1) {
        throw ConfigError("folds must be at least 1");
    }
    if (threads < 1) {
        throw ConfigError("threads must be at least 1");
    }
    try {
        if (data.kind == DataSource::Kind::Synthetic) {
            data.synthetic.validate();
        }
        split.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    training.validate();
}

ExperimentConfig parse_experiment_config(std::string_view text, std::string_view source_name) {
    const YAML::Node root = load_yaml(text, source_name);
    ExperimentConfig config;
    Section top(root, "", source_name);
    top.read_unsigned("seed", config.seed);
    top.read_unsigned("folds", config.folds);
    top.read_unsigned("threads", config.threads);
    std::string output_dir = config.output_dir.string();
    top.read("output_dir", output_dir);
    config.output_dir = output_dir;
    top.read("kind_sweep", config.kind_sweep);
    read_data(top.child("data"), config.data);

    Section split = top.child("split");
    split.read("train", config.split.train_frac);
    split.read("val", config.split.val_frac);
    split.read("test", config.split.test_frac);
    split.finish();
    split.check([&] { config.split.validate(); });

    read_training(top.child("training"), config.training);

    Section metrics = top.child("metrics");
    metrics.read_unsigned("ece_bins", config.training.ece_bins);
    metrics.finish();

    top.finish();
    top.check([&] { config.validate(); });
    config.data.synthetic.seed = config.seed;
    return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_file(path), path.string());
}

SyntheticSpec parse_synthetic_spec(std::string_view text, std::string_view source_name) {
    const YAML::Node root = load_yaml(text, source_name);
    SyntheticSpec spec;
    Section s(root, "", source_name);
    read_synthetic_fields(s, spec);
    s.read_unsigned("seed", spec.seed);
    s.finish();
    s.check([&] { spec.validate(); });
    return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    return parse_synthetic_spec(read_file(path), path.string());
}

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& o) {
    if (o.seed) {
        config.seed = *o.seed;
        config.data.synthetic.seed = *o.seed;
    }
    if (o.epochs) {
        config.training.epochs = *o.epochs;
    }
    if (o.ablation) {
        config.training.ablation = *o.ablation;
    }
    if (o.gamma) {
        config.training.gamma = *o.gamma;
    }
    if (o.threads) {
        config.threads = *o.threads;
    }
    if (o.output_dir) {
        config.output_dir = *o.output_dir;
    }
    config.validate();
}

std::string ExperimentConfig::canonical_json() const {
    using nlohmann::ordered_json;
    ordered_json j;
    j["seed"] = seed;
    j["folds"] = folds;
    ordered_json d;
    if (data.kind == DataSource::Kind::Synthetic) {
        d["source"] = "synthetic";
        d["n"] = data.synthetic.n;
        d["d"] = data.synthetic.d;
        d["class_count"] = data.synthetic.class_count;
        d["class_separation"] = data.synthetic.class_separation;
        d["noise_rate"] = data.synthetic.noise_rate;
    } else {
        d["source"] = "csv";
        d["path"] = data.csv_path.generic_string();
        if (const auto* name = std::get_if<std::string>(&data.csv.label_column)) {
            d["label_column"] = *name;
        } else {
            d["label_column"] = std::get<std::size_t>(data.csv.label_column);
        }
        d["class_count"] = data.csv.class_count ? ordered_json(*data.csv.class_count)
                                                : ordered_json(nullptr);
        d["drop_columns"] = data.csv.drop_columns;
    }
    j["data"] = d;
    j["split"] = {{"train", split.train_frac}, {"val", split.val_frac}, {"test", split.test_frac}};
    const TrainConfig& t = training;
    ordered_json tr;
    tr["epochs"] = t.epochs;
    tr["batch_size"] = t.batch_size;
    tr["gamma"] = t.gamma;
    tr["ablation"] = to_string(t.ablation);
    tr["hidden_layers"] = t.hidden_layers;
    tr["freeze_model"] = t.freeze_model;
    tr["pcl"] = {{"regularizer", to_string(t.pcl_kind)},
                 {"lambda0", t.pcl_schedule.lambda0},
                 {"alpha", t.pcl_schedule.alpha}};
    tr["pcd"] = {{"regularizer", to_string(t.pcd_kind)},
                 {"lambda0", t.pcd_schedule.lambda0},
                 {"alpha", t.pcd_schedule.alpha}};
    tr["lr"] = {{"initial", t.lr_schedule.lr_init},
                {"peak", t.lr_schedule.lr_peak},
                {"warmup_epochs", t.lr_schedule.warmup_epochs}};
    tr["adam"] = {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"epsilon", t.adam.epsilon}};
    j["training"] = tr;
    j["metrics"] = {{"ece_bins", t.ece_bins}};
    j["kind_sweep"] = kind_sweep;
    return j.dump(2);
}

std::string ExperimentConfig::hash() const {
    const std::string text = canonical_json();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xF];
    }
    return out;
}

} // namespace pspd
