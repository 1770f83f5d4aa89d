#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "pspd/error.hpp"
#include "pspd/experiment.hpp"

namespace pspd {

namespace {

using nlohmann::ordered_json;

// Calls fn(i) for i in [0, n) on up to `threads` workers. The first failure
// by index is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < std::min(threads, n); ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
}

void append_optional(std::string& out, const std::optional<double>& v) {
    if (v) {
        append_number(out, *v);
    }
}

ordered_json report_json(const MetricsReport& r) {
    return ordered_json::parse(r.to_json());
}

std::string fold_dir(std::size_t fold) {
    return "fold_" + std::to_string(fold);
}

void write_fold(const std::filesystem::path& dir, const FoldResult& r, const std::string& hash) {
    ordered_json j;
    j["config_hash"] = hash;
    j["fold"] = r.fold;
    j["arm"] = r.arm.name;
    j["ablation"] = to_string(r.arm.ablation);
    j["pcl_regularizer"] = to_string(r.arm.pcl_kind);
    j["pcd_regularizer"] = to_string(r.arm.pcd_kind);
    j["test"] = report_json(r.test);
    j["final_validation"] = r.final_validation ? report_json(*r.final_validation) : ordered_json();
    write_text(dir / "metrics.json", j.dump(2) + "\n");

    const std::vector<std::string> comments{"config_hash: " + hash,
                                            "fold: " + std::to_string(r.fold),
                                            "arm: " + r.arm.name};
    r.trace.write_csv(dir / "trace.csv", comments);
}

std::string results_table(std::span<const FoldResult> results, const std::string& hash,
                          bool fold_major) {
    std::string text = "# config_hash: " + hash + "\n";
    text += "fold,arm,ablation,pcl_regularizer,pcd_regularizer,acc,sen,spe,auc,ece,nll\n";
    std::vector<const FoldResult*> rows;
    for (const auto& r : results) {
        rows.push_back(&r);
    }
    if (fold_major) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const FoldResult* a, const FoldResult* b) { return a->fold < b->fold; });
    }
    for (const FoldResult* r : rows) {
        text += std::to_string(r->fold) + ',' + r->arm.name + ',' +
                std::string(to_string(r->arm.ablation)) + ',' +
                std::string(to_string(r->arm.pcl_kind)) + ',' +
                std::string(to_string(r->arm.pcd_kind)) + ',';
        append_number(text, r->test.acc);
        text += ',';
        append_optional(text, r->test.sen);
        text += ',';
        append_optional(text, r->test.spe);
        text += ',';
        append_optional(text, r->test.auc);
        text += ',';
        append_number(text, r->test.ece);
        text += ',';
        append_number(text, r->test.nll);
        text += '\n';
    }
    return text;
}

std::string summary_rows(const std::vector<MetricSummary>& summary, const std::string& prefix) {
    std::string text;
    for (const auto& m : summary) {
        text += prefix + m.metric + ',' + std::to_string(m.n) + ',';
        if (m.n > 0) {
            append_number(text, m.mean);
        }
        text += ',';
        append_optional(text, m.std);
        text += '\n';
    }
    return text;
}

// Per-arm summaries, arms in first-appearance order.
std::string arm_summary_table(std::span<const FoldResult> results, const std::string& hash) {
    std::string text = "# config_hash: " + hash + "\narm,metric,n,mean,std\n";
    std::vector<std::string> order;
    for (const auto& r : results) {
        if (std::find(order.begin(), order.end(), r.arm.name) == order.end()) {
            order.push_back(r.arm.name);
        }
    }
    for (const auto& name : order) {
        std::vector<FoldResult> subset;
        for (const auto& r : results) {
            if (r.arm.name == name) {
                subset.push_back(r);
            }
        }
        text += summary_rows(summarize(subset), name + ',');
    }
    return text;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const ExperimentConfig& config, const std::string& command,
                    const std::string& hash, const std::vector<std::string>& files) {
    ordered_json j;
    j["command"] = command;
    j["config_hash"] = hash;
    j["created_utc"] = utc_timestamp();
    j["threads"] = config.threads;
    j["files"] = files;
    write_text(config.output_dir / "manifest.json", j.dump(2) + "\n");
}

void write_config(const ExperimentConfig& config, const std::string& hash) {
    ordered_json j;
    j["config_hash"] = hash;
    j["config"] = ordered_json::parse(config.canonical_json());
    write_text(config.output_dir / "config.json", j.dump(2) + "\n");
}

std::vector<std::string> fold_files(const std::string& prefix, std::size_t folds) {
    std::vector<std::string> files;
    for (std::size_t f = 0; f < folds; ++f) {
        files.push_back(prefix + fold_dir(f) + "/metrics.json");
        files.push_back(prefix + fold_dir(f) + "/trace.csv");
    }
    return files;
}

} // namespace

std::vector<FoldData> prepare_folds(const ExperimentConfig& config) {
    config.validate();
    Dataset all;
    try {
        if (config.data.kind == DataSource::Kind::Synthetic) {
            SyntheticSpec spec = config.data.synthetic;
            spec.seed = config.seed;
            all = generate_synthetic(spec).data;
        } else {
            all = load_csv(config.data.csv_path, config.data.csv);
        }
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("data: ") + e.what());
    }

    std::vector<FoldData> folds;
    for (std::size_t f = 0; f < config.folds; ++f) {
        FoldData fold;
        fold.fold = f;
        fold.seed = config.seed + f;
        SplitSpec spec = config.split;
        spec.seed = fold.seed;
        SplitIndices idx;
        try {
            idx = split(all, spec);
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("split: ") + e.what());
        }
        fold.train = all.subset(idx.train);
        fold.val = all.subset(idx.val);
        fold.test = all.subset(idx.test);
        const Standardizer z = Standardizer::fit(fold.train.features);
        fold.train.features = z.apply(fold.train.features);
        fold.val.features = z.apply(fold.val.features);
        fold.test.features = z.apply(fold.test.features);
        folds.push_back(std::move(fold));
    }
    return folds;
}

std::vector<FoldResult> run_arms(const ExperimentConfig& config, std::span<const Arm> arms,
                                 std::span<const FoldData> folds) {
    std::vector<FoldResult> results(arms.size() * folds.size());
    parallel_for(results.size(), config.threads, [&](std::size_t job) {
        const Arm& arm = arms[job / folds.size()];
        const FoldData& fold = folds[job % folds.size()];
        TrainConfig tc = config.training;
        tc.ablation = arm.ablation;
        tc.pcl_kind = arm.pcl_kind;
        tc.pcd_kind = arm.pcd_kind;
        tc.seed = fold.seed;
        TrainOptions options;
        options.validation = &fold.val;
        TrainResult trained;
        try {
            trained = train(tc, fold.train, options);
        } catch (const DivergenceError& e) {
            throw DivergenceError("fold " + std::to_string(fold.fold) + ", arm " + arm.name + ": " +
                                  e.what());
        }
        FoldResult& r = results[job];
        r.fold = fold.fold;
        r.arm = arm;
        r.test = evaluate_probs(softmax_rows(forward(trained.params, fold.test.features)),
                                fold.test.labels, tc.ece_bins);
        r.final_validation = trained.trace.epochs.back().validation;
        r.trace = std::move(trained.trace);
        r.params = std::move(trained.params);
    });
    return results;
}

std::vector<MetricSummary> summarize(std::span<const FoldResult> results) {
    using Getter = std::optional<double> (*)(const MetricsReport&);
    const std::pair<const char*, Getter> metrics[] = {
        {"acc", [](const MetricsReport& m) -> std::optional<double> { return m.acc; }},
        {"sen", [](const MetricsReport& m) { return m.sen; }},
        {"spe", [](const MetricsReport& m) { return m.spe; }},
        {"auc", [](const MetricsReport& m) { return m.auc; }},
        {"ece", [](const MetricsReport& m) -> std::optional<double> { return m.ece; }},
        {"nll", [](const MetricsReport& m) -> std::optional<double> { return m.nll; }},
    };
    std::vector<MetricSummary> out;
    for (const auto& [name, get] : metrics) {
        std::vector<double> values;
        for (const auto& r : results) {
            if (const auto v = get(r.test)) {
                values.push_back(*v);
            }
        }
        MetricSummary s;
        s.metric = name;
        s.n = values.size();
        if (!values.empty()) {
            double sum = 0.0;
            for (double v : values) {
                sum += v;
            }
            s.mean = sum / static_cast<double>(values.size());
        }
        if (values.size() >= 2) {
            double ss = 0.0;
            for (double v : values) {
                ss += (v - s.mean) * (v - s.mean);
            }
            s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        out.push_back(s);
    }
    return out;
}

RunReport run_experiment(const ExperimentConfig& config) {
    const std::vector<FoldData> folds = prepare_folds(config);
    const std::string hash = config.hash();
    const std::vector<Arm> arms{{std::string(to_string(config.training.ablation)),
                                 config.training.ablation, config.training.pcl_kind,
                                 config.training.pcd_kind}};
    RunReport report;
    report.config_hash = hash;
    report.results = run_arms(config, arms, folds);
    report.summary = summarize(report.results);

    for (const auto& r : report.results) {
        write_fold(config.output_dir / fold_dir(r.fold), r, hash);
    }
    write_text(config.output_dir / "summary.csv",
               "# config_hash: " + hash + "\nmetric,n,mean,std\n" + summary_rows(report.summary, ""));
    write_config(config, hash);
    std::vector<std::string> files = fold_files("", config.folds);
    files.push_back("summary.csv");
    files.push_back("config.json");
    write_manifest(config, "run", hash, files);
    return report;
}

std::vector<Arm> ablation_arms(const TrainConfig& training) {
    std::vector<Arm> arms;
    for (Ablation a : {Ablation::Baseline, Ablation::PclOnly, Ablation::PcdOnly, Ablation::Full}) {
        arms.push_back({std::string(to_string(a)), a, training.pcl_kind, training.pcd_kind});
    }
    return arms;
}

std::vector<Arm> kind_sweep_arms() {
    std::vector<Arm> arms;
    for (RegularizerKind pcl : {RegularizerKind::Hard, RegularizerKind::Soft}) {
        for (RegularizerKind pcd : {RegularizerKind::Hard, RegularizerKind::Soft}) {
            arms.push_back({"full_pcl-" + std::string(to_string(pcl)) + "_pcd-" +
                                std::string(to_string(pcd)),
                            Ablation::Full, pcl, pcd});
        }
    }
    return arms;
}

AblationReport run_ablation_grid(const ExperimentConfig& config) {
    const std::vector<FoldData> folds = prepare_folds(config);
    const std::string hash = config.hash();
    AblationReport report;
    report.config_hash = hash;
    std::vector<std::string> files;

    const std::vector<Arm> arms = ablation_arms(config.training);
    report.results = run_arms(config, arms, folds);
    for (const auto& r : report.results) {
        write_fold(config.output_dir / r.arm.name / fold_dir(r.fold), r, hash);
    }
    for (const auto& arm : arms) {
        const auto part = fold_files(arm.name + "/", config.folds);
        files.insert(files.end(), part.begin(), part.end());
    }
    write_text(config.output_dir / "ablation.csv", results_table(report.results, hash, true));
    write_text(config.output_dir / "ablation_summary.csv", arm_summary_table(report.results, hash));
    files.push_back("ablation.csv");
    files.push_back("ablation_summary.csv");

    if (config.kind_sweep) {
        const std::vector<Arm> sweep = kind_sweep_arms();
        report.kind_sweep = run_arms(config, sweep, folds);
        for (const auto& r : report.kind_sweep) {
            write_fold(config.output_dir / "kind_sweep" / r.arm.name / fold_dir(r.fold), r, hash);
        }
        for (const auto& arm : sweep) {
            const auto part = fold_files("kind_sweep/" + arm.name + "/", config.folds);
            files.insert(files.end(), part.begin(), part.end());
        }
        write_text(config.output_dir / "kind_sweep.csv",
                   results_table(report.kind_sweep, hash, true));
        write_text(config.output_dir / "kind_sweep_summary.csv",
                   arm_summary_table(report.kind_sweep, hash));
        files.push_back("kind_sweep.csv");
        files.push_back("kind_sweep_summary.csv");
    }
    write_config(config, hash);
    files.push_back("config.json");
    write_manifest(config, "ablate", hash, files);
    return report;
}

} // namespace pspd
