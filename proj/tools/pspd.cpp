// pspd: experiment runner for progressive self-paced distillation.
//
//   pspd run <config> [--seed N] [--epochs N] [--ablation A] [--gamma G]
//   pspd ablate <config> [same flags] [--kind-sweep]
//   pspd curves <trace...> -o <file>
//   pspd gen-data <spec> -o <csv>
//
// Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pspd/error.hpp"
#include "pspd/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct ExperimentArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::string> ablation;
    std::optional<double> gamma;
    std::optional<std::size_t> threads;
    std::optional<std::string> output;
    bool kind_sweep = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentArgs& args) {
    cmd->add_option("config", args.config_path, "YAML experiment config")->required();
    cmd->add_option("--seed", args.seed, "override seed");
    cmd->add_option("--epochs", args.epochs, "override training.epochs");
    cmd->add_option("--ablation", args.ablation,
                    "override training.ablation (baseline, pcl_only, pcd_only, full)");
    cmd->add_option("--gamma", args.gamma, "override training.gamma");
    cmd->add_option("--threads", args.threads, "override threads");
    cmd->add_option("-o,--output", args.output, "override output_dir");
}

pspd::ExperimentConfig load_config(const ExperimentArgs& args) {
    pspd::ExperimentConfig config = pspd::load_experiment_config(args.config_path);
    pspd::ConfigOverrides o;
    o.seed = args.seed;
    o.epochs = args.epochs;
    o.gamma = args.gamma;
    o.threads = args.threads;
    if (args.ablation) {
        try {
            o.ablation = pspd::parse_ablation(*args.ablation);
        } catch (const std::exception& e) {
            throw pspd::ConfigError(std::string("--ablation: ") + e.what());
        }
    }
    if (args.output) {
        o.output_dir = *args.output;
    }
    if (args.kind_sweep) {
        config.kind_sweep = true;
    }
    pspd::apply_overrides(config, o);
    return config;
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void print_summary(const std::string& label, const std::vector<pspd::MetricSummary>& summary) {
    std::string line = label;
    for (const auto& m : summary) {
        line += "  " + m.metric + " ";
        if (m.n == 0) {
            line += "n/a";
            continue;
        }
        line += format_value(m.mean);
        if (m.std) {
            line += " +- " + format_value(*m.std);
        }
    }
    std::cout << line << '\n';
}

void print_arms(const std::vector<pspd::FoldResult>& results) {
    std::vector<std::string> order;
    for (const auto& r : results) {
        if (std::find(order.begin(), order.end(), r.arm.name) == order.end()) {
            order.push_back(r.arm.name);
        }
    }
    std::size_t width = 0;
    for (const auto& name : order) {
        width = std::max(width, name.size());
    }
    for (const auto& name : order) {
        std::vector<pspd::FoldResult> subset;
        for (const auto& r : results) {
            if (r.arm.name == name) {
                subset.push_back(r);
            }
        }
        print_summary(name + std::string(width - name.size(), ' '), pspd::summarize(subset));
    }
}

void ensure_parent(const std::filesystem::path& file) {
    if (file.has_parent_path()) {
        std::filesystem::create_directories(file.parent_path());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Progressive self-paced distillation experiments"};
    app.require_subcommand(1);

    ExperimentArgs run_args;
    CLI::App* run = app.add_subcommand("run", "train one configuration across all folds");
    add_experiment_flags(run, run_args);

    ExperimentArgs ablate_args;
    CLI::App* ablate = app.add_subcommand("ablate", "baseline / pcl_only / pcd_only / full grid");
    add_experiment_flags(ablate, ablate_args);
    ablate->add_flag("--kind-sweep", ablate_args.kind_sweep,
                     "also compare hard/soft regularizers for both channels");

    std::vector<std::string> trace_paths;
    std::string curves_out;
    CLI::App* curves = app.add_subcommand("curves", "merge trace CSVs into long format");
    curves->add_option("traces", trace_paths, "trace.csv files")->required();
    curves->add_option("-o,--output", curves_out, "output CSV")->required();

    std::string spec_path;
    std::string data_out;
    CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
    gen->add_option("spec", spec_path, "YAML synthetic data spec")->required();
    gen->add_option("-o,--output", data_out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (run->parsed()) {
            const pspd::ExperimentConfig config = load_config(run_args);
            const pspd::RunReport report = pspd::run_experiment(config);
            std::cout << "config_hash " << report.config_hash << '\n';
            print_summary(report.results.front().arm.name, report.summary);
            std::cout << "results in " << config.output_dir.string() << '\n';
        } else if (ablate->parsed()) {
            const pspd::ExperimentConfig config = load_config(ablate_args);
            const pspd::AblationReport report = pspd::run_ablation_grid(config);
            std::cout << "config_hash " << report.config_hash << '\n';
            print_arms(report.results);
            if (!report.kind_sweep.empty()) {
                print_arms(report.kind_sweep);
            }
            std::cout << "results in " << config.output_dir.string() << '\n';
        } else if (curves->parsed()) {
            std::vector<std::filesystem::path> paths(trace_paths.begin(), trace_paths.end());
            ensure_parent(curves_out);
            pspd::emit_curves(paths, curves_out);
        } else if (gen->parsed()) {
            const pspd::SyntheticSpec spec = pspd::load_synthetic_spec(spec_path);
            const pspd::SyntheticDataset data = pspd::generate_synthetic(spec);
            ensure_parent(data_out);
            pspd::write_csv(data_out, data.data, &data.clean_labels);
        }
    } catch (const pspd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const pspd::InvalidInput& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const pspd::DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
