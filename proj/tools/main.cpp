#include "sgfem/errors.hpp"
#include "sgfem/runner.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string preset_dir() {
    if (const char* env = std::getenv("SGFEM_PRESETS")) return env;
    if (std::filesystem::is_directory(SGFEM_PRESET_DIR)) return SGFEM_PRESET_DIR;
    return SGFEM_INSTALLED_PRESET_DIR;
}

struct Source {
    std::string config;
    std::string preset;
    std::vector<std::string> sets;
};

void add_source_options(CLI::App* cmd, Source& s) {
    cmd->add_option("--config", s.config, "Config file (key = value)");
    cmd->add_option("--preset", s.preset, "Preset name (see list-presets)");
    cmd->add_option("--set", s.sets, "Override one key: --set key=value (repeatable)");
}

// Preset first, then the config file, then --set overrides.
sgfem::config::RunConfig load(const Source& s, std::vector<std::string>& problems) {
    sgfem::config::KeyValues kv;
    if (!s.preset.empty()) kv = sgfem::config::parse_file(sgfem::runner::preset_path(preset_dir(), s.preset));
    if (!s.config.empty())
        for (auto& [k, v] : sgfem::config::parse_file(s.config)) kv[k] = v;
    for (const auto& a : s.sets) sgfem::config::apply_override(kv, a);
    if (!s.preset.empty() && !kv.count("name")) kv["name"] = s.preset;
    auto c = sgfem::config::from_key_values(kv, &problems);
    for (auto& p : sgfem::config::validate(c)) problems.push_back(std::move(p));
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic Galerkin FEM with hierarchical error estimation"};
    app.require_subcommand(1);

    Source run_src, val_src;
    std::string out_dir = "sgfem-out";
    int threads = 0;

    auto* run = app.add_subcommand("run", "Run an experiment and write run.json, table.csv (and trace.csv)");
    add_source_options(run, run_src);
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--threads", threads, "Worker threads (overrides run.threads)")->check(CLI::NonNegativeNumber);

    auto* val = app.add_subcommand("validate", "Check a configuration and list every violated constraint");
    add_source_options(val, val_src);

    auto* list = app.add_subcommand("list-presets", "List the shipped experiment presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            const auto dir = preset_dir();
            for (const auto& name : sgfem::runner::list_presets(dir))
                std::cout << name << "\t" << sgfem::runner::preset_description(sgfem::runner::preset_path(dir, name))
                          << "\n";
            return 0;
        }
        const Source& src = run->parsed() ? run_src : val_src;
        std::vector<std::string> problems;
        auto cfg = load(src, problems);
        if (val->parsed()) {
            for (const auto& p : problems) std::cout << p << "\n";
            if (problems.empty()) std::cout << "ok\n";
            return problems.empty() ? 0 : kExitConfig;
        }
        if (!problems.empty()) {
            std::cerr << "invalid configuration:\n";
            for (const auto& p : problems) std::cerr << "  " << p << "\n";
            return kExitConfig;
        }
        if (threads > 0) cfg.threads = threads;
        const auto artifacts = sgfem::runner::run(cfg, &std::cerr);
        sgfem::runner::write_artifacts(artifacts, out_dir);
        std::cerr << "wrote " << out_dir << "/run.json, table.csv" << (artifacts.trace_csv.empty() ? "" : ", trace.csv")
                  << "\n";
        return 0;
    } catch (const sgfem::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sgfem::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
