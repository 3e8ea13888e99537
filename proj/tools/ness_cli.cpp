// Command-line front end. Talks to the library only through the C interface.

#include <charconv>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ness/ness.h"

namespace {

constexpr int kExitFailure = 1;

int exit_code(ness_status s) {
    switch (s) {
        case NESS_OK: return 0;
        case NESS_ERR_NONCONVERGENCE: return 2;
        case NESS_ERR_VALIDATION: return 3;
        case NESS_ERR_CONFIG:
        case NESS_ERR_INVALID_ARGUMENT: return 4;
        default: return kExitFailure;
    }
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

std::string shortest(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

/// Structured error report on stderr; returns the exit code.
int report_error(ness_status s) {
    std::cerr << "{\"error\": \"" << ness_status_name(s) << "\", \"message\": \"" << json_escape(ness_last_error())
              << "\"}\n";
    return exit_code(s);
}

struct ConfigHandle {
    ness_config* p = nullptr;
    ConfigHandle() = default;
    ConfigHandle(const ConfigHandle&) = delete;
    ConfigHandle& operator=(const ConfigHandle&) = delete;
    ~ConfigHandle() { ness_config_free(p); }
};

struct ResultHandle {
    ness_result* p = nullptr;
    ResultHandle() = default;
    ResultHandle(const ResultHandle&) = delete;
    ResultHandle& operator=(const ResultHandle&) = delete;
    ~ResultHandle() { ness_result_free(p); }
};

struct GlobalFlags {
    std::optional<unsigned long long> seed;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
};

struct RunFlags {
    std::vector<std::string> overrides;
    bool print_config = false;
    bool dry_run = false;
};

ness_status apply_assignment(ness_config* c, const std::string& a) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) {
        const std::string key = a;
        return ness_config_set(c, key.c_str(), "");
    }
    const std::string key = a.substr(0, eq), value = a.substr(eq + 1);
    return ness_config_set(c, key.c_str(), value.c_str());
}

ness_status apply_flags(ness_config* c, const RunFlags& run, const GlobalFlags& g) {
    for (const auto& a : run.overrides)
        if (ness_status s = apply_assignment(c, a); s != NESS_OK) return s;
    std::vector<std::pair<std::string, std::string>> sets;
    if (g.seed) sets.emplace_back("trajectory.seed", std::to_string(*g.seed));
    if (g.workers) sets.emplace_back("trajectory.workers", std::to_string(*g.workers));
    if (g.out_dir) sets.emplace_back("output.dir", *g.out_dir);
    if (g.format) sets.emplace_back("output.format", *g.format);
    for (const auto& [k, v] : sets)
        if (ness_status s = ness_config_set(c, k.c_str(), v.c_str()); s != NESS_OK) return s;
    return ness_config_validate(c);
}

int execute(ness_config* c, const RunFlags& run) {
    if (run.print_config || run.dry_run) {
        char* text = nullptr;
        if (ness_status s = ness_config_to_text(c, &text); s != NESS_OK) return report_error(s);
        std::cout << text;
        ness_string_free(text);
        if (run.dry_run) return 0;
    }
    ResultHandle r;
    if (ness_status s = ness_run(c, &r.p); s != NESS_OK) return report_error(s);
    char* path = nullptr;
    if (ness_status s = ness_result_write(c, r.p, &path); s != NESS_OK) return report_error(s);
    const int status = ness_result_exit_status(r.p);
    std::cout << "wrote " << path << " (" << ness_result_point_count(r.p) << " points, " << ness_result_seconds(r.p)
              << " s, status " << status << ")\n";
    ness_string_free(path);
    if (status != 0) std::cerr << "{\"error\": \"nonconvergence\", \"message\": \"some points failed; see flags\"}\n";
    return status;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--set,-s", f.overrides, "override a config key (key=value), repeatable");
    cmd->add_flag("--print-config", f.print_config, "print the resolved configuration before running");
    cmd->add_flag("--dry-run", f.dry_run, "print the resolved configuration and exit");
}

void print_item(const char* name, int passed, const char* detail, double seconds, void*) {
    std::cout << (passed ? "PASS " : "FAIL ") << name << ": " << detail << " [" << seconds << " s]" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driven, lossy resonator arrays: steady states, trajectories and photon statistics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ness_version());

    GlobalFlags g;
    app.add_option("--seed", g.seed, "master seed for trajectory runs");
    app.add_option("--workers", g.workers, "worker threads (0 = all cores)");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--format", g.format, "table format")->check(CLI::IsMember({"csv", "json"}));

    auto* list = app.add_subcommand("list-presets", "list preset experiments");

    RunFlags preset_flags;
    std::string preset_name;
    bool preset_full = false;
    auto* preset = app.add_subcommand("preset", "run a preset experiment");
    preset->add_option("name", preset_name, "preset name (see list-presets)")->required();
    preset->add_flag("--full", preset_full, "large-scale variant (hours)");
    add_run_flags(preset, preset_flags);

    RunFlags run_flags;
    std::string config_path;
    auto* run = app.add_subcommand("run", "run a configuration file");
    run->add_option("config", config_path, "key = value configuration file")->required();
    add_run_flags(run, run_flags);

    RunFlags sweep_flags;
    std::string sweep_config, sweep_preset, variable = "drive_detuning";
    double from = 0.0, to = 0.0;
    int points = 0;
    auto* sweep = app.add_subcommand("sweep", "sweep a configuration or preset over a grid");
    auto* src_config = sweep->add_option("--config", sweep_config, "configuration file");
    sweep->add_option("--preset", sweep_preset, "preset name")->excludes(src_config);
    sweep->add_option("--variable", variable, "swept variable")
        ->check(CLI::IsMember({"drive_detuning", "delta_over_g"}));
    sweep->add_option("--from", from, "first grid value")->required();
    sweep->add_option("--to", to, "last grid value")->required();
    sweep->add_option("--points", points, "number of grid points")->required()->check(CLI::PositiveNumber);
    add_run_flags(sweep, sweep_flags);

    bool validate_full = false, corrupt = false;
    auto* validate = app.add_subcommand("validate", "run the validation suite");
    validate->add_flag("--full", validate_full, "add solver cross-checks and the acceptance suite");
    validate->add_flag("--corrupt-hopping-sign", corrupt, "test hook: flip the hopping sign in the Bloch check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 4;
    }

    if (list->parsed()) {
        for (size_t i = 0; i < ness_preset_count(); ++i)
            std::cout << ness_preset_name(i) << "\t" << ness_preset_description(i) << "\n";
        return 0;
    }

    if (validate->parsed()) {
        ness_report* rep = nullptr;
        const int workers = g.workers.value_or(1);
        if (ness_status s = ness_validate(validate_full, corrupt, workers, &rep); s != NESS_OK) return report_error(s);
        for (size_t i = 0; i < ness_report_count(rep); ++i) {
            const char *name = nullptr, *detail = nullptr;
            int passed = 0;
            double seconds = 0;
            ness_report_item(rep, i, &name, &passed, &detail, &seconds);
            print_item(name, passed, detail, seconds, nullptr);
        }
        const bool ok = ness_report_all_passed(rep) != 0;
        ness_report_free(rep);
        if (!ok) {
            std::cerr << "{\"error\": \"validation\", \"message\": \"one or more checks failed\"}\n";
            return 3;
        }
        return 0;
    }

    ConfigHandle c;
    const RunFlags* flags = nullptr;
    ness_status s = NESS_OK;
    if (preset->parsed()) {
        s = ness_config_from_preset(preset_name.c_str(), preset_full, &c.p);
        flags = &preset_flags;
    } else if (run->parsed()) {
        s = ness_config_load(config_path.c_str(), &c.p);
        flags = &run_flags;
    } else {
        if (sweep_config.empty() == sweep_preset.empty()) {
            std::cerr << "{\"error\": \"config\", \"message\": \"sweep needs exactly one of --config or --preset\"}\n";
            return 4;
        }
        s = sweep_preset.empty() ? ness_config_load(sweep_config.c_str(), &c.p)
                                 : ness_config_from_preset(sweep_preset.c_str(), 0, &c.p);
        if (s == NESS_OK) {
            const std::pair<const char*, std::string> sets[] = {{"sweep.variable", variable},
                                                                {"sweep.from", shortest(from)},
                                                                {"sweep.to", shortest(to)},
                                                                {"sweep.points", std::to_string(points)}};
            for (const auto& [k, v] : sets)
                if (s == NESS_OK) s = ness_config_set(c.p, k, v.c_str());
        }
        flags = &sweep_flags;
    }
    if (s != NESS_OK) return report_error(s);
    if (s = apply_flags(c.p, *flags, g); s != NESS_OK) return report_error(s);
    return execute(c.p, *flags);
}
