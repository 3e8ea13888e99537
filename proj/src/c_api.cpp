#include "ness/ness.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "ness/acceptance.hpp"
#include "ness/error.hpp"
#include "ness/experiments.hpp"

struct ness_config {
    ness::ExperimentConfig value;
};

struct ness_result {
    ness::RunResult value;
};

struct ness_report {
    std::vector<ness::CheckResult> items;
};

namespace {

thread_local std::string last_error;

ness_status to_status(ness::ErrorKind kind) { return static_cast<ness_status>(static_cast<int>(kind)); }

template <class F>
ness_status guarded(F&& body) {
    last_error.clear();
    try {
        body();
        return NESS_OK;
    } catch (const ness::Error& e) {
        last_error = e.what();
        return to_status(e.kind());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return NESS_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return NESS_ERR_INTERNAL;
    }
}

void require_handle(const void* p, const char* what) {
    if (!p) ness::fail(ness::ErrorKind::InvalidArgument, std::string(what) + " is null");
}

char* copy_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* ness_version(void) { return ness::version_string(); }

const char* ness_last_error(void) { return last_error.c_str(); }

const char* ness_status_name(ness_status status) {
    switch (status) {
        case NESS_OK: return "ok";
        case NESS_ERR_INTERNAL: return "internal";
        case NESS_ERR_NONCONVERGENCE: return "nonconvergence";
        case NESS_ERR_VALIDATION: return "validation";
        case NESS_ERR_CONFIG: return "config";
        case NESS_ERR_INVALID_ARGUMENT: return "invalid-argument";
        case NESS_ERR_IO: return "io";
    }
    return "unknown";
}

void ness_string_free(char* s) { delete[] s; }

ness_status ness_config_parse(const char* text, ness_config** out) {
    return guarded([&] {
        require_handle(text, "text");
        require_handle(out, "out");
        *out = new ness_config{ness::parse_config(text)};
    });
}

ness_status ness_config_load(const char* path, ness_config** out) {
    return guarded([&] {
        require_handle(path, "path");
        require_handle(out, "out");
        std::ifstream in(path, std::ios::binary);
        if (!in) ness::fail(ness::ErrorKind::Io, std::string("cannot open config file ") + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        *out = new ness_config{ness::parse_config(ss.str())};
    });
}

ness_status ness_config_from_preset(const char* name, int full, ness_config** out) {
    return guarded([&] {
        require_handle(name, "name");
        require_handle(out, "out");
        *out = new ness_config{ness::expand_preset(name, {}, full != 0)};
    });
}

ness_status ness_config_set(ness_config* config, const char* key, const char* value) {
    return guarded([&] {
        require_handle(config, "config");
        require_handle(key, "key");
        require_handle(value, "value");
        ness::apply_override(config->value, key, value);
    });
}

ness_status ness_config_validate(const ness_config* config) {
    return guarded([&] {
        require_handle(config, "config");
        config->value.validate();
    });
}

ness_status ness_config_to_text(const ness_config* config, char** out) {
    return guarded([&] {
        require_handle(config, "config");
        require_handle(out, "out");
        *out = copy_string(ness::to_text(config->value));
    });
}

void ness_config_free(ness_config* config) { delete config; }

size_t ness_preset_count(void) { return ness::preset_list().size(); }

const char* ness_preset_name(size_t index) {
    const auto& l = ness::preset_list();
    return index < l.size() ? l[index].name.c_str() : nullptr;
}

const char* ness_preset_description(size_t index) {
    const auto& l = ness::preset_list();
    return index < l.size() ? l[index].description.c_str() : nullptr;
}

ness_status ness_run(const ness_config* config, ness_result** out) {
    return guarded([&] {
        require_handle(config, "config");
        require_handle(out, "out");
        *out = new ness_result{ness::run_experiment(config->value)};
    });
}

int ness_result_exit_status(const ness_result* result) { return result ? result->value.exit_status : -1; }

size_t ness_result_point_count(const ness_result* result) {
    return result ? result->value.table.points.size() : 0;
}

double ness_result_seconds(const ness_result* result) { return result ? result->value.seconds : 0.0; }

ness_status ness_result_columns(const ness_result* result, char** out) {
    return guarded([&] {
        require_handle(result, "result");
        require_handle(out, "out");
        std::string s = result->value.table.axis;
        for (const auto& c : result->value.table.observable_columns()) s += "\n" + c;
        *out = copy_string(s);
    });
}

ness_status ness_result_column(const ness_result* result, const char* name, double* values, size_t capacity,
                               size_t* count) {
    return guarded([&] {
        require_handle(result, "result");
        require_handle(name, "name");
        const auto& t = result->value.table;
        std::vector<double> col;
        if (name == t.axis) {
            col = t.grid();
        } else {
            const auto names = t.observable_columns();
            std::string base = name;
            if (base.rfind("se_", 0) == 0) base = base.substr(3);
            if (std::find(names.begin(), names.end(), base) == names.end())
                ness::fail(ness::ErrorKind::InvalidArgument, std::string("unknown column '") + name + "'");
            col = t.column(name);
        }
        if (count) *count = col.size();
        if (values)
            for (size_t i = 0; i < col.size() && i < capacity; ++i) values[i] = col[i];
    });
}

ness_status ness_result_csv(const ness_result* result, char** out) {
    return guarded([&] {
        require_handle(result, "result");
        require_handle(out, "out");
        std::ostringstream os;
        ness::write_csv(result->value.table, os);
        *out = copy_string(os.str());
    });
}

ness_status ness_result_json(const ness_result* result, char** out) {
    return guarded([&] {
        require_handle(result, "result");
        require_handle(out, "out");
        *out = copy_string(ness::table_json(result->value.table));
    });
}

ness_status ness_result_sidecar(const ness_config* config, const ness_result* result, char** out) {
    return guarded([&] {
        require_handle(config, "config");
        require_handle(result, "result");
        require_handle(out, "out");
        *out = copy_string(ness::sidecar_json(config->value, result->value));
    });
}

ness_status ness_result_write(const ness_config* config, const ness_result* result, char** path_out) {
    return guarded([&] {
        require_handle(config, "config");
        require_handle(result, "result");
        const std::string path = ness::write_outputs(config->value, result->value);
        if (path_out) *path_out = copy_string(path);
    });
}

void ness_result_free(ness_result* result) { delete result; }

ness_status ness_validate(int full, int corrupt_hopping_sign, int workers, ness_report** out) {
    return guarded([&] {
        require_handle(out, "out");
        ness::ValidateOptions o;
        o.full = full != 0;
        o.corrupt_hopping_sign = corrupt_hopping_sign != 0;
        o.workers = workers;
        *out = new ness_report{ness::validate_suite(o)};
    });
}

ness_status ness_acceptance(int run_long, int workers, const int* only, size_t n_only, ness_item_callback callback,
                            void* user, ness_report** out) {
    return guarded([&] {
        require_handle(out, "out");
        if (n_only > 0) require_handle(only, "only");
        ness::AcceptanceOptions o;
        o.run_long = run_long != 0;
        o.workers = workers;
        o.only.assign(only, only + n_only);
        if (callback)
            o.on_result = [&](const ness::CriterionResult& r) {
                const std::string name = "criterion-" + std::to_string(r.id) + " " + r.name;
                callback(name.c_str(), r.passed ? 1 : 0, r.detail.c_str(), r.seconds, user);
            };
        auto report = std::make_unique<ness_report>();
        for (const auto& r : ness::run_acceptance(o))
            report->items.push_back({"criterion-" + std::to_string(r.id) + " " + r.name, r.passed, r.detail, r.seconds});
        *out = report.release();
    });
}

size_t ness_report_count(const ness_report* report) { return report ? report->items.size() : 0; }

ness_status ness_report_item(const ness_report* report, size_t index, const char** name, int* passed,
                             const char** detail, double* seconds) {
    return guarded([&] {
        require_handle(report, "report");
        if (index >= report->items.size()) ness::fail(ness::ErrorKind::InvalidArgument, "report index out of range");
        const auto& it = report->items[index];
        if (name) *name = it.name.c_str();
        if (passed) *passed = it.passed ? 1 : 0;
        if (detail) *detail = it.detail.c_str();
        if (seconds) *seconds = it.seconds;
    });
}

int ness_report_all_passed(const ness_report* report) {
    if (!report) return 0;
    for (const auto& it : report->items)
        if (!it.passed) return 0;
    return 1;
}

void ness_report_free(ness_report* report) { delete report; }

}  // extern "C"
