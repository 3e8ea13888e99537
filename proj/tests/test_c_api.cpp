#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "ness/ness.h"

TEST_CASE("C interface: preset run and columns") {
    ness_config* c = nullptr;
    REQUIRE(ness_config_from_preset("single-kerr", 0, &c) == NESS_OK);
    CHECK(ness_config_set(c, "sweep.points", "5") == NESS_OK);
    CHECK(ness_config_validate(c) == NESS_OK);

    ness_result* r = nullptr;
    REQUIRE(ness_run(c, &r) == NESS_OK);
    CHECK(ness_result_exit_status(r) == 0);
    CHECK(ness_result_point_count(r) == 5);

    char* cols = nullptr;
    REQUIRE(ness_result_columns(r, &cols) == NESS_OK);
    CHECK(std::string(cols).rfind("delta_c\nn_0\n", 0) == 0);
    ness_string_free(cols);

    std::vector<double> x(5), n(5), se(5);
    size_t count = 0;
    CHECK(ness_result_column(r, "delta_c", x.data(), x.size(), &count) == NESS_OK);
    CHECK(count == 5);
    CHECK(x.front() == -10.0);
    CHECK(ness_result_column(r, "n_0", n.data(), n.size(), &count) == NESS_OK);
    CHECK(n[2] > 0.0);
    CHECK(ness_result_column(r, "se_n_0", se.data(), se.size(), &count) == NESS_OK);
    CHECK(se[2] == 0.0);
    CHECK(ness_result_column(r, "bogus", n.data(), n.size(), &count) == NESS_ERR_INVALID_ARGUMENT);
    CHECK(std::string(ness_last_error()).find("bogus") != std::string::npos);

    char* csv = nullptr;
    REQUIRE(ness_result_csv(r, &csv) == NESS_OK);
    CHECK(std::string(csv).rfind("delta_c,n_0,", 0) == 0);
    ness_string_free(csv);

    char* meta = nullptr;
    REQUIRE(ness_result_sidecar(c, r, &meta) == NESS_OK);
    CHECK(std::string(meta).find("\"version\"") != std::string::npos);
    ness_string_free(meta);

    ness_result_free(r);
    ness_config_free(c);
}

TEST_CASE("C interface: errors map to status codes") {
    ness_config* c = nullptr;
    CHECK(ness_config_from_preset("nope", 0, &c) == NESS_ERR_CONFIG);
    CHECK(c == nullptr);
    CHECK(std::string(ness_last_error()).find("nope") != std::string::npos);
    CHECK(ness_config_parse("model.kind = jch\nmodel.g = x\n", &c) == NESS_ERR_CONFIG);
    CHECK(ness_config_parse(nullptr, &c) == NESS_ERR_INVALID_ARGUMENT);
    CHECK(ness_config_load("/nonexistent/file.cfg", &c) == NESS_ERR_IO);

    REQUIRE(ness_config_parse("model.kind = bh\nmodel.u = 1\n", &c) == NESS_OK);
    CHECK(ness_last_error()[0] == '\0');
    CHECK(ness_config_set(c, "array.sites", "0") == NESS_OK);
    CHECK(ness_config_validate(c) == NESS_ERR_CONFIG);
    CHECK(ness_config_set(c, "no.such.key", "1") == NESS_ERR_CONFIG);
    char* text = nullptr;
    REQUIRE(ness_config_to_text(c, &text) == NESS_OK);
    CHECK(std::string(text).find("model.u = 1\n") != std::string::npos);
    ness_string_free(text);
    ness_config_free(c);

    CHECK(std::string(ness_status_name(NESS_ERR_NONCONVERGENCE)) == "nonconvergence");
    CHECK(std::string(ness_version()) == "0.1.0");
}

TEST_CASE("C interface: presets and validation report") {
    CHECK(ness_preset_count() == 10);
    CHECK(std::string(ness_preset_name(0)) == "single-jc");
    CHECK(ness_preset_name(99) == nullptr);

    ness_report* rep = nullptr;
    REQUIRE(ness_validate(0, 1, 1, &rep) == NESS_OK);
    CHECK(ness_report_count(rep) >= 7);
    CHECK(ness_report_all_passed(rep) == 0);
    const char* name = nullptr;
    const char* detail = nullptr;
    int passed = -1;
    double seconds = -1;
    CHECK(ness_report_item(rep, 0, &name, &passed, &detail, &seconds) == NESS_OK);
    CHECK(passed == 1);
    CHECK(seconds >= 0.0);
    CHECK(ness_report_item(rep, 1000, &name, &passed, &detail, &seconds) == NESS_ERR_INVALID_ARGUMENT);
    ness_report_free(rep);
}
