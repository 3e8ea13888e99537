// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--run-long] [--workers N] [criterion ...]
//
// ACCEPTANCE_RUN_LONG=1 has the same effect as --run-long. Exit status is 0
// only when every selected criterion passes.

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "ness/ness.h"

namespace {

void print_line(const char* name, int passed, const char* detail, double seconds, void* count) {
    std::cout << (passed ? "PASS " : "FAIL ") << name << ": " << detail << " [" << seconds << " s]" << std::endl;
    if (!passed) ++*static_cast<int*>(count);
}

}  // namespace

int main(int argc, char** argv) {
    int run_long = 0, workers = 1;
    if (const char* env = std::getenv("ACCEPTANCE_RUN_LONG")) run_long = std::strcmp(env, "0") != 0 && *env;
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--run-long") {
            run_long = 1;
        } else if (a == "--workers" && i + 1 < argc) {
            workers = std::atoi(argv[++i]);
        } else if (!a.empty() && a.find_first_not_of("0123456789") == std::string::npos) {
            only.push_back(std::atoi(a.c_str()));
        } else {
            std::cerr << "usage: acceptance [--run-long] [--workers N] [criterion ...]\n";
            return 4;
        }
    }
    int failures = 0;
    ness_report* rep = nullptr;
    const ness_status s =
        ness_acceptance(run_long, workers, only.data(), only.size(), print_line, &failures, &rep);
    if (s != NESS_OK) {
        std::cerr << "acceptance aborted: " << ness_last_error() << "\n";
        return 1;
    }
    std::cout << ness_report_count(rep) - static_cast<size_t>(failures) << "/" << ness_report_count(rep)
              << " criteria passed" << std::endl;
    ness_report_free(rep);
    return failures == 0 ? 0 : 3;
}
