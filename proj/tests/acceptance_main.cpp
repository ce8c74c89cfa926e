// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <iostream>
#include <string>

#include "hbt/acceptance.hpp"

int main(int argc, char** argv) {
  hbt::AcceptanceOptions opts;
  opts.log = &std::cout;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work-dir" && i + 1 < argc) opts.work_dir = argv[++i];
    else if (arg == "--threads" && i + 1 < argc) opts.threads = std::stoi(argv[++i]);
    else if (arg == "--only" && i + 1 < argc) opts.only.push_back(std::stoi(argv[++i]));
    else {
      std::cerr << "usage: acceptance_suite [--work-dir DIR] [--threads N] [--only ID]...\n";
      return 2;
    }
  }
  const auto results = hbt::run_acceptance(opts);
  int passed = 0;
  for (const auto& r : results) passed += r.passed;
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}
