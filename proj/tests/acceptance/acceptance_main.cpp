// Runs the reproduction suite and prints one PASS/FAIL line per criterion.

#include "topospec/reproduction.hpp"

#include <iostream>

int main() {
  int failed = 0;
  for (const auto& spec : topospec::reproduction_criteria()) {
    const auto result = topospec::run_criterion(spec);
    topospec::print_criterion(std::cout, result);
    if (!result.pass) ++failed;
  }
  std::cout << (failed ? "FAILED: " + std::to_string(failed) + " criteria\n" : "all criteria passed\n");
  return failed ? 1 : 0;
}
