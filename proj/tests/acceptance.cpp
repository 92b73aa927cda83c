#include <iostream>

#include "dgflow/acceptance.hpp"

int main() {
  const auto results = dgflow::run_acceptance(std::cout);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  return ok ? 0 : 1;
}
