#include "cgff/parallel.hpp"

#include <cstdlib>
#include <string>

namespace cgff {

int default_threads() {
  if (const char* env = std::getenv("CGFF_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

}  // namespace cgff
