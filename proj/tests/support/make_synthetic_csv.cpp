#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "synthetic.hpp"

// Usage: make_synthetic_csv <rows> <seed> <out.csv>
int main(int argc, char** argv) {
  if (argc != 4) {
    std::fprintf(stderr, "usage: %s <rows> <seed> <out.csv>\n", argv[0]);
    return 2;
  }
  std::ofstream out(argv[3], std::ios::binary);
  out << diabrisk::testing::synthetic_brfss_csv(std::strtoull(argv[1], nullptr, 10),
                                                 std::strtoull(argv[2], nullptr, 10));
  return out ? 0 : 3;
}
