#include <iostream>
#include <string>
#include <vector>

#include "gazeseq/cli.hpp"
#include "gazeseq/platform.hpp"

int main(int argc, char** argv) {
  gazeseq::retain_freed_memory();
  std::ios::sync_with_stdio(false);
  std::vector<std::string> args(argv, argv + argc);
  return gazeseq::cli::execute(args, std::cin, std::cout, std::cerr);
}
