#include <iostream>

#include "securefix/cli.h"

int main(int argc, char** argv) {
  return securefix::run_cli(argc, argv, securefix::current_environment(), std::cout, std::cerr);
}
