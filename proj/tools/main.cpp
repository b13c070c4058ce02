#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  cesplan::cli::configure_logging_from_env();
  return cesplan::cli::run(argc, argv, std::cout, std::cerr);
}
