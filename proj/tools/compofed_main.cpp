#include "compofed/harness/cli.hpp"

int main(int argc, char** argv) {
  return compofed::harness::cli_main(argc, argv);
}
