#include "roughmag/cli.hpp"

int main(int argc, char** argv) { return roughmag::cli::cli_main(argc, argv); }
