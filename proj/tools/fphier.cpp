#include "fph/cli.hpp"

int main(int argc, char** argv) { return fph::cli::run(argc, argv); }
