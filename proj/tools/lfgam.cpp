#include "lfgam/cli.hpp"

int main(int argc, char** argv) { return lfgam::cli::main(argc, argv); }
