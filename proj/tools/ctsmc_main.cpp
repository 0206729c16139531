#include "ctsmc/cli.hpp"

int main(int argc, char** argv) { return ctsmc::cli::run(argc, argv); }
