#include "mbpi/cli.hpp"

int main(int argc, char** argv) { return mbpi::cli::main(argc, argv); }
