#include "quadnet/cli.hpp"

int main(int argc, char** argv) { return quadnet::cli::main(argc, argv); }
