#include "grownet/cli.hpp"

int main(int argc, char** argv) { return grownet::cli::run(argc, argv); }
