#include "hgmp/cli.hpp"

int main(int argc, char** argv) { return hgmp::cli::run(argc, argv); }
