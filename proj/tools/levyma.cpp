#include "levyma/cli.hpp"

int main(int argc, char** argv) { return levyma::run_cli(argc, argv); }
