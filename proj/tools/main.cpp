#include "specopt/cli.hpp"

int main(int argc, char** argv) { return specopt::run_cli(argc, argv); }
