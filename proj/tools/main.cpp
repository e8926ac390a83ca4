#include "optembed/cli.hpp"

int main(int argc, char** argv) { return optembed::cli_run(argc, argv); }
