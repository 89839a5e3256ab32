#include "ragscope/cli.hpp"

int main(int argc, char **argv) { return ragscope::cli::run(argc, argv); }
