#include "agghoo/cli.hpp"

int main(int argc, char** argv) { return agghoo::cli::cli_main(argc, argv); }
