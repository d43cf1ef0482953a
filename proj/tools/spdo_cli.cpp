#include "spdo/cli.hpp"

int main(int argc, char** argv) { return spdo::cli_main(argc, argv); }
