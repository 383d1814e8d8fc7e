#include "aef/cli.hpp"

int main(int argc, char** argv) { return aef::run_subcommand(argc, argv); }
