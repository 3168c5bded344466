#include "smoky/cli.hpp"

int main(int argc, char** argv) { return smoky::run_cli(argc, argv); }
