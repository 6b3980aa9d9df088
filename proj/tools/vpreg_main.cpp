#include "vpreg/cli.hpp"

int main(int argc, char** argv) { return vpreg::run_cli(argc, argv); }
