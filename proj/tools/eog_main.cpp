#include "eog/cli.hpp"

int main(int argc, char** argv) { return eog::run_cli(argc, argv); }
