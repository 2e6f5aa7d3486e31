#include "utopia/cli.hpp"

int main(int argc, char** argv) { return utopia::run_cli(argc, argv); }
