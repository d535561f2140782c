#include "quantamp/cli.hpp"

int main(int argc, char** argv) { return quantamp::cli_main(argc, argv); }
