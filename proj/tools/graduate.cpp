#include "graduate/cli.hpp"

int main(int argc, char** argv) { return graduate::cli_main(argc, argv); }
