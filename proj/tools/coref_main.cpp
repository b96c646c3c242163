#include "coref/cli_main.hpp"

int main(int argc, char** argv) { return coref::cli_main(argc, argv); }
