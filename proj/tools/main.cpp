#include "rdcfold/cli.hpp"

int main(int argc, char** argv) { return rdcfold::cli_main(argc, argv); }
