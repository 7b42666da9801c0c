#include "meritflow/cli.hpp"

int main(int argc, char** argv) { return meritflow::cli_main(argc, argv); }
