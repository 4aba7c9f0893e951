#include "qgraphino/cli.hpp"

int main(int argc, char** argv) { return qgraphino::cli::run(argc, argv); }
