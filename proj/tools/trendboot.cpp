#include "trendboot/cli.hpp"

int main(int argc, char** argv) { return trendboot::cli::run(argc, argv); }
