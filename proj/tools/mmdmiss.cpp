#include "mmdmiss/cli.hpp"

int main(int argc, char** argv) { return mmdmiss::cli::run(argc, argv); }
