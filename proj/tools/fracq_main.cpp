#include "fracq/cli.hpp"

int main(int argc, char** argv) { return fracq::cli::run(argc, argv); }
