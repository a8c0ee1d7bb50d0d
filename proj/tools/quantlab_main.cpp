#include "quantlab/cli.hpp"

int main(int argc, char** argv) { return quantlab::cli::run(argc, argv); }
