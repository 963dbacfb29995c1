#include "ddf/runner.hpp"

int main(int argc, char** argv) { return ddf::cli::run_cli(argc, argv); }
