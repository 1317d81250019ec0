#include "cli.hpp"

int main(int argc, char** argv) { return dopf::cli::run_cli(argc, argv); }
