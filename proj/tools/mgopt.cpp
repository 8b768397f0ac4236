#include "mgopt/cli_report.hpp"

int main(int argc, char** argv) { return mgopt::run_cli(argc, argv); }
