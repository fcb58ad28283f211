#include "dnsl/cli.hpp"

int main(int argc, char** argv) { return dnsl::run_cli(argc, argv); }
