#include "ssllab/cli.hpp"

int main(int argc, char** argv) { return ssllab::run_cli(argc, argv); }
