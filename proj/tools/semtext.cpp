#include "semtext/cli.hpp"

int main(int argc, char** argv) { return semtext::run_cli(argc, argv); }
