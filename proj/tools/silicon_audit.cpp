#include "silicon/cli.hpp"

int main(int argc, char **argv) { return silicon::cli::run(argc, argv); }
