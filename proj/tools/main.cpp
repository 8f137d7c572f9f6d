#include "rollgate/cli.hpp"

int main(int argc, char** argv) { return rollgate::cli::run(argc, argv); }
