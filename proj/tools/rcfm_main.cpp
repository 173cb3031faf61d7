#include "rcfm/cli.hpp"

int main(int argc, char** argv) { return rcfm::cli::run(argc, argv); }
