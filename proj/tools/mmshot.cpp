#include "mmshot/cli.hpp"

int main(int argc, char** argv) { return mmshot::cli::run(argc, argv); }
