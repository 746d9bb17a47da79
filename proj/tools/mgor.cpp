#include "mgor/cli.hpp"

int main(int argc, char** argv) { return mgor::cli::run(argc, argv); }
