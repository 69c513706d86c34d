#include "cli.hpp"

int main(int argc, char** argv) { return halfspec::cli::run(argc, argv); }
