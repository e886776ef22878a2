#include "cli.hpp"

int main(int argc, char** argv) { return tasp::cli::run(argc, argv); }
