#include "pibench/cli.hpp"

int main(int argc, char** argv) { return pibench::cli::dispatch(argc, argv); }
