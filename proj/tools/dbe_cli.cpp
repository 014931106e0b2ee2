#include <iostream>

#include "dbe/cli.hpp"

int main(int argc, char** argv) { return dbe::cli::dispatch(argc, argv, std::cerr); }
