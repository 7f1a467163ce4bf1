#include "phantomhaz/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return phantomhaz::run_cli(argc, argv, std::cout, std::cerr); }
