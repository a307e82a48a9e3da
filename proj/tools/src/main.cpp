#include <iostream>

#include "stmom_cli/app.hpp"

int main(int argc, char** argv) { return stmom::cli::run(argc, argv, std::cout, std::cerr); }
