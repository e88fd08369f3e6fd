#include "vulnscore/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return vulnscore::cli::run(argc, argv, std::cout, std::cerr);
}
