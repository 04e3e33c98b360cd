#include "cosm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return cosm::cli::run(argc, argv, std::cout, std::cerr);
}
