#include <iostream>

#include "swinhaze/cli.hpp"

int main(int argc, char** argv) {
    return swinhaze::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
