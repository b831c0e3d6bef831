#include <iostream>

#include "lddm_cli/cli.hpp"

int main(int argc, char **argv) {
    return lddm::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
