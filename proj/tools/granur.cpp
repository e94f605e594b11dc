#include <iostream>

#include "granur/cli.hpp"

int main(int argc, char** argv) {
    return granur::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
