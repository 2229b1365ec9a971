#include <iostream>
#include <string>
#include <vector>

#include "ddreg/cli.hpp"

int main(int argc, char **argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ddreg::run_cli(args, std::cout, std::cerr);
}
