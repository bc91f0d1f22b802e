#include <iostream>
#include <string>
#include <vector>

#include "llmfrac/cli.hpp"

int main(int argc, char** argv) {
    return llmfrac::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
