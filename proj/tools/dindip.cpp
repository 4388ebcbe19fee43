#include "dindip/xp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return dindip::xp::cli_dispatch(argc, argv, std::cout, std::cerr); }
