// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "uvtranse/cli.hpp"

int main(int argc, char** argv) { return uvt::run_cli(argc, argv, std::cout, std::cerr); }
