// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "van/commands.hpp"

int main(int argc, char** argv) { return van::run_cli(argc, argv, std::cout, std::cerr); }
